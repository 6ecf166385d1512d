//! Ensemble distinguishability, classification scores and the significance tests
//! used to compare configurations.

use rayon::prelude::*;

use crate::embeddings::{EmbeddingError, EmbeddingSpec};
use crate::nn::{Model, NnError};
use crate::qsim::{hermitian_eigen, trace_norm_hermitian, CMatrix, DensityMatrix, SimError, StateVector};
use crate::C64;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricError {
    #[error("no samples of class {0}")]
    EmptyClass(u8),
    #[error("empty input")]
    EmptyInput,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("priors must lie in [0,1] and sum to 1, got {0} and {1}")]
    BadPriors(f64, f64),
    #[error("label {0} is not 0 or 1")]
    BadLabel(u8),
    #[error("need at least {needed} samples, got {found}")]
    TooFewSamples { needed: usize, found: usize },
    #[error("both samples have zero variance and different means")]
    DegenerateSamples,
    #[error("input is constant; correlation undefined")]
    ConstantInput,
    #[error("non-finite value in input")]
    NonFinite,
    #[error("{m} comparisons requested for {n} p-values")]
    TooFewComparisons { m: usize, n: usize },
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Nn(#[from] NnError),
}

/// Class-averaged states with their priors.
#[derive(Clone, Debug, PartialEq)]
pub struct EnsemblePair {
    pub rho_plus: DensityMatrix,
    pub rho_minus: DensityMatrix,
    pub q_plus: f64,
    pub q_minus: f64,
}

impl EnsemblePair {
    pub fn new(rho_plus: DensityMatrix, rho_minus: DensityMatrix, q_plus: f64, q_minus: f64) -> Result<Self, MetricError> {
        if rho_plus.dim() != rho_minus.dim() {
            return Err(MetricError::DimensionMismatch(rho_plus.dim(), rho_minus.dim()));
        }
        let ok = |q: f64| (0.0..=1.0).contains(&q);
        if !ok(q_plus) || !ok(q_minus) || (q_plus + q_minus - 1.0).abs() > 1e-12 {
            return Err(MetricError::BadPriors(q_plus, q_minus));
        }
        Ok(Self {
            rho_plus,
            rho_minus,
            q_plus,
            q_minus,
        })
    }

    pub fn equal_priors(rho_plus: DensityMatrix, rho_minus: DensityMatrix) -> Result<Self, MetricError> {
        Self::new(rho_plus, rho_minus, 0.5, 0.5)
    }

    /// `q₊ρ₊ − q₋ρ₋`.
    pub fn weighted_difference(&self) -> CMatrix {
        self.rho_plus
            .entries()
            .scale(C64::new(self.q_plus, 0.0))
            .sub(&self.rho_minus.entries().scale(C64::new(self.q_minus, 0.0)))
    }
}

const CHUNK: usize = 16;

/// Arithmetic mean of `|ψ⟩⟨ψ|`. Partial sums are taken over fixed chunks and combined
/// in order, so the result does not depend on the thread count.
pub fn mean_density(states: &[StateVector]) -> Result<DensityMatrix, MetricError> {
    let first = states.first().ok_or(MetricError::EmptyInput)?;
    let dim = first.dim();
    if let Some(s) = states.iter().find(|s| s.dim() != dim) {
        return Err(MetricError::DimensionMismatch(dim, s.dim()));
    }
    let partials: Vec<Vec<C64>> = states
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut acc = vec![C64::new(0.0, 0.0); dim * dim];
            for s in chunk {
                let a = s.amplitudes();
                for i in 0..dim {
                    let ai = a[i];
                    let row = &mut acc[i * dim..(i + 1) * dim];
                    for (r, aj) in row.iter_mut().zip(a) {
                        *r += ai * aj.conj();
                    }
                }
            }
            acc
        })
        .collect();
    let mut total = vec![C64::new(0.0, 0.0); dim * dim];
    for p in partials {
        for (t, v) in total.iter_mut().zip(p) {
            *t += v;
        }
    }
    let inv = 1.0 / states.len() as f64;
    let m = CMatrix::from_fn(dim, dim, |i, j| total[i * dim + j] * inv);
    Ok(DensityMatrix::from_matrix_unchecked(m))
}

/// Mean embedded state of `class` from precomputed interface features.
pub fn class_mean_from_features(
    spec: &EmbeddingSpec,
    features: &[Vec<f64>],
    labels: &[u8],
    class: u8,
) -> Result<DensityMatrix, MetricError> {
    if features.len() != labels.len() {
        return Err(MetricError::LengthMismatch(features.len(), labels.len()));
    }
    let members: Vec<&Vec<f64>> = features.iter().zip(labels).filter(|(_, &l)| l == class).map(|(f, _)| f).collect();
    if members.is_empty() {
        return Err(MetricError::EmptyClass(class));
    }
    let states = members
        .par_iter()
        .map(|f| spec.embed_state(f))
        .collect::<Result<Vec<_>, _>>()?;
    mean_density(&states)
}

/// Mean embedded state of `class`, evaluating the interface network with `weights`.
pub fn class_mean_state<M: Model + Sync + ?Sized>(
    spec: &EmbeddingSpec,
    interface: &M,
    weights: &[f64],
    images: &[Vec<f64>],
    labels: &[u8],
    class: u8,
) -> Result<DensityMatrix, MetricError> {
    if images.len() != labels.len() {
        return Err(MetricError::LengthMismatch(images.len(), labels.len()));
    }
    let members: Vec<&Vec<f64>> = images.iter().zip(labels).filter(|(_, &l)| l == class).map(|(f, _)| f).collect();
    if members.is_empty() {
        return Err(MetricError::EmptyClass(class));
    }
    let features = members
        .par_iter()
        .map(|img| interface.forward_pass_with(weights, img).map(|p| p.output().to_vec()))
        .collect::<Result<Vec<_>, _>>()?;
    let states = features
        .par_iter()
        .map(|f| spec.embed_state(f))
        .collect::<Result<Vec<_>, _>>()?;
    mean_density(&states)
}

/// `½‖ρ − σ‖₁`.
pub fn trace_distance_states(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64, MetricError> {
    if rho.dim() != sigma.dim() {
        return Err(MetricError::DimensionMismatch(rho.dim(), sigma.dim()));
    }
    Ok(0.5 * trace_norm_hermitian(&rho.entries().sub(sigma.entries()))?)
}

/// Prior-free `D = ½‖ρ₊ − ρ₋‖₁ ∈ [0, 1]`. This is the figure reported by training.
pub fn trace_distance(pair: &EnsemblePair) -> Result<f64, MetricError> {
    trace_distance_states(&pair.rho_plus, &pair.rho_minus)
}

/// `½‖q₊ρ₊ − q₋ρ₋‖₁`, which is at most ½ for equal priors.
pub fn trace_distance_weighted(pair: &EnsemblePair) -> Result<f64, MetricError> {
    Ok(0.5 * trace_norm_hermitian(&pair.weighted_difference())?)
}

/// `½ + ½‖q₊ρ₊ − q₋ρ₋‖₁`, the best achievable success probability. With equal priors
/// this is `½(1 + D)`.
pub fn helstrom_optimal_accuracy(pair: &EnsemblePair) -> Result<f64, MetricError> {
    Ok(0.5 + trace_distance_weighted(pair)?)
}

/// Projector onto the positive eigenspace of `q₊ρ₊ − q₋ρ₋`; measuring it and guessing
/// "+" on outcome 1 attains the optimum.
pub fn helstrom_measurement(pair: &EnsemblePair) -> Result<CMatrix, MetricError> {
    let eig = hermitian_eigen(&pair.weighted_difference())?;
    let dim = eig.values.len();
    let mut p = CMatrix::zeros(dim, dim);
    for (k, &v) in eig.values.iter().enumerate() {
        if v <= 0.0 {
            continue;
        }
        let col = eig.vectors.column(k);
        for i in 0..dim {
            for j in 0..dim {
                p[(i, j)] += col[i] * col[j].conj();
            }
        }
    }
    Ok(p)
}

/// `q₊ tr(Pρ₊) + q₋ tr((I − P)ρ₋)` for a two-outcome measurement `{P, I − P}`.
pub fn measurement_accuracy(pair: &EnsemblePair, positive: &CMatrix) -> Result<f64, MetricError> {
    let dim = pair.rho_plus.dim();
    if positive.rows() != dim || positive.cols() != dim {
        return Err(MetricError::DimensionMismatch(dim, positive.rows()));
    }
    let tp = positive.matmul(pair.rho_plus.entries()).trace().re;
    let tm = positive.matmul(pair.rho_minus.entries()).trace().re;
    Ok(pair.q_plus * tp + pair.q_minus * (1.0 - tm))
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ClassificationReport {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Set when a denominator was zero and the score was reported as 0.
    pub precision_undefined: bool,
    pub recall_undefined: bool,
    pub f1_undefined: bool,
}

/// Scores with label 1 as the positive class.
pub fn classification_report(predictions: &[u8], labels: &[u8]) -> Result<ClassificationReport, MetricError> {
    if predictions.len() != labels.len() {
        return Err(MetricError::LengthMismatch(predictions.len(), labels.len()));
    }
    if predictions.is_empty() {
        return Err(MetricError::EmptyInput);
    }
    let (mut tp, mut fp, mut fn_, mut correct) = (0usize, 0usize, 0usize, 0usize);
    for (&p, &l) in predictions.iter().zip(labels) {
        if let Some(&b) = [p, l].iter().find(|&&v| v > 1) {
            return Err(MetricError::BadLabel(b));
        }
        correct += usize::from(p == l);
        match (p, l) {
            (1, 1) => tp += 1,
            (1, 0) => fp += 1,
            (0, 1) => fn_ += 1,
            _ => {}
        }
    }
    let ratio = |num: usize, den: usize| if den == 0 { (0.0, true) } else { (num as f64 / den as f64, false) };
    let (precision, precision_undefined) = ratio(tp, tp + fp);
    let (recall, recall_undefined) = ratio(tp, tp + fn_);
    let (f1, f1_undefined) = if precision + recall == 0.0 {
        (0.0, true)
    } else {
        (2.0 * precision * recall / (precision + recall), false)
    };
    Ok(ClassificationReport {
        accuracy: correct as f64 / predictions.len() as f64,
        precision,
        recall,
        f1,
        precision_undefined,
        recall_undefined,
        f1_undefined,
    })
}

/// Fraction of equal entries.
pub fn accuracy(predictions: &[u8], labels: &[u8]) -> Result<f64, MetricError> {
    Ok(classification_report(predictions, labels)?.accuracy)
}

// ---- special functions ----

const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// `ln Γ(x)` for `x > 0` (Lanczos, g = 7).
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // Reflection.
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = LANCZOS[0];
    let t = x + 7.5;
    for (i, &c) in LANCZOS.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

fn beta_continued_fraction(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let (qab, qap, qam) = (a + b, a + 1.0, a - 1.0);
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=1000 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < 1e-15 {
            break;
        }
    }
    h
}

/// Regularized incomplete beta `I_x(a, b)`.
pub fn incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_continued_fraction(a, b, x) / a
    } else {
        1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b
    }
}

/// Two-sided tail `P(|T| ≥ |t|)` of Student's t with `dof` degrees of freedom.
pub fn student_t_two_sided(t: f64, dof: f64) -> f64 {
    if t.is_infinite() {
        return 0.0;
    }
    incomplete_beta(0.5 * dof, 0.5, dof / (dof + t * t))
}

// ---- tests of significance ----

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WelchTest {
    pub t: f64,
    pub dof: f64,
    pub p_two_sided: f64,
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let v = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, v)
}

fn check_finite(x: &[f64]) -> Result<(), MetricError> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(MetricError::NonFinite)
    }
}

/// Unequal-variance two-sample t-test with Welch–Satterthwaite degrees of freedom.
///
/// Two constant samples with the same mean give `t = 0, p = 1`; with different means
/// the statistic is undefined and an error is returned.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<WelchTest, MetricError> {
    for s in [a, b] {
        if s.len() < 2 {
            return Err(MetricError::TooFewSamples { needed: 2, found: s.len() });
        }
        check_finite(s)?;
    }
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (sa, sb) = (va / na, vb / nb);
    let se2 = sa + sb;
    if se2 == 0.0 {
        if ma == mb {
            return Ok(WelchTest {
                t: 0.0,
                dof: na + nb - 2.0,
                p_two_sided: 1.0,
            });
        }
        return Err(MetricError::DegenerateSamples);
    }
    let t = (ma - mb) / se2.sqrt();
    let dof = se2 * se2 / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
    Ok(WelchTest {
        t,
        dof,
        p_two_sided: student_t_two_sided(t, dof),
    })
}

/// `min(1, m·p)` elementwise.
pub fn bonferroni(p_values: &[f64], m: usize) -> Result<Vec<f64>, MetricError> {
    if m < p_values.len() {
        return Err(MetricError::TooFewComparisons { m, n: p_values.len() });
    }
    Ok(p_values.iter().map(|&p| (p * m as f64).min(1.0)).collect())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Correlation {
    pub pearson_r: f64,
    pub pearson_p: f64,
    pub spearman_rho: f64,
    pub spearman_p: f64,
}

fn pearson(x: &[f64], y: &[f64]) -> Result<f64, MetricError> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(MetricError::ConstantInput);
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// 1-based ranks; ties share the average rank.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&i, &j| x[i].total_cmp(&x[j]));
    let mut ranks = vec![0.0; x.len()];
    let mut start = 0;
    while start < idx.len() {
        let mut end = start + 1;
        while end < idx.len() && x[idx[end]] == x[idx[start]] {
            end += 1;
        }
        let r = (start + end + 1) as f64 / 2.0;
        for &i in &idx[start..end] {
            ranks[i] = r;
        }
        start = end;
    }
    ranks
}

fn correlation_p(r: f64, n: usize) -> f64 {
    let dof = (n - 2) as f64;
    if r.abs() >= 1.0 {
        return 0.0;
    }
    student_t_two_sided(r * (dof / (1.0 - r * r)).sqrt(), dof)
}

/// Pearson and Spearman coefficients with t-approximation p-values.
pub fn correlations(x: &[f64], y: &[f64]) -> Result<Correlation, MetricError> {
    if x.len() != y.len() {
        return Err(MetricError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 3 {
        return Err(MetricError::TooFewSamples { needed: 3, found: x.len() });
    }
    check_finite(x)?;
    check_finite(y)?;
    let r = pearson(x, y)?;
    let rho = pearson(&average_ranks(x), &average_ranks(y))?;
    Ok(Correlation {
        pearson_r: r,
        pearson_p: correlation_p(r, x.len()),
        spearman_rho: rho,
        spearman_p: correlation_p(rho, x.len()),
    })
}
