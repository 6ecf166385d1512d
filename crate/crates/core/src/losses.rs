//! State-similarity losses and their feature gradients.

use std::fmt;
use std::str::FromStr;

use crate::embeddings::{EmbeddingError, EmbeddingSpec};
use crate::qsim::{accumulate_adjoint_gradient, run_circuit_from, StateVector};
use crate::C64;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LossError {
    #[error("batch is empty")]
    EmptyBatch,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("trace distance {0} outside [0, 1]")]
    DistanceOutOfRange(f64),
    #[error("pair ({0}, {0}) compares a sample with itself")]
    SelfPair(usize),
    #[error("pair delta must be 0 or 1, got {0}")]
    BadDelta(u8),
    #[error("unknown loss kind `{0}`")]
    UnknownKind(String),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
}

/// Similarity function `f_U` used inside the pairwise loss.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SimilarityKind {
    /// `|⟨0|U†(x₁)U(x₂)|0⟩|²`.
    Fidelity,
    /// `Re tr(U†(x₁)U(x₂)) / 2ⁿ`.
    Hs,
    /// `|tr(U†(x₁)U(x₂))| / 2ⁿ`.
    HsAbs,
}

impl SimilarityKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Fidelity => "fidelity",
            Self::Hs => "hs",
            Self::HsAbs => "hs_abs",
        }
    }
}

impl fmt::Display for SimilarityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SimilarityKind {
    type Err = LossError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fidelity" => Ok(Self::Fidelity),
            "hs" => Ok(Self::Hs),
            "hs_abs" => Ok(Self::HsAbs),
            other => Err(LossError::UnknownKind(other.to_string())),
        }
    }
}

/// Similarity value with gradients with respect to both feature vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct Similarity {
    pub value: f64,
    pub grad1: Vec<f64>,
    pub grad2: Vec<f64>,
}

fn check_features(spec: &EmbeddingSpec, f1: &[f64], f2: &[f64]) -> Result<(), LossError> {
    if f1.len() != f2.len() {
        return Err(LossError::LengthMismatch(f1.len(), f2.len()));
    }
    if f1.len() != spec.param_count() {
        return Err(LossError::LengthMismatch(f1.len(), spec.param_count()));
    }
    Ok(())
}

fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn fidelity_similarity(spec: &EmbeddingSpec, f1: &[f64], f2: &[f64]) -> Result<f64, LossError> {
    check_features(spec, f1, f2)?;
    let a = spec.embed_state(f1)?.inner(&spec.embed_state(f2)?);
    Ok(a.norm_sqr())
}

pub fn hs_similarity(spec: &EmbeddingSpec, f1: &[f64], f2: &[f64]) -> Result<f64, LossError> {
    check_features(spec, f1, f2)?;
    Ok(hs_trace(spec, f1, f2)?.re / spec_dim(spec))
}

pub fn hs_abs_similarity(spec: &EmbeddingSpec, f1: &[f64], f2: &[f64]) -> Result<f64, LossError> {
    check_features(spec, f1, f2)?;
    Ok(hs_trace(spec, f1, f2)?.norm() / spec_dim(spec))
}

pub fn similarity(kind: SimilarityKind, spec: &EmbeddingSpec, f1: &[f64], f2: &[f64]) -> Result<f64, LossError> {
    match kind {
        SimilarityKind::Fidelity => fidelity_similarity(spec, f1, f2),
        SimilarityKind::Hs => hs_similarity(spec, f1, f2),
        SimilarityKind::HsAbs => hs_abs_similarity(spec, f1, f2),
    }
}

fn spec_dim(spec: &EmbeddingSpec) -> f64 {
    (1usize << spec.n_qubits) as f64
}

/// `tr(U†(f1) U(f2))` column by column.
fn hs_trace(spec: &EmbeddingSpec, f1: &[f64], f2: &[f64]) -> Result<C64, LossError> {
    let (g1, g2) = (spec.build(f1)?, spec.build(f2)?);
    let n = spec.n_qubits;
    let mut t = C64::new(0.0, 0.0);
    for j in 0..(1usize << n) {
        let c1 = run_circuit_from(StateVector::basis(n, j), &g1).map_err(EmbeddingError::from)?;
        let c2 = run_circuit_from(StateVector::basis(n, j), &g2).map_err(EmbeddingError::from)?;
        t += c1.inner(&c2);
    }
    Ok(t)
}

/// Value and feature gradients by adjoint differentiation through the simulator.
pub fn similarity_with_grad(
    kind: SimilarityKind,
    spec: &EmbeddingSpec,
    f1: &[f64],
    f2: &[f64],
) -> Result<Similarity, LossError> {
    check_features(spec, f1, f2)?;
    let (g1, g2) = (spec.build(f1)?, spec.build(f2)?);
    let p = f1.len();
    let mut grad1 = vec![0.0; p];
    let mut grad2 = vec![0.0; p];
    let sim = |e: crate::qsim::SimError| LossError::Embedding(e.into());
    let n = spec.n_qubits;
    match kind {
        SimilarityKind::Fidelity => {
            let s1 = run_circuit_from(StateVector::zero(n), &g1).map_err(sim)?;
            let s2 = run_circuit_from(StateVector::zero(n), &g2).map_err(sim)?;
            let a = inner(s1.amplitudes(), s2.amplitudes());
            let cot2: Vec<C64> = s1.amplitudes().iter().map(|x| 2.0 * a * x).collect();
            let cot1: Vec<C64> = s2.amplitudes().iter().map(|x| 2.0 * a.conj() * x).collect();
            accumulate_adjoint_gradient(&g1, &s1, &cot1, &mut grad1).map_err(sim)?;
            accumulate_adjoint_gradient(&g2, &s2, &cot2, &mut grad2).map_err(sim)?;
            Ok(Similarity {
                value: a.norm_sqr(),
                grad1,
                grad2,
            })
        }
        SimilarityKind::Hs | SimilarityKind::HsAbs => {
            let d = spec_dim(spec);
            let mut cols = Vec::with_capacity(1 << n);
            let mut t = C64::new(0.0, 0.0);
            for j in 0..(1usize << n) {
                let c1 = run_circuit_from(StateVector::basis(n, j), &g1).map_err(sim)?;
                let c2 = run_circuit_from(StateVector::basis(n, j), &g2).map_err(sim)?;
                t += c1.inner(&c2);
                cols.push((c1, c2));
            }
            // f = Re(w̄ t)/d with w = 1 for Hs and w = t/|t| for HsAbs.
            let (value, w) = match kind {
                SimilarityKind::Hs => (t.re / d, C64::new(1.0, 0.0)),
                _ => {
                    let m = t.norm();
                    let w = if m > 0.0 { t / m } else { C64::new(1.0, 0.0) };
                    (m / d, w)
                }
            };
            for (c1, c2) in &cols {
                let cot2: Vec<C64> = c1.amplitudes().iter().map(|x| w * x / d).collect();
                let cot1: Vec<C64> = c2.amplitudes().iter().map(|x| w.conj() * x / d).collect();
                accumulate_adjoint_gradient(&g1, c1, &cot1, &mut grad1).map_err(sim)?;
                accumulate_adjoint_gradient(&g2, c2, &cot2, &mut grad2).map_err(sim)?;
            }
            Ok(Similarity { value, grad1, grad2 })
        }
    }
}

/// A pair of sample indices with `delta = 1` iff their labels agree.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Pair {
    pub i: usize,
    pub j: usize,
    pub delta: u8,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PairBatch {
    pairs: Vec<Pair>,
}

impl PairBatch {
    pub fn new(pairs: Vec<Pair>) -> Result<Self, LossError> {
        if pairs.is_empty() {
            return Err(LossError::EmptyBatch);
        }
        for p in &pairs {
            if p.i == p.j {
                return Err(LossError::SelfPair(p.i));
            }
            if p.delta > 1 {
                return Err(LossError::BadDelta(p.delta));
            }
        }
        Ok(Self { pairs })
    }

    pub fn pairs(&self) -> &[Pair] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// `mean((f − δ)²)` over precomputed similarities.
pub fn nqe_loss_from_similarities(similarities: &[f64], deltas: &[u8]) -> Result<f64, LossError> {
    if similarities.is_empty() {
        return Err(LossError::EmptyBatch);
    }
    if similarities.len() != deltas.len() {
        return Err(LossError::LengthMismatch(similarities.len(), deltas.len()));
    }
    let n = similarities.len() as f64;
    Ok(similarities
        .iter()
        .zip(deltas)
        .map(|(f, &d)| (f - d as f64).powi(2))
        .sum::<f64>()
        / n)
}

/// Pairwise loss with features looked up by sample index.
pub fn nqe_loss(
    kind: SimilarityKind,
    spec: &EmbeddingSpec,
    batch: &PairBatch,
    features: &[Vec<f64>],
) -> Result<f64, LossError> {
    let mut sims = Vec::with_capacity(batch.len());
    let mut deltas = Vec::with_capacity(batch.len());
    for p in batch.pairs() {
        sims.push(similarity(kind, spec, &features[p.i], &features[p.j])?);
        deltas.push(p.delta);
    }
    nqe_loss_from_similarities(&sims, &deltas)
}

/// Mean squared error between predicted probabilities and binary labels.
pub fn vqa_mse_loss(predictions: &[f64], labels: &[u8]) -> Result<f64, LossError> {
    if predictions.len() != labels.len() {
        return Err(LossError::LengthMismatch(predictions.len(), labels.len()));
    }
    if predictions.is_empty() {
        return Err(LossError::EmptyBatch);
    }
    Ok(predictions
        .iter()
        .zip(labels)
        .map(|(p, &y)| (p - y as f64).powi(2))
        .sum::<f64>()
        / predictions.len() as f64)
}

/// `max(0, ½ − D)`, the minimum discrimination error, for the prior-weighted trace
/// distance `D = ½‖q₊ρ₊ − q₋ρ₋‖₁`.
pub fn helstrom_error_bound(d_tr: f64) -> Result<f64, LossError> {
    if !(0.0..=1.0).contains(&d_tr) {
        return Err(LossError::DistanceOutOfRange(d_tr));
    }
    Ok((0.5 - d_tr).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embeddings::FeatureMapKind;
    use crate::nn::relative_error;
    use proptest::prelude::*;

    fn spec(kind: FeatureMapKind) -> EmbeddingSpec {
        EmbeddingSpec::new(kind, 4).unwrap()
    }

    #[test]
    fn identical_features_are_maximally_similar() {
        for kind in FeatureMapKind::ALL {
            let s = spec(kind);
            let f: Vec<f64> = (0..s.param_count()).map(|i| (i as f64 * 0.71).sin()).collect();
            assert!((fidelity_similarity(&s, &f, &f).unwrap() - 1.0).abs() < 1e-12);
            assert!((hs_similarity(&s, &f, &f).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zz_orthogonal_pair() {
        // θ₀ = π/2 turns qubit 0 from |+⟩ into i|−⟩.
        let s = EmbeddingSpec::new(FeatureMapKind::ZzUnit, 2).unwrap();
        let f = fidelity_similarity(&s, &[0.0, 0.0, 0.0], &[std::f64::consts::FRAC_PI_2, 0.0, 0.0]).unwrap();
        assert!(f.abs() < 1e-14);
    }

    #[test]
    fn hs_two_qubit_diagonal_closed_form() {
        // For NC units with X-axis single-qubit terms only, U = ⊗ exp(iθ_q X) and
        // tr(U†(a)U(b))/4 = Π cos(b_q − a_q).
        let s = EmbeddingSpec::new(FeatureMapKind::NcxUnit, 2).unwrap();
        let (a, b) = ([0.3f64, -0.4, 0.0, 0.0], [1.1f64, 0.2, 0.0, 0.0]);
        let want = (b[0] - a[0]).cos() * (b[1] - a[1]).cos();
        assert!((hs_similarity(&s, &a, &b).unwrap() - want).abs() < 1e-13);
    }

    #[test]
    fn hs_global_phase_minus_one() {
        // exp(iθX)exp(iθ'X) with θ' − θ = π on one qubit gives U₂ = −U₁.
        let s = EmbeddingSpec::new(FeatureMapKind::NcxUnit, 2).unwrap();
        let a = [0.2, 0.0, 0.0, 0.0];
        let b = [0.2 + std::f64::consts::PI, 0.0, 0.0, 0.0];
        assert!((hs_similarity(&s, &a, &b).unwrap() + 1.0).abs() < 1e-13);
        assert!((hs_abs_similarity(&s, &a, &b).unwrap() - 1.0).abs() < 1e-13);
    }

    #[test]
    fn loss_arithmetic() {
        assert_eq!(nqe_loss_from_similarities(&[1.0, 1.0], &[1, 1]).unwrap(), 0.0);
        assert_eq!(nqe_loss_from_similarities(&[0.0, 0.0], &[0, 0]).unwrap(), 0.0);
        assert_eq!(nqe_loss_from_similarities(&[0.5], &[1]).unwrap(), 0.25);
        assert!(matches!(nqe_loss_from_similarities(&[], &[]), Err(LossError::EmptyBatch)));
        assert_eq!(vqa_mse_loss(&[1.0, 0.0], &[1, 0]).unwrap(), 0.0);
        assert_eq!(vqa_mse_loss(&[0.5; 4], &[1, 0, 1, 0]).unwrap(), 0.25);
        assert!((vqa_mse_loss(&[0.9, 0.2], &[1, 0]).unwrap() - 0.025).abs() < 1e-15);
        assert!(vqa_mse_loss(&[0.9], &[1, 0]).is_err());
    }

    #[test]
    fn helstrom_bound_examples() {
        assert_eq!(helstrom_error_bound(0.0).unwrap(), 0.5);
        assert_eq!(helstrom_error_bound(0.5).unwrap(), 0.0);
        assert_eq!(helstrom_error_bound(0.858).unwrap(), 0.0);
        assert!(helstrom_error_bound(1.2).is_err());
        assert!(helstrom_error_bound(-0.1).is_err());
    }

    #[test]
    fn pair_batch_validation() {
        assert!(PairBatch::new(vec![]).is_err());
        assert!(PairBatch::new(vec![Pair { i: 2, j: 2, delta: 1 }]).is_err());
        assert!(PairBatch::new(vec![Pair { i: 2, j: 3, delta: 2 }]).is_err());
    }

    #[test]
    fn nqe_loss_pair_order_invariant() {
        let s = spec(FeatureMapKind::NcStack);
        let feats: Vec<Vec<f64>> = (0..4)
            .map(|k| (0..24).map(|i| ((i * 3 + k * 5) as f64 * 0.37).cos()).collect())
            .collect();
        let fwd = PairBatch::new(vec![Pair { i: 0, j: 1, delta: 1 }, Pair { i: 2, j: 3, delta: 0 }]).unwrap();
        let rev = PairBatch::new(vec![Pair { i: 1, j: 0, delta: 1 }, Pair { i: 3, j: 2, delta: 0 }]).unwrap();
        for k in [SimilarityKind::Fidelity, SimilarityKind::Hs] {
            let a = nqe_loss(k, &s, &fwd, &feats).unwrap();
            let b = nqe_loss(k, &s, &rev, &feats).unwrap();
            assert!((a - b).abs() < 1e-12);
        }
    }

    fn fd_grad(kind: SimilarityKind, s: &EmbeddingSpec, f1: &[f64], f2: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let h = 1e-5;
        let mut g1 = vec![0.0; f1.len()];
        let mut g2 = vec![0.0; f2.len()];
        for i in 0..f1.len() {
            let (mut p, mut m) = (f1.to_vec(), f1.to_vec());
            p[i] += h;
            m[i] -= h;
            g1[i] = (similarity(kind, s, &p, f2).unwrap() - similarity(kind, s, &m, f2).unwrap()) / (2.0 * h);
            let (mut p, mut m) = (f2.to_vec(), f2.to_vec());
            p[i] += h;
            m[i] -= h;
            g2[i] = (similarity(kind, s, f1, &p).unwrap() - similarity(kind, s, f1, &m).unwrap()) / (2.0 * h);
        }
        (g1, g2)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]

        #[test]
        fn fidelity_symmetric_and_bounded(f in proptest::collection::vec(-3.0f64..3.0, 60), k in 0usize..11) {
            let s = spec(FeatureMapKind::ALL[k]);
            let p = s.param_count();
            let (a, b) = (&f[..p], &f[30..30 + p]);
            let ab = fidelity_similarity(&s, a, b).unwrap();
            let ba = fidelity_similarity(&s, b, a).unwrap();
            prop_assert!((ab - ba).abs() < 1e-12);
            prop_assert!((-1e-12..=1.0 + 1e-12).contains(&ab));
            let hs = hs_similarity(&s, a, b).unwrap();
            prop_assert!((hs - hs_similarity(&s, b, a).unwrap()).abs() < 1e-12);
            prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&hs));
        }

        #[test]
        fn gradients_match_finite_differences(f in proptest::collection::vec(-3.0f64..3.0, 60), k in 0usize..11, l in 0usize..3) {
            let kind = [SimilarityKind::Fidelity, SimilarityKind::Hs, SimilarityKind::HsAbs][l];
            let s = spec(FeatureMapKind::ALL[k]);
            let p = s.param_count();
            let (a, b) = (&f[..p], &f[30..30 + p]);
            let g = similarity_with_grad(kind, &s, a, b).unwrap();
            prop_assert!((g.value - similarity(kind, &s, a, b).unwrap()).abs() < 1e-12);
            let (fd1, fd2) = fd_grad(kind, &s, a, b);
            for i in 0..p {
                prop_assert!(relative_error(g.grad1[i], fd1[i], 1e-6) < 1e-3, "g1[{}] {} vs {}", i, g.grad1[i], fd1[i]);
                prop_assert!(relative_error(g.grad2[i], fd2[i], 1e-6) < 1e-3, "g2[{}] {} vs {}", i, g.grad2[i], fd2[i]);
            }
        }
    }
}
