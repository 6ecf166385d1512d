//! Hardware-style noise: gate depolarizing, thermal relaxation and readout flips,
//! with density-matrix execution and gradients.
//!
//! After every gate the gate's qubits get a depolarizing channel (`p1q` or `p2q` by
//! arity) and then thermal relaxation for the gate duration, applied per qubit.
//! Readout relaxes the measured qubits for `dur_meas_us` and flips each recorded bit
//! with probability `p_meas`.

use serde::{Deserialize, Serialize};

use crate::ansatz::{build_qcnn, AnsatzError, QcnnSpec};
use crate::embeddings::{EmbeddingError, EmbeddingSpec};
use crate::losses::Similarity;
use crate::qsim::{check_gate, pauli, Binding, CMatrix, DensityMatrix, GateOp, KrausChannel, SimError};
use crate::C64;

/// Largest register simulated as a density matrix.
pub const MAX_DENSITY_QUBITS: usize = 8;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NoiseError {
    #[error("invalid noise model: {0}")]
    InvalidModel(String),
    #[error("probability {0} outside [0, 1]")]
    BadProbability(f64),
    #[error("{0} qubits exceed the density-matrix limit")]
    TooManyQubits(usize),
    #[error("no noise rule for a {0}-qubit gate")]
    UnsupportedArity(usize),
    #[error("failed to parse noise model: {0}")]
    Parse(String),
    #[error("feature vectors differ in length: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Ansatz(#[from] AnsatzError),
}

impl From<serde_json::Error> for NoiseError {
    fn from(e: serde_json::Error) -> Self {
        Self::Parse(e.to_string())
    }
}

/// Device parameters. Times are in microseconds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseModel {
    pub t1_us: f64,
    pub t2_us: f64,
    pub p1q: f64,
    pub p2q: f64,
    pub p_meas: f64,
    pub dur_1q_us: f64,
    pub dur_2q_us: f64,
    pub dur_meas_us: f64,
}

const FAKE_VIGO: &str = include_str!("../presets/fake_vigo.json");

impl NoiseModel {
    /// Averages of the five-qubit FakeVigo backend.
    pub fn fake_vigo() -> Self {
        Self::from_json(FAKE_VIGO).expect("bundled preset")
    }

    /// No errors and infinite coherence times.
    pub fn noiseless() -> Self {
        Self {
            t1_us: f64::INFINITY,
            t2_us: f64::INFINITY,
            p1q: 0.0,
            p2q: 0.0,
            p_meas: 0.0,
            dur_1q_us: 0.035,
            dur_2q_us: 0.30,
            dur_meas_us: 1.0,
        }
    }

    pub fn from_json(s: &str) -> Result<Self, NoiseError> {
        let m: Self = serde_json::from_str(s)?;
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<(), NoiseError> {
        let bad = |m: String| Err(NoiseError::InvalidModel(m));
        if !(self.t1_us > 0.0) || !(self.t2_us > 0.0) {
            return bad(format!("coherence times must be positive, got T1={} T2={}", self.t1_us, self.t2_us));
        }
        if self.t2_us > 2.0 * self.t1_us {
            return bad(format!("T2={} exceeds 2·T1={}", self.t2_us, 2.0 * self.t1_us));
        }
        for (name, p) in [("p1q", self.p1q), ("p2q", self.p2q), ("p_meas", self.p_meas)] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name}={p} outside [0, 1]"));
            }
        }
        for (name, d) in [("dur_1q_us", self.dur_1q_us), ("dur_2q_us", self.dur_2q_us), ("dur_meas_us", self.dur_meas_us)] {
            if !(d > 0.0 && d.is_finite()) {
                return bad(format!("{name}={d} must be positive"));
            }
        }
        Ok(())
    }
}

/// `(1−p)ρ + p·I/2^k` as `4^k` Pauli Kraus operators on qubits `0..k`.
pub fn depolarizing(p: f64, k_qubits: usize) -> Result<KrausChannel, NoiseError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(NoiseError::BadProbability(p));
    }
    let n_terms = 1usize << (2 * k_qubits);
    let w_rest = p / n_terms as f64;
    let mut ops = Vec::with_capacity(n_terms);
    for idx in 0..n_terms {
        let mut m = CMatrix::identity(1);
        for q in 0..k_qubits {
            let digit = (idx >> (2 * (k_qubits - 1 - q))) & 3;
            m = m.kron(&pauli::by_index(digit));
        }
        let w = if idx == 0 { 1.0 - p + w_rest } else { w_rest };
        ops.push(m.scale(C64::new(w.sqrt(), 0.0)));
    }
    Ok(KrausChannel::new(ops, (0..k_qubits).collect())?)
}

/// Amplitude damping with `γ = 1 − e^{−t/T1}` followed by pure dephasing, so that
/// coherences decay as `e^{−t/T2}`. Acts on qubit 0.
pub fn thermal_relaxation(t1: f64, t2: f64, duration: f64) -> Result<KrausChannel, NoiseError> {
    if !(t1 > 0.0) || !(t2 > 0.0) || t2 > 2.0 * t1 {
        return Err(NoiseError::InvalidModel(format!("T1={t1}, T2={t2}")));
    }
    if !(duration >= 0.0) {
        return Err(NoiseError::InvalidModel(format!("duration {duration}")));
    }
    let gamma = if duration.is_infinite() { 1.0 } else { 1.0 - (-duration / t1).exp() };
    // Dephasing factor left after amplitude damping's own e^{−t/2T1}.
    let lambda = if duration.is_infinite() {
        0.0
    } else {
        (-duration / t2 + duration / (2.0 * t1)).exp().min(1.0)
    };
    let r = |rows: [[f64; 2]; 2]| CMatrix::from_real_rows(&[rows[0].to_vec(), rows[1].to_vec()]);
    let damp = KrausChannel::new(
        vec![
            r([[1.0, 0.0], [0.0, (1.0 - gamma).sqrt()]]),
            r([[0.0, gamma.sqrt()], [0.0, 0.0]]),
        ],
        vec![0],
    )?;
    let dephase = KrausChannel::new(
        vec![
            r([[1.0, 0.0], [0.0, lambda]]),
            r([[0.0, 0.0], [0.0, (1.0 - lambda * lambda).max(0.0).sqrt()]]),
        ],
        vec![0],
    )?;
    Ok(damp.then(&dephase))
}

/// Independent symmetric bit flips on every qubit of a basis-outcome distribution.
/// For one qubit this is `p₀' = (1−p_meas)p₀ + p_meas·p₁`.
pub fn measurement_flip(p_meas: f64, probabilities: &[f64]) -> Result<Vec<f64>, NoiseError> {
    if !(0.0..=1.0).contains(&p_meas) {
        return Err(NoiseError::BadProbability(p_meas));
    }
    let dim = probabilities.len();
    if !dim.is_power_of_two() {
        return Err(SimError::NotPowerOfTwo(dim).into());
    }
    let mut out = probabilities.to_vec();
    let mut bit = 1;
    while bit < dim {
        for i in 0..dim {
            if i & bit == 0 {
                let (a, b) = (out[i], out[i | bit]);
                out[i] = (1.0 - p_meas) * a + p_meas * b;
                out[i | bit] = p_meas * a + (1.0 - p_meas) * b;
            }
        }
        bit <<= 1;
    }
    Ok(out)
}

/// `ρ ← (1−p)ρ + p·tr_T(ρ)⊗I/2^k` without building Kraus operators. The map is its
/// own Heisenberg adjoint.
fn depolarize_in_place(m: &mut CMatrix, n: usize, targets: &[usize], p: f64) {
    if p == 0.0 {
        return;
    }
    let dim = m.rows();
    let mask: usize = targets.iter().map(|&q| 1usize << (n - 1 - q)).sum();
    let subsets: Vec<usize> = (0..dim).filter(|t| t & !mask == 0).collect();
    let rest: Vec<usize> = (0..dim).filter(|i| i & mask == 0).collect();
    let w = p / subsets.len() as f64;
    let mut sums = vec![C64::new(0.0, 0.0); rest.len() * rest.len()];
    for (a, &i0) in rest.iter().enumerate() {
        for (b, &j0) in rest.iter().enumerate() {
            sums[a * rest.len() + b] = subsets.iter().map(|&t| m[(i0 | t, j0 | t)]).sum();
        }
    }
    for v in m.as_mut_slice() {
        *v *= 1.0 - p;
    }
    for (a, &i0) in rest.iter().enumerate() {
        for (b, &j0) in rest.iter().enumerate() {
            let s = sums[a * rest.len() + b] * w;
            for &t in &subsets {
                m[(i0 | t, j0 | t)] += s;
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum NoisyStep {
    Gate(GateOp),
    Depolarize { targets: Vec<usize>, p: f64 },
    Channel(KrausChannel),
}

/// A circuit with its noise channels interleaved.
#[derive(Clone, Debug, PartialEq)]
pub struct NoisyCircuit {
    n_qubits: usize,
    steps: Vec<NoisyStep>,
}

fn check_qubits(n: usize) -> Result<(), NoiseError> {
    if n > MAX_DENSITY_QUBITS {
        return Err(NoiseError::TooManyQubits(n));
    }
    Ok(())
}

impl NoisyCircuit {
    pub fn compile(gates: &[GateOp], model: &NoiseModel, n_qubits: usize) -> Result<Self, NoiseError> {
        check_qubits(n_qubits)?;
        model.validate()?;
        let relax_1q = thermal_relaxation(model.t1_us, model.t2_us, model.dur_1q_us)?;
        let relax_2q = thermal_relaxation(model.t1_us, model.t2_us, model.dur_2q_us)?;
        let trivial = |c: &KrausChannel| c.completeness_error() < 1e-15 && c.operators()[0].max_abs_diff(&CMatrix::identity(2)) == 0.0;
        let (skip_1q, skip_2q) = (trivial(&relax_1q), trivial(&relax_2q));
        let mut steps = Vec::with_capacity(3 * gates.len());
        for g in gates {
            check_gate(g, n_qubits)?;
            steps.push(NoisyStep::Gate(g.clone()));
            let (p, relax, skip) = match g.arity() {
                1 => (model.p1q, &relax_1q, skip_1q),
                2 => (model.p2q, &relax_2q, skip_2q),
                k => return Err(NoiseError::UnsupportedArity(k)),
            };
            if p > 0.0 {
                steps.push(NoisyStep::Depolarize {
                    targets: g.targets.clone(),
                    p,
                });
            }
            if !skip {
                for &q in &g.targets {
                    steps.push(NoisyStep::Channel(relax.retarget(vec![q])));
                }
            }
        }
        Ok(Self { n_qubits, steps })
    }

    /// Appends relaxation during measurement of `qubits`.
    pub fn with_readout_relaxation(mut self, model: &NoiseModel, qubits: &[usize]) -> Result<Self, NoiseError> {
        let relax = thermal_relaxation(model.t1_us, model.t2_us, model.dur_meas_us)?;
        for &q in qubits {
            if q >= self.n_qubits {
                return Err(SimError::TargetOutOfRange {
                    target: q,
                    n_qubits: self.n_qubits,
                }
                .into());
            }
            self.steps.push(NoisyStep::Channel(relax.retarget(vec![q])));
        }
        Ok(self)
    }

    pub fn steps(&self) -> &[NoisyStep] {
        &self.steps
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    fn apply_step(&self, rho: &mut DensityMatrix, step: &NoisyStep) {
        match step {
            NoisyStep::Gate(g) => rho.apply_matrix(&g.targets, &g.matrix()),
            NoisyStep::Depolarize { targets, p } => depolarize_in_place(rho.entries_mut(), self.n_qubits, targets, *p),
            NoisyStep::Channel(c) => {
                let mut acc = CMatrix::zeros(rho.dim(), rho.dim());
                for k in c.operators() {
                    let mut t = rho.clone();
                    t.apply_matrix(c.targets(), k);
                    acc = acc.add(t.entries());
                }
                *rho.entries_mut() = acc;
            }
        }
    }

    pub fn run(&self, rho: &DensityMatrix) -> Result<DensityMatrix, NoiseError> {
        if rho.n_qubits() != self.n_qubits {
            return Err(SimError::DimensionMismatch {
                expected: self.n_qubits,
                found: rho.n_qubits(),
            }
            .into());
        }
        let mut out = rho.clone();
        for s in &self.steps {
            self.apply_step(&mut out, s);
        }
        Ok(out)
    }

    /// `tr(diag(observable)·ρ_out)` and its gradient with respect to the parameters the
    /// gate bindings index into.
    ///
    /// The state before every bound gate is kept; the observable is pulled back through
    /// the adjoint channels, and each gate contributes `2 Re tr(X dG ρ G†)`.
    pub fn expectation_with_grad(
        &self,
        rho: &DensityMatrix,
        observable: &[f64],
        n_params: usize,
    ) -> Result<(f64, Vec<f64>), NoiseError> {
        if observable.len() != rho.dim() || rho.n_qubits() != self.n_qubits {
            return Err(SimError::DimensionMismatch {
                expected: rho.dim(),
                found: observable.len(),
            }
            .into());
        }
        let mut saved: Vec<Option<DensityMatrix>> = Vec::with_capacity(self.steps.len());
        let mut cur = rho.clone();
        for s in &self.steps {
            let keep = matches!(s, NoisyStep::Gate(g) if g.binding.is_some() && g.is_parametric());
            if keep {
                if let NoisyStep::Gate(g) = s {
                    let b = g.binding.expect("bound");
                    if b.index >= n_params {
                        return Err(SimError::BindingOutOfRange {
                            index: b.index,
                            n_params,
                        }
                        .into());
                    }
                }
            }
            saved.push(keep.then(|| cur.clone()));
            self.apply_step(&mut cur, s);
        }
        let value: f64 = (0..cur.dim()).map(|i| observable[i] * cur.entries()[(i, i)].re).sum();
        let dim = rho.dim();
        let mut x = DensityMatrix::from_matrix_unchecked(CMatrix::diagonal(
            &observable.iter().map(|&o| C64::new(o, 0.0)).collect::<Vec<_>>(),
        ));
        let mut grad = vec![0.0; n_params];
        for (s, before) in self.steps.iter().zip(saved).rev() {
            match s {
                NoisyStep::Gate(g) => {
                    let u = g.matrix();
                    if let (Some(prev), Some(Binding { index, scale })) = (before, g.binding) {
                        let mut m = prev;
                        m.apply_left_right(&g.targets, &g.angle_derivative(), &u);
                        let (xs, ms) = (x.entries(), m.entries());
                        let mut tr = C64::new(0.0, 0.0);
                        for i in 0..dim {
                            for j in 0..dim {
                                tr += xs[(i, j)] * ms[(j, i)];
                            }
                        }
                        grad[index] += 2.0 * scale * tr.re;
                    }
                    x.apply_matrix(&g.targets, &u.adjoint());
                }
                NoisyStep::Depolarize { targets, p } => depolarize_in_place(x.entries_mut(), self.n_qubits, targets, *p),
                NoisyStep::Channel(c) => {
                    let pulled = c.apply_adjoint_to(x.entries(), self.n_qubits);
                    *x.entries_mut() = pulled;
                }
            }
        }
        Ok((value, grad))
    }
}

/// Noisy evolution of `|0…0⟩` under `gates`.
pub fn noisy_execute(gates: &[GateOp], model: &NoiseModel, n_qubits: usize) -> Result<DensityMatrix, NoiseError> {
    check_qubits(n_qubits)?;
    NoisyCircuit::compile(gates, model, n_qubits)?.run(&DensityMatrix::zero(n_qubits))
}

/// Readout distribution of `rho` after measurement relaxation and bit flips on all qubits.
pub fn noisy_probabilities(rho: &DensityMatrix, model: &NoiseModel) -> Result<Vec<f64>, NoiseError> {
    let n = rho.n_qubits();
    let all: Vec<usize> = (0..n).collect();
    let relaxed = NoisyCircuit {
        n_qubits: n,
        steps: vec![],
    }
    .with_readout_relaxation(model, &all)?
    .run(rho)?;
    measurement_flip(model.p_meas, &relaxed.probabilities())
}

/// Weight of each basis state in `P(record 0 on every qubit in `qubits`)` under flips.
fn zero_record_observable(n: usize, qubits: &[usize], p_meas: f64) -> Vec<f64> {
    (0..1usize << n)
        .map(|k| {
            qubits
                .iter()
                .map(|&q| if (k >> (n - 1 - q)) & 1 == 0 { 1.0 - p_meas } else { p_meas })
                .product()
        })
        .collect()
}

/// Embedding circuit shifted so that its bindings index into `offset..offset+P`.
fn shifted(gates: Vec<GateOp>, offset: usize) -> Vec<GateOp> {
    gates
        .into_iter()
        .map(|mut g| {
            if let Some(b) = g.binding.as_mut() {
                b.index += offset;
            }
            g
        })
        .collect()
}

/// Noisy estimate of `|⟨ψ(x₁)|ψ(x₂)⟩|²`: run `U(x₂)` then `U†(x₁)` from `|0…0⟩` and
/// read the all-zeros outcome.
pub fn noisy_fidelity_with_grad(
    spec: &EmbeddingSpec,
    model: &NoiseModel,
    f1: &[f64],
    f2: &[f64],
) -> Result<Similarity, NoiseError> {
    if f1.len() != f2.len() {
        return Err(NoiseError::LengthMismatch(f1.len(), f2.len()));
    }
    let n = spec.n_qubits;
    let p = f1.len();
    let mut gates = shifted(spec.build(f2)?, p);
    gates.extend(spec.build(f1)?.iter().rev().map(GateOp::dagger));
    let all: Vec<usize> = (0..n).collect();
    let circuit = NoisyCircuit::compile(&gates, model, n)?.with_readout_relaxation(model, &all)?;
    let obs = zero_record_observable(n, &all, model.p_meas);
    let (value, grad) = circuit.expectation_with_grad(&DensityMatrix::zero(n), &obs, 2 * p)?;
    Ok(Similarity {
        value,
        grad1: grad[..p].to_vec(),
        grad2: grad[p..].to_vec(),
    })
}

pub fn noisy_fidelity(spec: &EmbeddingSpec, model: &NoiseModel, f1: &[f64], f2: &[f64]) -> Result<f64, NoiseError> {
    Ok(noisy_fidelity_with_grad(spec, model, f1, f2)?.value)
}

/// Embedded state prepared on noisy hardware.
pub fn noisy_embed(spec: &EmbeddingSpec, model: &NoiseModel, features: &[f64]) -> Result<DensityMatrix, NoiseError> {
    noisy_execute(&spec.build(features)?, model, spec.n_qubits)
}

/// Probability of recording 0 on the readout qubit after the classifier runs noisily, and
/// its gradient with respect to `theta`.
pub fn noisy_qcnn_predict_with_grad(
    spec: &QcnnSpec,
    theta: &[f64],
    embedded: &DensityMatrix,
    model: &NoiseModel,
) -> Result<(f64, Vec<f64>), NoiseError> {
    let n = spec.n_qubits;
    if embedded.n_qubits() != n {
        return Err(AnsatzError::QubitMismatch {
            expected: n,
            found: embedded.n_qubits(),
        }
        .into());
    }
    let gates = build_qcnn(spec, theta)?;
    let circuit = NoisyCircuit::compile(&gates, model, n)?.with_readout_relaxation(model, &[spec.readout_qubit])?;
    let obs = zero_record_observable(n, &[spec.readout_qubit], model.p_meas);
    circuit.expectation_with_grad(embedded, &obs, theta.len())
}

pub fn noisy_qcnn_predict(spec: &QcnnSpec, theta: &[f64], embedded: &DensityMatrix, model: &NoiseModel) -> Result<f64, NoiseError> {
    Ok(noisy_qcnn_predict_with_grad(spec, theta, embedded, model)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ansatz::qcnn_predict;
    use crate::embeddings::FeatureMapKind;
    use crate::losses::{similarity_with_grad, SimilarityKind};
    use crate::metrics::trace_distance_states;
    use crate::nn::relative_error;
    use crate::qsim::{apply_channel, run_circuit, to_density, StateVector};
    use proptest::prelude::*;

    fn plus_density() -> DensityMatrix {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        to_density(&StateVector::from_amplitudes(vec![C64::new(r, 0.0), C64::new(r, 0.0)]).unwrap())
    }

    #[test]
    fn preset_round_trip() {
        let m = NoiseModel::fake_vigo();
        assert_eq!((m.t1_us, m.t2_us, m.p1q, m.p2q, m.p_meas), (108.0, 70.0, 5.1e-4, 8.8e-3, 3.34e-2));
        let json = serde_json::to_string(&m).unwrap();
        assert_eq!(NoiseModel::from_json(&json).unwrap(), m);
        let mut bad = m;
        bad.t2_us = 300.0;
        assert!(bad.validate().is_err());
        assert!(NoiseModel::from_json(r#"{"t1_us": 1}"#).is_err());
    }

    #[test]
    fn depolarizing_examples() {
        assert!(depolarizing(1.5, 1).is_err());
        for k in 1..=2 {
            assert!(depolarizing(0.3, k).unwrap().completeness_error() < 1e-12);
        }
        let id = apply_channel(&plus_density(), &depolarizing(0.0, 1).unwrap()).unwrap();
        assert!(id.entries().max_abs_diff(plus_density().entries()) < 1e-15);
        let full = apply_channel(&DensityMatrix::zero(1), &depolarizing(1.0, 1).unwrap()).unwrap();
        assert!(full.entries().max_abs_diff(DensityMatrix::maximally_mixed(1).entries()) < 1e-15);
        let half = apply_channel(&plus_density(), &depolarizing(0.5, 1).unwrap()).unwrap();
        assert!((half.entries()[(0, 1)].re - 0.25).abs() < 1e-15);
        assert!((half.entries()[(0, 0)].re - 0.5).abs() < 1e-15);
    }

    #[test]
    fn relaxation_examples() {
        let id = thermal_relaxation(108.0, 70.0, 0.0).unwrap();
        assert!(id.completeness_error() < 1e-12);
        let rho = apply_channel(&plus_density(), &id).unwrap();
        assert!(rho.entries().max_abs_diff(plus_density().entries()) < 1e-15);

        let excited = to_density(&StateVector::basis(1, 1));
        let long = thermal_relaxation(108.0, 70.0, 1e6).unwrap();
        let g = apply_channel(&excited, &long).unwrap();
        assert!(g.entries().max_abs_diff(DensityMatrix::zero(1).entries()) < 1e-12);

        let short = thermal_relaxation(108.0, 70.0, 0.035).unwrap();
        assert!(short.completeness_error() < 1e-12);
        let e = apply_channel(&excited, &short).unwrap();
        assert!((e.entries()[(1, 1)].re - (-0.035f64 / 108.0).exp()).abs() < 1e-14);
        let c = apply_channel(&plus_density(), &short).unwrap();
        assert!((c.entries()[(0, 1)].re - 0.5 * (-0.035f64 / 70.0).exp()).abs() < 1e-14);
        assert!(thermal_relaxation(10.0, 30.0, 1.0).is_err());
    }

    #[test]
    fn flip_examples() {
        assert_eq!(measurement_flip(0.0, &[0.3, 0.7]).unwrap(), vec![0.3, 0.7]);
        assert_eq!(measurement_flip(0.5, &[0.9, 0.1]).unwrap(), vec![0.5, 0.5]);
        let f = measurement_flip(0.0334, &[1.0, 0.0]).unwrap();
        assert!((f[0] - 0.9666).abs() < 1e-15);
        let two = measurement_flip(0.1, &[1.0, 0.0, 0.0, 0.0]).unwrap();
        assert!((two[0] - 0.81).abs() < 1e-15 && (two[3] - 0.01).abs() < 1e-15);
    }

    #[test]
    fn fast_depolarizing_matches_kraus() {
        let gates = [GateOp::h(0), GateOp::cx(0, 1), GateOp::ry(2, 0.7), GateOp::cx(2, 1), GateOp::rz(1, 0.3)];
        let rho = to_density(&run_circuit(&gates, 3).unwrap());
        for targets in [vec![1], vec![0, 2], vec![2, 1]] {
            let mut fast = rho.entries().clone();
            depolarize_in_place(&mut fast, 3, &targets, 0.37);
            let kraus = depolarizing(0.37, targets.len()).unwrap().retarget(targets.clone());
            let slow = apply_channel(&rho, &kraus).unwrap();
            assert!(fast.max_abs_diff(slow.entries()) < 1e-14, "{targets:?}");
        }
    }

    #[test]
    fn zero_noise_matches_pure_simulation() {
        let spec = EmbeddingSpec::new(FeatureMapKind::ZzStack, 4).unwrap();
        let f: Vec<f64> = (0..spec.param_count()).map(|i| (i as f64 * 0.7).sin()).collect();
        let gates = spec.build(&f).unwrap();
        let rho = noisy_execute(&gates, &NoiseModel::noiseless(), 4).unwrap();
        let pure = to_density(&run_circuit(&gates, 4).unwrap());
        assert!(rho.entries().max_abs_diff(pure.entries()) < 1e-10);
        assert!(noisy_execute(&[], &NoiseModel::noiseless(), 9).is_err());
    }

    #[test]
    fn noise_reduces_purity_and_distance() {
        let m = NoiseModel::fake_vigo();
        let gates = [GateOp::h(0), GateOp::cx(0, 1), GateOp::rx(1, 0.4)];
        let rho = noisy_execute(&gates, &m, 2).unwrap();
        assert!(rho.purity() < 1.0 && rho.purity() > 0.9);
        // Orthogonal inputs through a depolarizing-only circuit.
        let dep = NoiseModel { p1q: 0.05, ..NoiseModel::noiseless() };
        let c = NoisyCircuit::compile(&[GateOp::rx(0, 0.0)], &dep, 1).unwrap();
        let a = c.run(&DensityMatrix::zero(1)).unwrap();
        let b = c.run(&to_density(&StateVector::basis(1, 1))).unwrap();
        assert!(trace_distance_states(&a, &b).unwrap() < 1.0 - 1e-3);
    }

    #[test]
    fn noiseless_fidelity_and_prediction_match_pure() {
        let spec = EmbeddingSpec::new(FeatureMapKind::NcStack, 4).unwrap();
        let f1: Vec<f64> = (0..spec.param_count()).map(|i| (i as f64 * 0.3).cos()).collect();
        let f2: Vec<f64> = (0..spec.param_count()).map(|i| (i as f64 * 0.5 + 1.0).sin()).collect();
        let ideal = NoiseModel::noiseless();
        let noisy = noisy_fidelity_with_grad(&spec, &ideal, &f1, &f2).unwrap();
        let pure = similarity_with_grad(SimilarityKind::Fidelity, &spec, &f1, &f2).unwrap();
        assert!((noisy.value - pure.value).abs() < 1e-10);
        for (a, b) in noisy.grad1.iter().chain(&noisy.grad2).zip(pure.grad1.iter().chain(&pure.grad2)) {
            assert!((a - b).abs() < 1e-9);
        }
        let q = QcnnSpec::default();
        let theta: Vec<f64> = (0..15).map(|i| 0.2 * i as f64 - 1.0).collect();
        let psi = spec.embed_state(&f1).unwrap();
        let p = noisy_qcnn_predict(&q, &theta, &to_density(&psi), &ideal).unwrap();
        assert!((p - qcnn_predict(&q, &theta, &psi).unwrap()).abs() < 1e-10);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn noisy_fidelity_gradient_matches_finite_difference(v in proptest::collection::vec(-2.0f64..2.0, 16)) {
            let spec = EmbeddingSpec::new(FeatureMapKind::NcxUnit, 4).unwrap();
            let p = spec.param_count();
            let (f1, f2) = (v[..p].to_vec(), v[p..2 * p].to_vec());
            let m = NoiseModel::fake_vigo();
            let s = noisy_fidelity_with_grad(&spec, &m, &f1, &f2).unwrap();
            prop_assert!((0.0..=1.0).contains(&s.value));
            let h = 1e-5;
            for i in 0..p {
                let (mut a, mut b) = (f1.clone(), f1.clone());
                a[i] += h;
                b[i] -= h;
                let fd = (noisy_fidelity(&spec, &m, &a, &f2).unwrap() - noisy_fidelity(&spec, &m, &b, &f2).unwrap()) / (2.0 * h);
                prop_assert!(relative_error(s.grad1[i], fd, 1e-6) < 1e-4);
                let (mut a, mut b) = (f2.clone(), f2.clone());
                a[i] += h;
                b[i] -= h;
                let fd = (noisy_fidelity(&spec, &m, &f1, &a).unwrap() - noisy_fidelity(&spec, &m, &f1, &b).unwrap()) / (2.0 * h);
                prop_assert!(relative_error(s.grad2[i], fd, 1e-6) < 1e-4);
            }
        }

        #[test]
        fn noisy_qcnn_gradient_matches_finite_difference(theta in proptest::collection::vec(-3.0f64..3.0, 15), f in proptest::collection::vec(-2.0f64..2.0, 8)) {
            let spec = EmbeddingSpec::new(FeatureMapKind::NcxUnit, 4).unwrap();
            let m = NoiseModel::fake_vigo();
            let rho = noisy_embed(&spec, &m, &f).unwrap();
            let q = QcnnSpec::default();
            let (p, g) = noisy_qcnn_predict_with_grad(&q, &theta, &rho, &m).unwrap();
            prop_assert!((0.0..=1.0).contains(&p));
            let h = 1e-5;
            for i in 0..15 {
                let (mut a, mut b) = (theta.clone(), theta.clone());
                a[i] += h;
                b[i] -= h;
                let fd = (noisy_qcnn_predict(&q, &a, &rho, &m).unwrap() - noisy_qcnn_predict(&q, &b, &rho, &m).unwrap()) / (2.0 * h);
                prop_assert!(relative_error(g[i], fd, 1e-6) < 1e-4);
            }
        }

        #[test]
        fn compiled_channels_contract(f1 in proptest::collection::vec(-2.0f64..2.0, 8), f2 in proptest::collection::vec(-2.0f64..2.0, 8)) {
            let spec = EmbeddingSpec::new(FeatureMapKind::NcxUnit, 4).unwrap();
            let m = NoiseModel::fake_vigo();
            let (a, b) = (to_density(&spec.embed_state(&f1).unwrap()), to_density(&spec.embed_state(&f2).unwrap()));
            let q = QcnnSpec::default();
            let c = NoisyCircuit::compile(&build_qcnn(&q, &[0.3; 15]).unwrap(), &m, 4).unwrap();
            let before = trace_distance_states(&a, &b).unwrap();
            let after = trace_distance_states(&c.run(&a).unwrap(), &c.run(&b).unwrap()).unwrap();
            prop_assert!(after <= before + 1e-12);
        }
    }
}
