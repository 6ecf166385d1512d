//! QCNN classifier circuit and readout.
//!
//! The default four-qubit layout, in application order:
//!
//! | layer       | qubits                         | params |
//! |-------------|--------------------------------|--------|
//! | conv 1      | (0,1) (2,3) (1,2) (3,0), shared | 2      |
//! | pool 1      | 0→1, 2→3, shared                | 2      |
//! | RY layer    | 0, 1, 2, 3                      | 4      |
//! | conv 2      | (1,3)                           | 2      |
//! | pool 2      | 1→3                             | 2      |
//! | readout     | RZ RY RZ on 3                   | 3      |
//!
//! A conv unit is `RY(a)⊗RY(b)` then `CX`; a pool unit is `CRZ(a)` from the discarded
//! control to the kept target, `X` on the control, `CRX(b)`, `X` on the control.
//! Parameters are numbered in this order.

use serde::{Deserialize, Serialize};

use crate::qsim::{
    accumulate_adjoint_gradient, apply_local, check_gate, pauli, DensityMatrix, GateKind, GateOp, SimError,
    StateVector,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AnsatzError {
    #[error("QCNN expects {expected} parameters, got {found}")]
    WrongParameterCount { expected: usize, found: usize },
    #[error("state has {found} qubits, QCNN acts on {expected}")]
    QubitMismatch { expected: usize, found: usize },
    #[error("invalid QCNN layout: {0}")]
    Layout(String),
    #[error(transparent)]
    Sim(#[from] SimError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RotationGate {
    Rx,
    Ry,
    Rz,
}

impl RotationGate {
    fn kind(self) -> GateKind {
        match self {
            Self::Rx => GateKind::Rx,
            Self::Ry => GateKind::Ry,
            Self::Rz => GateKind::Rz,
        }
    }
}

/// One layer of the classifier.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum QcnnLayer {
    /// Two-parameter conv unit on each pair.
    Conv { pairs: Vec<[usize; 2]>, shared: bool },
    /// Two-parameter pool unit on each `[control, target]`; the control is discarded.
    Pool { pairs: Vec<[usize; 2]>, shared: bool },
    /// One rotation per listed qubit.
    Rotations { gate: RotationGate, qubits: Vec<usize> },
    /// `RZ RY RZ` on one qubit.
    Readout { qubit: usize },
}

impl QcnnLayer {
    pub fn param_count(&self) -> usize {
        match self {
            Self::Conv { pairs, shared } | Self::Pool { pairs, shared } => {
                if *shared {
                    2
                } else {
                    2 * pairs.len()
                }
            }
            Self::Rotations { qubits, .. } => qubits.len(),
            Self::Readout { .. } => 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QcnnSpec {
    pub n_qubits: usize,
    pub readout_qubit: usize,
    pub layers: Vec<QcnnLayer>,
}

impl Default for QcnnSpec {
    fn default() -> Self {
        Self {
            n_qubits: 4,
            readout_qubit: 3,
            layers: vec![
                QcnnLayer::Conv {
                    pairs: vec![[0, 1], [2, 3], [1, 2], [3, 0]],
                    shared: true,
                },
                QcnnLayer::Pool {
                    pairs: vec![[0, 1], [2, 3]],
                    shared: true,
                },
                QcnnLayer::Rotations {
                    gate: RotationGate::Ry,
                    qubits: vec![0, 1, 2, 3],
                },
                QcnnLayer::Conv {
                    pairs: vec![[1, 3]],
                    shared: false,
                },
                QcnnLayer::Pool {
                    pairs: vec![[1, 3]],
                    shared: false,
                },
                QcnnLayer::Readout { qubit: 3 },
            ],
        }
    }
}

impl QcnnSpec {
    pub fn total_params(&self) -> usize {
        self.layers.iter().map(QcnnLayer::param_count).sum()
    }

    /// Checks qubit indices and pair distinctness.
    pub fn validate(&self) -> Result<(), AnsatzError> {
        let n = self.n_qubits;
        let bad = |msg: String| Err(AnsatzError::Layout(msg));
        if n == 0 || self.readout_qubit >= n {
            return bad(format!("readout qubit {} on {n} qubits", self.readout_qubit));
        }
        for layer in &self.layers {
            match layer {
                QcnnLayer::Conv { pairs, .. } | QcnnLayer::Pool { pairs, .. } => {
                    if pairs.is_empty() {
                        return bad("empty pair list".into());
                    }
                    for &[a, b] in pairs {
                        if a >= n || b >= n || a == b {
                            return bad(format!("pair ({a}, {b}) on {n} qubits"));
                        }
                    }
                }
                QcnnLayer::Rotations { qubits, .. } => {
                    if let Some(q) = qubits.iter().find(|&&q| q >= n) {
                        return bad(format!("qubit {q} on {n} qubits"));
                    }
                }
                QcnnLayer::Readout { qubit } => {
                    if *qubit >= n {
                        return bad(format!("readout on qubit {qubit} of {n}"));
                    }
                }
            }
        }
        Ok(())
    }
}

fn push_conv(out: &mut Vec<GateOp>, theta: &[f64], off: usize, [a, b]: [usize; 2]) {
    out.push(GateOp::bound(GateKind::Ry, vec![a], theta, off, 1.0));
    out.push(GateOp::bound(GateKind::Ry, vec![b], theta, off + 1, 1.0));
    out.push(GateOp::cx(a, b));
}

fn push_pool(out: &mut Vec<GateOp>, theta: &[f64], off: usize, [c, t]: [usize; 2]) {
    out.push(GateOp::bound(GateKind::Crz, vec![c, t], theta, off, 1.0));
    out.push(GateOp::x(c));
    out.push(GateOp::bound(GateKind::Crx, vec![c, t], theta, off + 1, 1.0));
    out.push(GateOp::x(c));
}

/// Gate list with every parametric gate bound to `theta`.
pub fn build_qcnn(spec: &QcnnSpec, theta: &[f64]) -> Result<Vec<GateOp>, AnsatzError> {
    spec.validate()?;
    if theta.len() != spec.total_params() {
        return Err(AnsatzError::WrongParameterCount {
            expected: spec.total_params(),
            found: theta.len(),
        });
    }
    let mut out = Vec::new();
    let mut off = 0;
    for layer in &spec.layers {
        match layer {
            QcnnLayer::Conv { pairs, shared } | QcnnLayer::Pool { pairs, shared } => {
                let is_conv = matches!(layer, QcnnLayer::Conv { .. });
                for (k, &pair) in pairs.iter().enumerate() {
                    let o = if *shared { off } else { off + 2 * k };
                    if is_conv {
                        push_conv(&mut out, theta, o, pair);
                    } else {
                        push_pool(&mut out, theta, o, pair);
                    }
                }
            }
            QcnnLayer::Rotations { gate, qubits } => {
                for (k, &q) in qubits.iter().enumerate() {
                    out.push(GateOp::bound(gate.kind(), vec![q], theta, off + k, 1.0));
                }
            }
            QcnnLayer::Readout { qubit } => {
                out.push(GateOp::bound(GateKind::Rz, vec![*qubit], theta, off, 1.0));
                out.push(GateOp::bound(GateKind::Ry, vec![*qubit], theta, off + 1, 1.0));
                out.push(GateOp::bound(GateKind::Rz, vec![*qubit], theta, off + 2, 1.0));
            }
        }
        off += layer.param_count();
    }
    Ok(out)
}

fn check_state(spec: &QcnnSpec, n: usize) -> Result<(), AnsatzError> {
    if n != spec.n_qubits {
        return Err(AnsatzError::QubitMismatch {
            expected: spec.n_qubits,
            found: n,
        });
    }
    Ok(())
}

/// `p = (1 + ⟨Z_readout⟩)/2` after the classifier acts on a pure embedded state.
pub fn qcnn_predict(spec: &QcnnSpec, theta: &[f64], embedded: &StateVector) -> Result<f64, AnsatzError> {
    check_state(spec, embedded.n_qubits())?;
    let gates = build_qcnn(spec, theta)?;
    let mut s = embedded.clone();
    for g in &gates {
        s.apply(g)?;
    }
    Ok(0.5 * (1.0 + s.z_expectation(spec.readout_qubit)))
}

/// Mixed-state version of [`qcnn_predict`].
pub fn qcnn_predict_density(spec: &QcnnSpec, theta: &[f64], embedded: &DensityMatrix) -> Result<f64, AnsatzError> {
    check_state(spec, embedded.n_qubits())?;
    let gates = build_qcnn(spec, theta)?;
    let mut rho = embedded.clone();
    for g in &gates {
        rho.apply(g)?;
    }
    Ok(0.5 * (1.0 + rho.z_expectation(spec.readout_qubit)))
}

/// Prediction and `∂p/∂θ`.
pub fn qcnn_predict_with_grad(
    spec: &QcnnSpec,
    theta: &[f64],
    embedded: &StateVector,
) -> Result<(f64, Vec<f64>), AnsatzError> {
    check_state(spec, embedded.n_qubits())?;
    let gates = build_qcnn(spec, theta)?;
    let n = spec.n_qubits;
    let mut s = embedded.clone();
    for g in &gates {
        check_gate(g, n)?;
        apply_local(s.amplitudes_mut(), n, &g.targets, &g.matrix());
    }
    let p = 0.5 * (1.0 + s.z_expectation(spec.readout_qubit));
    // p = ½ + ½⟨φ|Z|φ⟩ ⇒ cotangent Zφ.
    let mut cot = s.amplitudes().to_vec();
    apply_local(&mut cot, n, &[spec.readout_qubit], &pauli::z());
    let mut grad = vec![0.0; theta.len()];
    accumulate_adjoint_gradient(&gates, &s, &cot, &mut grad)?;
    Ok((p, grad))
}

/// Class 1 iff `p ≥ ½`.
pub fn predict_label(p: f64) -> u8 {
    u8::from(p >= 0.5)
}
