//! Dense quantum simulation.
//!
//! Qubit 0 is the most significant bit of a basis index, so `|q0 q1 … q_{n-1}⟩` maps
//! to index `Σ q_i 2^{n-1-i}`.

mod adjoint;
mod eigen;
pub mod gates;
mod matrix;
mod state;

pub use adjoint::{accumulate_adjoint_gradient, adjoint_gradient};
pub use eigen::{hermitian_eigen, hermitian_eigenvalues, trace_norm_hermitian, Eigen};
pub use gates::{Binding, GateKind, GateOp};
pub use matrix::CMatrix;
pub use state::{
    apply_channel, apply_gate, circuit_unitary, expectation, run_circuit, run_circuit_from, to_density,
    DensityMatrix, KrausChannel, QuantumState, StateVector,
};
pub(crate) use state::{apply_local, check_gate};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("qubit index {target} out of range for {n_qubits} qubits")]
    TargetOutOfRange { target: usize, n_qubits: usize },
    #[error("qubit {0} targeted twice")]
    DuplicateTarget(usize),
    #[error("gate {gate} expects {expected} targets, got {found}")]
    ArityMismatch {
        gate: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("matrix is not unitary (max deviation {0:e})")]
    NonUnitary(f64),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("length {0} is not a power of two")]
    NotPowerOfTwo(usize),
    #[error("state norm² is {0}, expected 1")]
    NotNormalized(f64),
    #[error("matrix is not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),
    #[error("trace is {0}, expected 1")]
    BadTrace(f64),
    #[error("minimum eigenvalue {0:e} is negative")]
    NotPositive(f64),
    #[error("channel has no Kraus operators")]
    EmptyChannel,
    #[error("channel violates completeness by {0:e}")]
    NotTracePreserving(f64),
    #[error("Jacobi iteration did not converge in {0} sweeps")]
    NoConvergence(usize),
    #[error("binding index {index} out of range for {n_params} parameters")]
    BindingOutOfRange { index: usize, n_params: usize },
}

/// Pauli matrices for observables and channel construction.
pub mod pauli {
    use super::CMatrix;
    use crate::C64;

    pub fn i() -> CMatrix {
        CMatrix::identity(2)
    }

    pub fn x() -> CMatrix {
        CMatrix::from_real_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]])
    }

    pub fn y() -> CMatrix {
        let z = C64::new(0.0, 0.0);
        CMatrix::from_rows(&[vec![z, C64::new(0.0, -1.0)], vec![C64::new(0.0, 1.0), z]])
    }

    pub fn z() -> CMatrix {
        CMatrix::from_real_rows(&[vec![1.0, 0.0], vec![0.0, -1.0]])
    }

    /// Indexed 0..4 as I, X, Y, Z.
    pub fn by_index(k: usize) -> CMatrix {
        match k {
            0 => i(),
            1 => x(),
            2 => y(),
            _ => z(),
        }
    }

    /// `Z` on `qubit`, identity elsewhere.
    pub fn z_on(qubit: usize, n_qubits: usize) -> CMatrix {
        let dim = 1usize << n_qubits;
        let bit = n_qubits - 1 - qubit;
        CMatrix::diagonal(
            &(0..dim)
                .map(|k| C64::new(if (k >> bit) & 1 == 0 { 1.0 } else { -1.0 }, 0.0))
                .collect::<Vec<_>>(),
        )
    }
}
