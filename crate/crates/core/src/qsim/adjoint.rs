//! Reverse-mode differentiation of circuits through gate bindings.
//!
//! For a scalar `L` depending on the final state, with `dL = Re Σ conj(ψ̄_i) dψ_i`,
//! the gradient with respect to bound parameter `p` is accumulated from
//! `Re ⟨λ_k| dG_k |ψ_{k-1}⟩` where `λ_k` is the cotangent pulled back to after gate `k`.

use super::gates::GateOp;
use super::state::{apply_local, check_gate, StateVector};
use super::SimError;
use crate::C64;

/// Gradient of `L` with respect to the parameter vector the gate bindings index into.
///
/// `final_state` must be the result of running `gates` (the forward pass is undone in
/// place, so no intermediate states are stored). `cotangent` is `ψ̄ = ∂L/∂conj(ψ)`-style
/// adjoint under the convention above.
pub fn adjoint_gradient(
    gates: &[GateOp],
    final_state: &StateVector,
    cotangent: &[C64],
    n_params: usize,
) -> Result<Vec<f64>, SimError> {
    let mut grad = vec![0.0; n_params];
    accumulate_adjoint_gradient(gates, final_state, cotangent, &mut grad)?;
    Ok(grad)
}

/// Same as [`adjoint_gradient`] but adds into `grad`.
pub fn accumulate_adjoint_gradient(
    gates: &[GateOp],
    final_state: &StateVector,
    cotangent: &[C64],
    grad: &mut [f64],
) -> Result<(), SimError> {
    let n = final_state.n_qubits();
    if cotangent.len() != final_state.dim() {
        return Err(SimError::DimensionMismatch {
            expected: final_state.dim(),
            found: cotangent.len(),
        });
    }
    for g in gates {
        check_gate(g, n)?;
        if let Some(b) = g.binding {
            if b.index >= grad.len() {
                return Err(SimError::BindingOutOfRange {
                    index: b.index,
                    n_params: grad.len(),
                });
            }
        }
    }
    let mut chi = final_state.amplitudes().to_vec();
    let mut lambda = cotangent.to_vec();
    let mut tmp = vec![C64::new(0.0, 0.0); chi.len()];
    for g in gates.iter().rev() {
        let gd = g.matrix().adjoint();
        apply_local(&mut chi, n, &g.targets, &gd);
        if let Some(b) = g.binding {
            if g.is_parametric() {
                tmp.copy_from_slice(&chi);
                apply_local(&mut tmp, n, &g.targets, &g.angle_derivative());
                let ip: C64 = lambda.iter().zip(&tmp).map(|(l, t)| l.conj() * t).sum();
                grad[b.index] += b.scale * ip.re;
            }
        }
        apply_local(&mut lambda, n, &g.targets, &gd);
    }
    Ok(())
}
