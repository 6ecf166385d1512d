use std::f64::consts::FRAC_1_SQRT_2;

use super::matrix::CMatrix;
use crate::C64;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);
const I: C64 = C64::new(0.0, 1.0);

/// Gate family. Parametric kinds read their angle from [`GateOp::angle`].
///
/// Rotations follow `R_P(φ) = exp(-i φ P / 2)`. Two-qubit controlled kinds take
/// targets `[control, target]`.
#[derive(Clone, Debug, PartialEq)]
pub enum GateKind {
    H,
    X,
    Y,
    Z,
    S,
    Sdg,
    Cx,
    Cy,
    Cz,
    Swap,
    Rx,
    Ry,
    Rz,
    Rxx,
    Ryy,
    Rzz,
    Crx,
    Cry,
    Crz,
    /// `R_{XX+YY}(φ, β)` in the Qiskit convention.
    XxPlusYy { beta: f64 },
    /// Fixed user-supplied unitary; checked at construction.
    Unitary(CMatrix),
}

impl GateKind {
    pub fn is_parametric(&self) -> bool {
        matches!(
            self,
            GateKind::Rx
                | GateKind::Ry
                | GateKind::Rz
                | GateKind::Rxx
                | GateKind::Ryy
                | GateKind::Rzz
                | GateKind::Crx
                | GateKind::Cry
                | GateKind::Crz
                | GateKind::XxPlusYy { .. }
        )
    }

    pub fn arity(&self) -> usize {
        match self {
            GateKind::H
            | GateKind::X
            | GateKind::Y
            | GateKind::Z
            | GateKind::S
            | GateKind::Sdg
            | GateKind::Rx
            | GateKind::Ry
            | GateKind::Rz => 1,
            GateKind::Unitary(m) => m.rows().trailing_zeros() as usize,
            _ => 2,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            GateKind::H => "h",
            GateKind::X => "x",
            GateKind::Y => "y",
            GateKind::Z => "z",
            GateKind::S => "s",
            GateKind::Sdg => "sdg",
            GateKind::Cx => "cx",
            GateKind::Cy => "cy",
            GateKind::Cz => "cz",
            GateKind::Swap => "swap",
            GateKind::Rx => "rx",
            GateKind::Ry => "ry",
            GateKind::Rz => "rz",
            GateKind::Rxx => "rxx",
            GateKind::Ryy => "ryy",
            GateKind::Rzz => "rzz",
            GateKind::Crx => "crx",
            GateKind::Cry => "cry",
            GateKind::Crz => "crz",
            GateKind::XxPlusYy { .. } => "xx_plus_yy",
            GateKind::Unitary(_) => "unitary",
        }
    }
}

/// Angle binding: `angle = scale * params[index]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Binding {
    pub index: usize,
    pub scale: f64,
}

/// A gate placed on an ordered list of qubits.
#[derive(Clone, Debug, PartialEq)]
pub struct GateOp {
    pub kind: GateKind,
    pub targets: Vec<usize>,
    pub angle: f64,
    pub binding: Option<Binding>,
}

impl GateOp {
    pub fn fixed(kind: GateKind, targets: Vec<usize>) -> Self {
        Self {
            kind,
            targets,
            angle: 0.0,
            binding: None,
        }
    }

    pub fn rotation(kind: GateKind, targets: Vec<usize>, angle: f64) -> Self {
        debug_assert!(kind.is_parametric());
        Self {
            kind,
            targets,
            angle,
            binding: None,
        }
    }

    /// Parametric gate whose angle is `scale * params[index]`.
    pub fn bound(kind: GateKind, targets: Vec<usize>, params: &[f64], index: usize, scale: f64) -> Self {
        Self {
            kind,
            targets,
            angle: scale * params[index],
            binding: Some(Binding { index, scale }),
        }
    }

    /// Custom unitary gate. Fails when the matrix is not a unitary of size `2^k` for
    /// `k = targets.len()`.
    pub fn unitary(matrix: CMatrix, targets: Vec<usize>) -> Result<Self, super::SimError> {
        let dim = 1usize << targets.len();
        if matrix.rows() != dim || matrix.cols() != dim {
            return Err(super::SimError::DimensionMismatch {
                expected: dim,
                found: matrix.rows(),
            });
        }
        let err = matrix.unitarity_error();
        if err > 1e-10 {
            return Err(super::SimError::NonUnitary(err));
        }
        Ok(Self::fixed(GateKind::Unitary(matrix), targets))
    }

    pub fn h(q: usize) -> Self {
        Self::fixed(GateKind::H, vec![q])
    }

    pub fn x(q: usize) -> Self {
        Self::fixed(GateKind::X, vec![q])
    }

    pub fn cx(control: usize, target: usize) -> Self {
        Self::fixed(GateKind::Cx, vec![control, target])
    }

    pub fn cy(control: usize, target: usize) -> Self {
        Self::fixed(GateKind::Cy, vec![control, target])
    }

    pub fn rx(q: usize, angle: f64) -> Self {
        Self::rotation(GateKind::Rx, vec![q], angle)
    }

    pub fn ry(q: usize, angle: f64) -> Self {
        Self::rotation(GateKind::Ry, vec![q], angle)
    }

    pub fn rz(q: usize, angle: f64) -> Self {
        Self::rotation(GateKind::Rz, vec![q], angle)
    }

    pub fn rzz(a: usize, b: usize, angle: f64) -> Self {
        Self::rotation(GateKind::Rzz, vec![a, b], angle)
    }

    pub fn cry(control: usize, target: usize, angle: f64) -> Self {
        Self::rotation(GateKind::Cry, vec![control, target], angle)
    }

    pub fn label(&self) -> &'static str {
        self.kind.label()
    }

    pub fn arity(&self) -> usize {
        self.targets.len()
    }

    pub fn is_parametric(&self) -> bool {
        self.kind.is_parametric()
    }

    /// Re-evaluates the bound angle against a new parameter vector.
    pub fn rebind(&mut self, params: &[f64]) {
        if let Some(b) = self.binding {
            self.angle = b.scale * params[b.index];
        }
    }

    pub fn matrix(&self) -> CMatrix {
        let half = 0.5 * self.angle;
        self.kind_matrix(half.cos(), half.sin(), 1.0)
    }

    /// `d matrix / d angle`; the zero matrix for fixed gates.
    pub fn angle_derivative(&self) -> CMatrix {
        let dim = 1usize << self.kind.arity().max(self.targets.len());
        if !self.is_parametric() {
            return CMatrix::zeros(dim, dim);
        }
        let half = 0.5 * self.angle;
        // Every parametric matrix is linear in (cos, sin, 1): differentiate the coefficients.
        self.kind_matrix(-0.5 * half.sin(), 0.5 * half.cos(), 0.0)
    }

    /// Inverse gate. Bound gates keep their binding with the scale negated.
    pub fn dagger(&self) -> GateOp {
        let mut out = self.clone();
        match &self.kind {
            GateKind::S => out.kind = GateKind::Sdg,
            GateKind::Sdg => out.kind = GateKind::S,
            GateKind::Unitary(m) => out.kind = GateKind::Unitary(m.adjoint()),
            k if k.is_parametric() => {
                out.angle = -self.angle;
                if let Some(b) = self.binding {
                    out.binding = Some(Binding {
                        index: b.index,
                        scale: -b.scale,
                    });
                }
            }
            _ => {}
        }
        out
    }

    fn kind_matrix(&self, c: f64, s: f64, one: f64) -> CMatrix {
        let c = C64::new(c, 0.0);
        let s = C64::new(s, 0.0);
        let one = C64::new(one, 0.0);
        let h = C64::new(FRAC_1_SQRT_2, 0.0);
        match &self.kind {
            GateKind::H => CMatrix::from_rows(&[vec![h, h], vec![h, -h]]),
            GateKind::X => CMatrix::from_rows(&[vec![ZERO, ONE], vec![ONE, ZERO]]),
            GateKind::Y => CMatrix::from_rows(&[vec![ZERO, -I], vec![I, ZERO]]),
            GateKind::Z => CMatrix::diagonal(&[ONE, -ONE]),
            GateKind::S => CMatrix::diagonal(&[ONE, I]),
            GateKind::Sdg => CMatrix::diagonal(&[ONE, -I]),
            GateKind::Cx => controlled(&CMatrix::from_rows(&[vec![ZERO, ONE], vec![ONE, ZERO]]), ONE),
            GateKind::Cy => controlled(&CMatrix::from_rows(&[vec![ZERO, -I], vec![I, ZERO]]), ONE),
            GateKind::Cz => CMatrix::diagonal(&[ONE, ONE, ONE, -ONE]),
            GateKind::Swap => CMatrix::from_rows(&[
                vec![ONE, ZERO, ZERO, ZERO],
                vec![ZERO, ZERO, ONE, ZERO],
                vec![ZERO, ONE, ZERO, ZERO],
                vec![ZERO, ZERO, ZERO, ONE],
            ]),
            GateKind::Rx => rx(c, s),
            GateKind::Ry => ry(c, s),
            GateKind::Rz => rz(c, s),
            GateKind::Rxx => CMatrix::from_rows(&[
                vec![c, ZERO, ZERO, -I * s],
                vec![ZERO, c, -I * s, ZERO],
                vec![ZERO, -I * s, c, ZERO],
                vec![-I * s, ZERO, ZERO, c],
            ]),
            GateKind::Ryy => CMatrix::from_rows(&[
                vec![c, ZERO, ZERO, I * s],
                vec![ZERO, c, -I * s, ZERO],
                vec![ZERO, -I * s, c, ZERO],
                vec![I * s, ZERO, ZERO, c],
            ]),
            GateKind::Rzz => CMatrix::diagonal(&[c - I * s, c + I * s, c + I * s, c - I * s]),
            GateKind::Crx => controlled(&rx(c, s), one),
            GateKind::Cry => controlled(&ry(c, s), one),
            GateKind::Crz => controlled(&rz(c, s), one),
            GateKind::XxPlusYy { beta } => {
                let e_minus = C64::from_polar(1.0, -beta);
                let e_plus = C64::from_polar(1.0, *beta);
                CMatrix::from_rows(&[
                    vec![one, ZERO, ZERO, ZERO],
                    vec![ZERO, c, -I * s * e_minus, ZERO],
                    vec![ZERO, -I * s * e_plus, c, ZERO],
                    vec![ZERO, ZERO, ZERO, one],
                ])
            }
            GateKind::Unitary(m) => m.clone(),
        }
    }
}

fn rx(c: C64, s: C64) -> CMatrix {
    CMatrix::from_rows(&[vec![c, -I * s], vec![-I * s, c]])
}

fn ry(c: C64, s: C64) -> CMatrix {
    CMatrix::from_rows(&[vec![c, -s], vec![s, c]])
}

fn rz(c: C64, s: C64) -> CMatrix {
    CMatrix::diagonal(&[c - I * s, c + I * s])
}

/// `|0⟩⟨0| ⊗ one·I + |1⟩⟨1| ⊗ u`, control on the first (most significant) qubit.
fn controlled(u: &CMatrix, one: C64) -> CMatrix {
    let mut m = CMatrix::zeros(4, 4);
    m[(0, 0)] = one;
    m[(1, 1)] = one;
    for i in 0..2 {
        for j in 0..2 {
            m[(2 + i, 2 + j)] = u[(i, j)];
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    fn all_parametric(angle: f64) -> Vec<GateOp> {
        vec![
            GateOp::rotation(GateKind::Rx, vec![0], angle),
            GateOp::rotation(GateKind::Ry, vec![0], angle),
            GateOp::rotation(GateKind::Rz, vec![0], angle),
            GateOp::rotation(GateKind::Rxx, vec![0, 1], angle),
            GateOp::rotation(GateKind::Ryy, vec![0, 1], angle),
            GateOp::rotation(GateKind::Rzz, vec![0, 1], angle),
            GateOp::rotation(GateKind::Crx, vec![0, 1], angle),
            GateOp::rotation(GateKind::Cry, vec![0, 1], angle),
            GateOp::rotation(GateKind::Crz, vec![0, 1], angle),
            GateOp::rotation(GateKind::XxPlusYy { beta: 0.3 }, vec![0, 1], angle),
        ]
    }

    #[test]
    fn parametric_gates_are_unitary() {
        for angle in [-3.0, -0.4, 0.0, 0.7, 2.9] {
            for g in all_parametric(angle) {
                assert!(g.matrix().unitarity_error() < 1e-12, "{}", g.label());
            }
        }
    }

    #[test]
    fn angle_derivative_matches_central_difference() {
        let h = 1e-6;
        for g in all_parametric(0.83) {
            let mut plus = g.clone();
            plus.angle += h;
            let mut minus = g.clone();
            minus.angle -= h;
            let fd = plus.matrix().sub(&minus.matrix()).scale(C64::new(0.5 / h, 0.0));
            assert!(fd.max_abs_diff(&g.angle_derivative()) < 1e-8, "{}", g.label());
        }
    }

    #[test]
    fn dagger_inverts() {
        let mut gates = all_parametric(1.1);
        gates.push(GateOp::fixed(GateKind::S, vec![0]));
        gates.push(GateOp::fixed(GateKind::Cy, vec![0, 1]));
        for g in gates {
            let dim = g.matrix().rows();
            let prod = g.dagger().matrix().matmul(&g.matrix());
            assert!(prod.max_abs_diff(&CMatrix::identity(dim)) < 1e-12, "{}", g.label());
        }
    }

    #[test]
    fn xx_plus_yy_at_quarter_turn_beta_is_real_rotation() {
        let theta: f64 = 0.61;
        let g = GateOp::rotation(
            GateKind::XxPlusYy {
                beta: std::f64::consts::FRAC_PI_2,
            },
            vec![0, 1],
            2.0 * theta,
        );
        let (cs, sn) = (theta.cos(), theta.sin());
        let expected = CMatrix::from_real_rows(&[
            vec![1.0, 0.0, 0.0, 0.0],
            vec![0.0, cs, -sn, 0.0],
            vec![0.0, sn, cs, 0.0],
            vec![0.0, 0.0, 0.0, 1.0],
        ]);
        assert!(g.matrix().max_abs_diff(&expected) < 1e-14);
    }

    #[test]
    fn custom_unitary_rejects_non_unitary() {
        let m = CMatrix::from_real_rows(&[vec![1.0, 1.0], vec![0.0, 1.0]]);
        assert!(GateOp::unitary(m, vec![0]).is_err());
    }
}
