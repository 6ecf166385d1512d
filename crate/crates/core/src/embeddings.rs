//! Parameterized embedding circuits.
//!
//! The literal encodings are written `exp(+iφP)`; with `R_P(α) = exp(-iαP/2)` every
//! builder passes `α = -2φ`. Gates are bound to the feature vector, so
//! [`crate::qsim::adjoint_gradient`] returns derivatives with respect to the features.

use std::fmt;
use std::str::FromStr;

use crate::qsim::{run_circuit, GateKind, GateOp, SimError, StateVector};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EmbeddingError {
    #[error("embedding needs at least 2 qubits, got {0}")]
    TooFewQubits(usize),
    #[error("{kind} on {n_qubits} qubits expects {expected} parameters, got {found}")]
    WrongParameterCount {
        kind: FeatureMapKind,
        n_qubits: usize,
        expected: usize,
        found: usize,
    },
    #[error("unknown feature map kind `{0}`")]
    UnknownKind(String),
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// Pauli axis of an NC-family unit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Axis {
    X,
    Y,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FeatureMapKind {
    ZzUnit,
    NcxUnit,
    NcyUnit,
    Nc10xUnit,
    Nc10yUnit,
    NclxUnit,
    NclyUnit,
    ZzStack,
    NcStack,
    Nc10Stack,
    NclStack,
}

impl FeatureMapKind {
    pub const ALL: [FeatureMapKind; 11] = [
        Self::ZzUnit,
        Self::NcxUnit,
        Self::NcyUnit,
        Self::Nc10xUnit,
        Self::Nc10yUnit,
        Self::NclxUnit,
        Self::NclyUnit,
        Self::ZzStack,
        Self::NcStack,
        Self::Nc10Stack,
        Self::NclStack,
    ];

    pub const UNITS: [FeatureMapKind; 7] = [
        Self::ZzUnit,
        Self::NcxUnit,
        Self::NcyUnit,
        Self::Nc10xUnit,
        Self::Nc10yUnit,
        Self::NclxUnit,
        Self::NclyUnit,
    ];

    pub const STACKS: [FeatureMapKind; 4] = [Self::ZzStack, Self::NcStack, Self::Nc10Stack, Self::NclStack];

    /// Stable name used in configs and checkpoints.
    pub fn name(self) -> &'static str {
        match self {
            Self::ZzUnit => "zz_unit",
            Self::NcxUnit => "ncx_unit",
            Self::NcyUnit => "ncy_unit",
            Self::Nc10xUnit => "nc10x_unit",
            Self::Nc10yUnit => "nc10y_unit",
            Self::NclxUnit => "nclx_unit",
            Self::NclyUnit => "ncly_unit",
            Self::ZzStack => "zz",
            Self::NcStack => "nc",
            Self::Nc10Stack => "nc10",
            Self::NclStack => "ncl",
        }
    }

    pub fn is_stack(self) -> bool {
        matches!(self, Self::ZzStack | Self::NcStack | Self::Nc10Stack | Self::NclStack)
    }

    /// The three units of a stack in application order; a unit maps to itself.
    pub fn layers(self) -> Vec<FeatureMapKind> {
        match self {
            Self::ZzStack => vec![Self::ZzUnit; 3],
            Self::NcStack => vec![Self::NcxUnit, Self::NcyUnit, Self::NcxUnit],
            Self::Nc10Stack => vec![Self::Nc10xUnit, Self::Nc10yUnit, Self::Nc10xUnit],
            Self::NclStack => vec![Self::NclxUnit, Self::NclyUnit, Self::NclxUnit],
            unit => vec![unit],
        }
    }
}

impl fmt::Display for FeatureMapKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FeatureMapKind {
    type Err = EmbeddingError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| EmbeddingError::UnknownKind(s.to_string()))
    }
}

/// Number of features consumed by `kind` on `n` qubits.
pub fn unit_param_count(kind: FeatureMapKind, n: usize) -> Result<usize, EmbeddingError> {
    if n < 2 {
        return Err(EmbeddingError::TooFewQubits(n));
    }
    Ok(match kind {
        FeatureMapKind::ZzUnit => n * (n + 1) / 2,
        k if k.is_stack() => 3 * unit_param_count(k.layers()[0], n)?,
        _ => 2 * n,
    })
}

fn check_len(kind: FeatureMapKind, theta: &[f64], n: usize) -> Result<(), EmbeddingError> {
    let expected = unit_param_count(kind, n)?;
    if theta.len() != expected {
        return Err(EmbeddingError::WrongParameterCount {
            kind,
            n_qubits: n,
            expected,
            found: theta.len(),
        });
    }
    Ok(())
}

fn axis_kinds(axis: Axis) -> (GateKind, GateKind, GateKind) {
    match axis {
        Axis::X => (GateKind::Rx, GateKind::Rxx, GateKind::Cx),
        Axis::Y => (GateKind::Ry, GateKind::Ryy, GateKind::Cy),
    }
}

fn push_zz(out: &mut Vec<GateOp>, theta: &[f64], off: usize, n: usize) {
    for q in 0..n {
        out.push(GateOp::h(q));
    }
    for q in 0..n {
        out.push(GateOp::bound(GateKind::Rz, vec![q], theta, off + q, -2.0));
    }
    let mut k = off + n;
    for i in 0..n {
        for j in (i + 1)..n {
            out.push(GateOp::bound(GateKind::Rzz, vec![i, j], theta, k, -2.0));
            k += 1;
        }
    }
}

fn push_nc(out: &mut Vec<GateOp>, theta: &[f64], off: usize, n: usize, axis: Axis) {
    let (r1, r2, _) = axis_kinds(axis);
    for q in 0..n {
        out.push(GateOp::bound(r1.clone(), vec![q], theta, off + q, -2.0));
    }
    for i in 0..n {
        out.push(GateOp::bound(r2.clone(), vec![i, (i + 1) % n], theta, off + n + i, -2.0));
    }
}

fn push_nc10(out: &mut Vec<GateOp>, theta: &[f64], off: usize, n: usize, axis: Axis) {
    let (r1, _, cp) = axis_kinds(axis);
    for q in 0..n {
        out.push(GateOp::bound(r1.clone(), vec![q], theta, off + q, -2.0));
    }
    for i in 0..n {
        out.push(GateOp::fixed(cp.clone(), vec![i, (i + 1) % n]));
    }
    for q in 0..n {
        out.push(GateOp::bound(r1.clone(), vec![q], theta, off + n + q, -2.0));
    }
}

fn push_ncl(out: &mut Vec<GateOp>, theta: &[f64], off: usize, n: usize, axis: Axis) {
    let (r1, _, _) = axis_kinds(axis);
    for q in 0..n {
        out.push(GateOp::bound(r1.clone(), vec![q], theta, off + q, -2.0));
    }
    for i in 0..n {
        let ip = (i + 1) % n;
        let gate = match axis {
            Axis::X => GateOp::bound(GateKind::Cry, vec![ip, i], theta, off + n + i, 2.0),
            Axis::Y => GateOp::bound(GateKind::Cry, vec![i, ip], theta, off + n + i, -2.0),
        };
        out.push(gate);
    }
}

fn push_unit(out: &mut Vec<GateOp>, kind: FeatureMapKind, theta: &[f64], off: usize, n: usize) {
    match kind {
        FeatureMapKind::ZzUnit => push_zz(out, theta, off, n),
        FeatureMapKind::NcxUnit => push_nc(out, theta, off, n, Axis::X),
        FeatureMapKind::NcyUnit => push_nc(out, theta, off, n, Axis::Y),
        FeatureMapKind::Nc10xUnit => push_nc10(out, theta, off, n, Axis::X),
        FeatureMapKind::Nc10yUnit => push_nc10(out, theta, off, n, Axis::Y),
        FeatureMapKind::NclxUnit => push_ncl(out, theta, off, n, Axis::X),
        FeatureMapKind::NclyUnit => push_ncl(out, theta, off, n, Axis::Y),
        stack => unreachable!("{stack} is not a unit"),
    }
}

/// `U₁`: Hadamard layer, `RZ(-2θ_i)` per qubit, `RZZ(-2θ_k)` per pair `i<j` in
/// lexicographic order.
pub fn build_zz_unit(theta: &[f64], n: usize) -> Result<Vec<GateOp>, EmbeddingError> {
    check_len(FeatureMapKind::ZzUnit, theta, n)?;
    let mut out = Vec::new();
    push_zz(&mut out, theta, 0, n);
    Ok(out)
}

/// `U₂`/`U₃`: single-qubit `R_P` layer then the `R_PP` ring on `(i, i+1 mod n)`.
pub fn build_nc_unit(theta: &[f64], n: usize, axis: Axis) -> Result<Vec<GateOp>, EmbeddingError> {
    let kind = match axis {
        Axis::X => FeatureMapKind::NcxUnit,
        Axis::Y => FeatureMapKind::NcyUnit,
    };
    check_len(kind, theta, n)?;
    let mut out = Vec::new();
    push_nc(&mut out, theta, 0, n, axis);
    Ok(out)
}

/// `U₄`/`U₅`: `R_P(-2θ_i)`, ring of controlled-`P` in ascending control order,
/// `R_P(-2θ_{i+n})`.
pub fn build_nc10_unit(theta: &[f64], n: usize, axis: Axis) -> Result<Vec<GateOp>, EmbeddingError> {
    let kind = match axis {
        Axis::X => FeatureMapKind::Nc10xUnit,
        Axis::Y => FeatureMapKind::Nc10yUnit,
    };
    check_len(kind, theta, n)?;
    let mut out = Vec::new();
    push_nc10(&mut out, theta, 0, n, axis);
    Ok(out)
}

/// `U₆`/`U₇`: `R_P(-2θ_i)` layer then a controlled-`RY` ring.
///
/// Axis X uses control `i+1`, target `i`, angle `2θ_{i+n}`. Axis Y uses control `i`,
/// target `i+1` with angle `-2θ_{i+n}`, which is the literal `CRY_{ii'}` matrix (the
/// rotation block sits on the states where `q_i = 1` with `+sin` above the diagonal).
pub fn build_ncl_unit(theta: &[f64], n: usize, axis: Axis) -> Result<Vec<GateOp>, EmbeddingError> {
    let kind = match axis {
        Axis::X => FeatureMapKind::NclxUnit,
        Axis::Y => FeatureMapKind::NclyUnit,
    };
    check_len(kind, theta, n)?;
    let mut out = Vec::new();
    push_ncl(&mut out, theta, 0, n, axis);
    Ok(out)
}

/// Three units applied in order on consecutive thirds of `theta`.
pub fn build_stacked(kind: FeatureMapKind, theta: &[f64], n: usize) -> Result<Vec<GateOp>, EmbeddingError> {
    check_len(kind, theta, n)?;
    let mut out = Vec::new();
    let layers = kind.layers();
    let per = theta.len() / layers.len();
    for (l, unit) in layers.into_iter().enumerate() {
        push_unit(&mut out, unit, theta, l * per, n);
    }
    Ok(out)
}

/// Feature map on a fixed number of qubits.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EmbeddingSpec {
    pub kind: FeatureMapKind,
    pub n_qubits: usize,
}

impl EmbeddingSpec {
    pub fn new(kind: FeatureMapKind, n_qubits: usize) -> Result<Self, EmbeddingError> {
        unit_param_count(kind, n_qubits)?;
        Ok(Self { kind, n_qubits })
    }

    pub fn param_count(&self) -> usize {
        unit_param_count(self.kind, self.n_qubits).expect("validated at construction")
    }

    /// Gate list for any kind, unit or stack.
    pub fn build(&self, features: &[f64]) -> Result<Vec<GateOp>, EmbeddingError> {
        build_stacked(self.kind, features, self.n_qubits)
    }

    pub fn embed_state(&self, features: &[f64]) -> Result<StateVector, EmbeddingError> {
        Ok(run_circuit(&self.build(features)?, self.n_qubits)?)
    }
}

/// `U(features)|0…0⟩`.
pub fn embed_state(spec: &EmbeddingSpec, features: &[f64]) -> Result<StateVector, EmbeddingError> {
    spec.embed_state(features)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qsim::{circuit_unitary, CMatrix};
    use crate::C64;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn hn(n: usize) -> CMatrix {
        circuit_unitary(&(0..n).map(GateOp::h).collect::<Vec<_>>(), n).unwrap()
    }

    fn s_layer(n: usize, dagger: bool) -> CMatrix {
        let kind = if dagger { GateKind::Sdg } else { GateKind::S };
        circuit_unitary(&(0..n).map(|q| GateOp::fixed(kind.clone(), vec![q])).collect::<Vec<_>>(), n).unwrap()
    }

    #[test]
    fn parameter_counts() {
        assert_eq!(unit_param_count(FeatureMapKind::ZzUnit, 4).unwrap(), 10);
        assert_eq!(unit_param_count(FeatureMapKind::NcxUnit, 4).unwrap(), 8);
        assert_eq!(unit_param_count(FeatureMapKind::ZzStack, 4).unwrap(), 30);
        for n in 2..8 {
            for k in FeatureMapKind::UNITS {
                let want = if k == FeatureMapKind::ZzUnit { n * (n + 1) / 2 } else { 2 * n };
                assert_eq!(unit_param_count(k, n).unwrap(), want);
            }
            for k in FeatureMapKind::STACKS {
                assert_eq!(
                    unit_param_count(k, n).unwrap(),
                    3 * unit_param_count(k.layers()[0], n).unwrap()
                );
            }
        }
        assert!(matches!(
            unit_param_count(FeatureMapKind::NcStack, 1),
            Err(EmbeddingError::TooFewQubits(1))
        ));
    }

    #[test]
    fn names_round_trip() {
        for k in FeatureMapKind::ALL {
            assert_eq!(k.name().parse::<FeatureMapKind>().unwrap(), k);
        }
        assert!("zz_stack".parse::<FeatureMapKind>().is_err());
    }

    #[test]
    fn wrong_length_rejected() {
        assert!(matches!(
            build_zz_unit(&[0.0; 9], 4),
            Err(EmbeddingError::WrongParameterCount { expected: 10, found: 9, .. })
        ));
        assert!(build_nc_unit(&[0.0; 7], 4, Axis::Y).is_err());
        assert!(build_stacked(FeatureMapKind::NclStack, &[0.0; 8], 4).is_err());
    }

    #[test]
    fn zz_zero_is_hadamard_layer() {
        let u = circuit_unitary(&build_zz_unit(&[0.0; 3], 2).unwrap(), 2).unwrap();
        assert!(u.max_abs_diff(&hn(2)) < 1e-14);
    }

    #[test]
    fn zz_two_qubit_phases() {
        let (a, b, cc) = (0.37, -1.2, 0.81);
        let u = circuit_unitary(&build_zz_unit(&[a, b, cc], 2).unwrap(), 2).unwrap();
        let z = [1.0, -1.0];
        let phases: Vec<C64> = (0..4)
            .map(|k| {
                let (za, zb) = (z[k >> 1], z[k & 1]);
                C64::from_polar(1.0, a * za + b * zb + cc * za * zb)
            })
            .collect();
        let expected = CMatrix::diagonal(&phases).matmul(&hn(2));
        assert!(u.max_abs_diff(&expected) < 1e-13);
    }

    #[test]
    fn zz_pairwise_zero_factorizes() {
        let mut theta = vec![0.0; 10];
        theta[..4].copy_from_slice(&[0.4, -0.3, 1.1, 2.0]);
        let u = circuit_unitary(&build_zz_unit(&theta, 4).unwrap(), 4).unwrap();
        let mut prod = CMatrix::identity(1);
        for &t in &theta[..4] {
            prod = prod.kron(&CMatrix::diagonal(&[C64::from_polar(1.0, t), C64::from_polar(1.0, -t)]));
        }
        assert!(u.max_abs_diff(&prod.matmul(&hn(4))) < 1e-13);
    }

    #[test]
    fn zero_features_give_identity() {
        for k in [FeatureMapKind::NcStack, FeatureMapKind::NclStack, FeatureMapKind::NcxUnit, FeatureMapKind::NclyUnit] {
            let spec = EmbeddingSpec::new(k, 4).unwrap();
            let u = circuit_unitary(&spec.build(&vec![0.0; spec.param_count()]).unwrap(), 4).unwrap();
            assert!(u.max_abs_diff(&CMatrix::identity(16)) < 1e-14, "{k}");
        }
    }

    #[test]
    fn zz_stack_zero_is_hadamard_layer() {
        let u = circuit_unitary(&build_stacked(FeatureMapKind::ZzStack, &[0.0; 30], 4).unwrap(), 4).unwrap();
        assert!(u.max_abs_diff(&hn(4)) < 1e-13);
    }

    #[test]
    fn nc_two_qubit_ring_repeats_pair() {
        let gates = build_nc_unit(&[0.1, 0.2, 0.3, 0.4], 2, Axis::X).unwrap();
        let pairs: Vec<_> = gates.iter().filter(|g| g.arity() == 2).map(|g| g.targets.clone()).collect();
        assert_eq!(pairs, vec![vec![0, 1], vec![1, 0]]);
    }

    #[test]
    fn nc_matches_literal_exponential() {
        // exp(i Σ θ_i X_i + i Σ θ_{i+n} X_i X_{i'}) via eigen-decomposition of the generator.
        let n = 3;
        let theta = [0.3, -0.7, 1.2, 0.5, -0.2, 0.9];
        let xs: Vec<CMatrix> = (0..n)
            .map(|q| {
                let mut m = CMatrix::identity(1);
                for k in 0..n {
                    m = m.kron(&if k == q { crate::qsim::pauli::x() } else { CMatrix::identity(2) });
                }
                m
            })
            .collect();
        let mut gen = CMatrix::zeros(8, 8);
        for i in 0..n {
            gen = gen.add(&xs[i].scale(c(theta[i], 0.0)));
            gen = gen.add(&xs[i].matmul(&xs[(i + 1) % n]).scale(c(theta[n + i], 0.0)));
        }
        let e = crate::qsim::hermitian_eigen(&gen).unwrap();
        let phases: Vec<C64> = e.values.iter().map(|&l| C64::from_polar(1.0, l)).collect();
        let expected = e.vectors.matmul(&CMatrix::diagonal(&phases)).matmul(&e.vectors.adjoint());
        let u = circuit_unitary(&build_nc_unit(&theta, n, Axis::X).unwrap(), n).unwrap();
        assert!(u.max_abs_diff(&expected) < 1e-10);
    }

    #[test]
    fn nc10_zero_is_cx_ring() {
        let u = circuit_unitary(&build_nc10_unit(&[0.0; 4], 2, Axis::X).unwrap(), 2).unwrap();
        let expected = circuit_unitary(&[GateOp::cx(0, 1), GateOp::cx(1, 0)], 2).unwrap();
        assert!(u.max_abs_diff(&expected) < 1e-14);
        // CX₁₀·CX₀₁: |01⟩ is untouched by CX₀₁, then flipped to |11⟩.
        let col = u.column(1);
        assert!((col[3] - c(1.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn ncl_gates_match_literal_matrices() {
        let t: f64 = 0.63;
        let (co, si) = (t.cos(), t.sin());
        // Two-qubit register read as |q_{i'} q_i⟩ with i' = qubit 0, i = qubit 1.
        let cry_ji = CMatrix::from_real_rows(&[
            vec![1.0, 0.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0, 0.0],
            vec![0.0, 0.0, co, -si],
            vec![0.0, 0.0, si, co],
        ]);
        let cry_ij = CMatrix::from_real_rows(&[
            vec![1.0, 0.0, 0.0, 0.0],
            vec![0.0, co, 0.0, si],
            vec![0.0, 0.0, 1.0, 0.0],
            vec![0.0, -si, 0.0, co],
        ]);
        let p = [t];
        let x_gate = GateOp::bound(GateKind::Cry, vec![0, 1], &p, 0, 2.0);
        let y_gate = GateOp::bound(GateKind::Cry, vec![1, 0], &p, 0, -2.0);
        assert!(circuit_unitary(&[x_gate], 2).unwrap().max_abs_diff(&cry_ji) < 1e-14);
        assert!(circuit_unitary(&[y_gate], 2).unwrap().max_abs_diff(&cry_ij) < 1e-14);

        let gx = build_ncl_unit(&[0.0, 0.0, 0.0, t], 2, Axis::X).unwrap();
        assert_eq!(gx[3].targets, vec![0, 1]);
        assert_eq!(gx[3].angle, 2.0 * t);
        let gy = build_ncl_unit(&[0.0, 0.0, t, 0.0], 2, Axis::Y).unwrap();
        assert_eq!(gy[2].targets, vec![0, 1]);
        assert_eq!(gy[2].angle, -2.0 * t);
    }

    #[test]
    fn embed_state_examples() {
        let zz = EmbeddingSpec::new(FeatureMapKind::ZzUnit, 2).unwrap();
        let s = zz.embed_state(&[0.0; 3]).unwrap();
        assert!(s.amplitudes().iter().all(|a| (a - c(0.5, 0.0)).norm() < 1e-14));
        let nc = EmbeddingSpec::new(FeatureMapKind::NcxUnit, 2).unwrap();
        assert!((nc.embed_state(&[0.0; 4]).unwrap().amplitudes()[0] - c(1.0, 0.0)).norm() < 1e-14);
    }

    proptest! {
        #[test]
        fn builders_are_unitary(theta in proptest::collection::vec(-4.0f64..4.0, 30), k in 0usize..11) {
            let kind = FeatureMapKind::ALL[k];
            let spec = EmbeddingSpec::new(kind, 4).unwrap();
            let gates = spec.build(&theta[..spec.param_count()]).unwrap();
            let u = circuit_unitary(&gates, 4).unwrap();
            prop_assert!(u.unitarity_error() < 1e-10);
            let s = spec.embed_state(&theta[..spec.param_count()]).unwrap();
            prop_assert!((s.norm_sqr() - 1.0).abs() < 1e-10);
        }

        #[test]
        fn stack_is_product_of_units(theta in proptest::collection::vec(-4.0f64..4.0, 30), k in 0usize..4) {
            let kind = FeatureMapKind::STACKS[k];
            let n = 4;
            let per = unit_param_count(kind.layers()[0], n).unwrap();
            let theta = &theta[..3 * per];
            let u = circuit_unitary(&build_stacked(kind, theta, n).unwrap(), n).unwrap();
            let mut prod = CMatrix::identity(16);
            for (l, unit) in kind.layers().into_iter().enumerate() {
                let ul = circuit_unitary(&build_stacked(unit, &theta[l * per..(l + 1) * per], n).unwrap(), n).unwrap();
                prod = ul.matmul(&prod);
            }
            prop_assert!(u.max_abs_diff(&prod) < 1e-10);
        }

        #[test]
        fn nc_axis_swap_is_s_conjugation(theta in proptest::collection::vec(-4.0f64..4.0, 8)) {
            let ux = circuit_unitary(&build_nc_unit(&theta, 4, Axis::X).unwrap(), 4).unwrap();
            let uy = circuit_unitary(&build_nc_unit(&theta, 4, Axis::Y).unwrap(), 4).unwrap();
            // S X S† = Y on every qubit.
            let conj = s_layer(4, false).matmul(&ux).matmul(&s_layer(4, true));
            prop_assert!(uy.max_abs_diff(&conj) < 1e-10);
        }
    }
}
