use super::gates::{GateKind, GateOp};
use super::matrix::CMatrix;
use super::SimError;
use crate::C64;

const NORM_TOL: f64 = 1e-10;

/// Applies a `2^k × 2^k` matrix to the qubits `targets` of an `n`-qubit register
/// stored as a flat amplitude slice. `targets[0]` is the most significant bit of the
/// local index. No validation; callers check targets.
pub(crate) fn apply_local(amps: &mut [C64], n: usize, targets: &[usize], m: &CMatrix) {
    let k = targets.len();
    let dim = 1usize << k;
    debug_assert_eq!(m.rows(), dim);
    let bits: Vec<usize> = targets.iter().map(|&q| n - 1 - q).collect();
    let mask = bits.iter().fold(0usize, |acc, &b| acc | (1 << b));
    let offsets: Vec<usize> = (0..dim)
        .map(|l| {
            (0..k).fold(0usize, |acc, t| acc | (((l >> (k - 1 - t)) & 1) << bits[t]))
        })
        .collect();
    let mat = m.as_slice();
    let mut buf = vec![C64::new(0.0, 0.0); dim];
    for base in 0..(1usize << n) {
        if base & mask != 0 {
            continue;
        }
        for (l, b) in buf.iter_mut().enumerate() {
            *b = amps[base + offsets[l]];
        }
        for r in 0..dim {
            let row = &mat[r * dim..(r + 1) * dim];
            let acc: C64 = row.iter().zip(&buf).map(|(a, b)| a * b).sum();
            amps[base + offsets[r]] = acc;
        }
    }
}

pub(crate) fn check_targets(targets: &[usize], n: usize) -> Result<(), SimError> {
    for (i, &t) in targets.iter().enumerate() {
        if t >= n {
            return Err(SimError::TargetOutOfRange { target: t, n_qubits: n });
        }
        if targets[..i].contains(&t) {
            return Err(SimError::DuplicateTarget(t));
        }
    }
    Ok(())
}

pub(crate) fn check_gate(gate: &GateOp, n: usize) -> Result<(), SimError> {
    check_targets(&gate.targets, n)?;
    if gate.kind.arity() != gate.targets.len() {
        return Err(SimError::ArityMismatch {
            gate: gate.label(),
            expected: gate.kind.arity(),
            found: gate.targets.len(),
        });
    }
    if let GateKind::Unitary(m) = &gate.kind {
        let err = m.unitarity_error();
        if err > NORM_TOL {
            return Err(SimError::NonUnitary(err));
        }
    }
    Ok(())
}

/// Pure state on `n` qubits.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amplitudes: Vec<C64>,
}

impl StateVector {
    /// `|0…0⟩`.
    pub fn zero(n_qubits: usize) -> Self {
        Self::basis(n_qubits, 0)
    }

    pub fn basis(n_qubits: usize, index: usize) -> Self {
        let mut amplitudes = vec![C64::new(0.0, 0.0); 1 << n_qubits];
        amplitudes[index] = C64::new(1.0, 0.0);
        Self { n_qubits, amplitudes }
    }

    /// Validating constructor: length must be a power of two and the norm 1.
    pub fn from_amplitudes(amplitudes: Vec<C64>) -> Result<Self, SimError> {
        let len = amplitudes.len();
        if len == 0 || !len.is_power_of_two() {
            return Err(SimError::NotPowerOfTwo(len));
        }
        let norm: f64 = amplitudes.iter().map(C64::norm_sqr).sum();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(SimError::NotNormalized(norm));
        }
        Ok(Self {
            n_qubits: len.trailing_zeros() as usize,
            amplitudes,
        })
    }

    /// Skips the norm check.
    #[cfg(test)]
    pub(crate) fn from_raw(n_qubits: usize, amplitudes: Vec<C64>) -> Self {
        debug_assert_eq!(amplitudes.len(), 1 << n_qubits);
        Self { n_qubits, amplitudes }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub(crate) fn amplitudes_mut(&mut self) -> &mut [C64] {
        &mut self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(C64::norm_sqr).sum()
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector) -> C64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(C64::norm_sqr).collect()
    }

    /// In-place gate application with validation.
    pub fn apply(&mut self, gate: &GateOp) -> Result<(), SimError> {
        check_gate(gate, self.n_qubits)?;
        apply_local(&mut self.amplitudes, self.n_qubits, &gate.targets, &gate.matrix());
        Ok(())
    }

    /// `⟨Z_q⟩`.
    pub fn z_expectation(&self, qubit: usize) -> f64 {
        let bit = self.n_qubits - 1 - qubit;
        self.amplitudes
            .iter()
            .enumerate()
            .map(|(k, a)| if (k >> bit) & 1 == 0 { a.norm_sqr() } else { -a.norm_sqr() })
            .sum()
    }
}

/// `U|ψ⟩`. Norm is preserved because the gate is unitary.
pub fn apply_gate(state: &StateVector, gate: &GateOp) -> Result<StateVector, SimError> {
    let mut out = state.clone();
    out.apply(gate)?;
    Ok(out)
}

/// Runs `gates` on `|0…0⟩`.
pub fn run_circuit(gates: &[GateOp], n_qubits: usize) -> Result<StateVector, SimError> {
    run_circuit_from(StateVector::zero(n_qubits), gates)
}

pub fn run_circuit_from(mut state: StateVector, gates: &[GateOp]) -> Result<StateVector, SimError> {
    for g in gates {
        state.apply(g)?;
    }
    Ok(state)
}

/// Full unitary of a gate list, gates composed in application order. The empty
/// circuit gives the identity.
pub fn circuit_unitary(gates: &[GateOp], n_qubits: usize) -> Result<CMatrix, SimError> {
    let dim = 1usize << n_qubits;
    for g in gates {
        check_gate(g, n_qubits)?;
    }
    // Evolve each basis column; columns become rows of the transposed accumulator.
    let mut cols = Vec::with_capacity(dim * dim);
    for j in 0..dim {
        let mut col = StateVector::basis(n_qubits, j);
        for g in gates {
            apply_local(col.amplitudes_mut(), n_qubits, &g.targets, &g.matrix());
        }
        cols.extend(col.into_amplitudes());
    }
    Ok(CMatrix::from_vec(dim, dim, cols).transpose())
}

/// Mixed state on `n` qubits.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    n_qubits: usize,
    entries: CMatrix,
}

impl DensityMatrix {
    /// Validates Hermiticity, unit trace and positive semidefiniteness.
    pub fn from_matrix(entries: CMatrix) -> Result<Self, SimError> {
        if !entries.is_square() || !entries.rows().is_power_of_two() {
            return Err(SimError::NotPowerOfTwo(entries.rows()));
        }
        let herm = entries.hermiticity_error();
        if herm > NORM_TOL {
            return Err(SimError::NotHermitian(herm));
        }
        let tr = entries.trace();
        if (tr.re - 1.0).abs() > NORM_TOL || tr.im.abs() > NORM_TOL {
            return Err(SimError::BadTrace(tr.re));
        }
        let min = super::hermitian_eigenvalues(&entries)?
            .last()
            .copied()
            .unwrap_or(0.0);
        if min < -NORM_TOL {
            return Err(SimError::NotPositive(min));
        }
        Ok(Self {
            n_qubits: entries.rows().trailing_zeros() as usize,
            entries,
        })
    }

    pub(crate) fn from_matrix_unchecked(entries: CMatrix) -> Self {
        Self {
            n_qubits: entries.rows().trailing_zeros() as usize,
            entries,
        }
    }

    /// `|0…0⟩⟨0…0|`.
    pub fn zero(n_qubits: usize) -> Self {
        to_density(&StateVector::zero(n_qubits))
    }

    pub fn maximally_mixed(n_qubits: usize) -> Self {
        let dim = 1usize << n_qubits;
        Self::from_matrix_unchecked(CMatrix::identity(dim).scale(C64::new(1.0 / dim as f64, 0.0)))
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.entries.rows()
    }

    pub fn entries(&self) -> &CMatrix {
        &self.entries
    }

    pub fn into_entries(self) -> CMatrix {
        self.entries
    }

    pub(crate) fn entries_mut(&mut self) -> &mut CMatrix {
        &mut self.entries
    }

    pub fn trace(&self) -> f64 {
        self.entries.trace().re
    }

    /// `tr(ρ²)`.
    pub fn purity(&self) -> f64 {
        // tr(ρ²) = Σ |ρ_ij|² for Hermitian ρ.
        self.entries.as_slice().iter().map(C64::norm_sqr).sum()
    }

    pub fn apply(&mut self, gate: &GateOp) -> Result<(), SimError> {
        check_gate(gate, self.n_qubits)?;
        self.apply_matrix(&gate.targets, &gate.matrix());
        Ok(())
    }

    /// `ρ ← M ρ M†` for an arbitrary local matrix.
    pub(crate) fn apply_matrix(&mut self, targets: &[usize], m: &CMatrix) {
        self.apply_left_right(targets, m, m);
    }

    /// `ρ ← L ρ R†` on local targets. The density matrix is treated as a `2n`-qubit
    /// vector: row qubits are `0..n`, column qubits `n..2n`.
    pub(crate) fn apply_left_right(&mut self, targets: &[usize], left: &CMatrix, right: &CMatrix) {
        let n = self.n_qubits;
        let col_targets: Vec<usize> = targets.iter().map(|&t| t + n).collect();
        let data = self.entries.as_mut_slice();
        apply_local(data, 2 * n, targets, left);
        apply_local(data, 2 * n, &col_targets, &right.conj());
    }

    /// Probability of each computational basis outcome.
    pub fn probabilities(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.entries[(i, i)].re).collect()
    }

    pub fn z_expectation(&self, qubit: usize) -> f64 {
        let bit = self.n_qubits - 1 - qubit;
        (0..self.dim())
            .map(|k| {
                let p = self.entries[(k, k)].re;
                if (k >> bit) & 1 == 0 {
                    p
                } else {
                    -p
                }
            })
            .sum()
    }
}

/// `|ψ⟩⟨ψ|`.
pub fn to_density(state: &StateVector) -> DensityMatrix {
    let a = state.amplitudes();
    let dim = a.len();
    let entries = CMatrix::from_fn(dim, dim, |i, j| a[i] * a[j].conj());
    DensityMatrix::from_matrix_unchecked(entries)
}

/// Kraus representation of a channel on `targets`.
#[derive(Clone, Debug, PartialEq)]
pub struct KrausChannel {
    operators: Vec<CMatrix>,
    targets: Vec<usize>,
}

impl KrausChannel {
    /// Fails when the operators have mismatched shape or violate `Σ K†K = I` by more
    /// than `1e-9`.
    pub fn new(operators: Vec<CMatrix>, targets: Vec<usize>) -> Result<Self, SimError> {
        let dim = 1usize << targets.len();
        if operators.is_empty() {
            return Err(SimError::EmptyChannel);
        }
        for k in &operators {
            if k.rows() != dim || k.cols() != dim {
                return Err(SimError::DimensionMismatch {
                    expected: dim,
                    found: k.rows(),
                });
            }
        }
        let channel = Self { operators, targets };
        let err = channel.completeness_error();
        if err > 1e-9 {
            return Err(SimError::NotTracePreserving(err));
        }
        Ok(channel)
    }

    pub fn identity(targets: Vec<usize>) -> Self {
        let dim = 1usize << targets.len();
        Self {
            operators: vec![CMatrix::identity(dim)],
            targets,
        }
    }

    pub fn operators(&self) -> &[CMatrix] {
        &self.operators
    }

    pub fn targets(&self) -> &[usize] {
        &self.targets
    }

    /// `max |Σ K†K − I|`.
    pub fn completeness_error(&self) -> f64 {
        let dim = 1usize << self.targets.len();
        let mut sum = CMatrix::zeros(dim, dim);
        for k in &self.operators {
            sum = sum.add(&k.adjoint().matmul(k));
        }
        sum.max_abs_diff(&CMatrix::identity(dim))
    }

    /// Same operators acting on other qubits.
    pub fn retarget(&self, targets: Vec<usize>) -> Self {
        assert_eq!(targets.len(), self.targets.len());
        Self {
            operators: self.operators.clone(),
            targets,
        }
    }

    /// Sequential composition: `other` after `self`, on the same targets.
    pub fn then(&self, other: &KrausChannel) -> KrausChannel {
        assert_eq!(self.targets, other.targets);
        let mut ops = Vec::with_capacity(self.operators.len() * other.operators.len());
        for b in &other.operators {
            for a in &self.operators {
                ops.push(b.matmul(a));
            }
        }
        KrausChannel {
            operators: ops,
            targets: self.targets.clone(),
        }
    }

    /// Heisenberg-picture action `Σ K† X K` on a full-register operator.
    pub(crate) fn apply_adjoint_to(&self, x: &CMatrix, n_qubits: usize) -> CMatrix {
        let dim = x.rows();
        let mut acc = CMatrix::zeros(dim, dim);
        for k in &self.operators {
            let mut tmp = DensityMatrix::from_matrix_unchecked(x.clone());
            tmp.apply_matrix(&self.targets, &k.adjoint());
            debug_assert_eq!(tmp.n_qubits(), n_qubits);
            acc = acc.add(tmp.entries());
        }
        acc
    }
}

/// `Σ K ρ K†`.
pub fn apply_channel(rho: &DensityMatrix, channel: &KrausChannel) -> Result<DensityMatrix, SimError> {
    check_targets(&channel.targets, rho.n_qubits())?;
    let err = channel.completeness_error();
    if err > 1e-9 {
        return Err(SimError::NotTracePreserving(err));
    }
    let dim = rho.dim();
    let mut acc = CMatrix::zeros(dim, dim);
    for k in &channel.operators {
        let mut term = rho.clone();
        term.apply_matrix(&channel.targets, k);
        acc = acc.add(term.entries());
    }
    Ok(DensityMatrix::from_matrix_unchecked(acc))
}

/// States that support expectation values of full-register observables.
pub trait QuantumState {
    fn n_qubits(&self) -> usize;
    fn expectation_unchecked(&self, observable: &CMatrix) -> C64;
}

impl QuantumState for StateVector {
    fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    fn expectation_unchecked(&self, observable: &CMatrix) -> C64 {
        let ov = observable.matvec(&self.amplitudes);
        self.amplitudes.iter().zip(&ov).map(|(a, b)| a.conj() * b).sum()
    }
}

impl QuantumState for DensityMatrix {
    fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    fn expectation_unchecked(&self, observable: &CMatrix) -> C64 {
        // tr(ρO) = Σ_ij ρ_ij O_ji
        let dim = self.dim();
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..dim {
            for j in 0..dim {
                acc += self.entries[(i, j)] * observable[(j, i)];
            }
        }
        acc
    }
}

/// `⟨O⟩` for a Hermitian observable on the full register.
pub fn expectation<S: QuantumState>(state: &S, observable: &CMatrix) -> Result<f64, SimError> {
    let dim = 1usize << state.n_qubits();
    if observable.rows() != dim || observable.cols() != dim {
        return Err(SimError::DimensionMismatch {
            expected: dim,
            found: observable.rows(),
        });
    }
    let herm = observable.hermiticity_error();
    if herm > 1e-8 {
        return Err(SimError::NotHermitian(herm));
    }
    Ok(state.expectation_unchecked(observable).re)
}
