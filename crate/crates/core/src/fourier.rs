//! Fourier spectra of embedded states.
//!
//! Data-encoding circuits are brought to the normal form
//! `V_L · D_L(x) · V_{L-1} ⋯ D_1(x) · V_0`, where each `V` is a fixed unitary and each
//! `D_l(x) = diag(exp(i h_l(k)·x))` is diagonal with phases linear in the input. The
//! amplitudes of `U(x)|0…0⟩` are then finite Fourier sums
//!
//! ```text
//! ⟨i|U(x)|0⟩ = Σ_{k_1..k_L} (V_L)_{i k_L} ⋯ (V_1)_{k_2 k_1} (V_0)_{k_1 0} · exp(i Σ_l h_l(k_l)·x)
//! ```
//!
//! Two routes compute the spectrum: [`enumerate_spectrum`] walks every index tuple;
//! [`amplitude_spectra`] merges equal frequencies layer by layer and scales to circuits
//! whose tuple space is out of reach. Global phase is kept, so reconstructions
//! match simulated amplitudes exactly.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::embeddings::{EmbeddingError, EmbeddingSpec, FeatureMapKind};
use crate::qsim::{circuit_unitary, CMatrix, GateKind, GateOp, SimError};
use crate::C64;

/// Largest `n·L` accepted by [`enumerate_spectrum`].
pub const MAX_ENUMERATION_BITS: usize = 16;
/// Largest number of distinct frequencies tracked by [`amplitude_spectra`].
pub const MAX_FREQUENCIES: usize = 1 << 16;
pub const MAX_FOURIER_QUBITS: usize = 8;
/// Frequencies closer than this in every component are merged.
pub const FREQUENCY_TOL: f64 = 1e-12;
/// Coefficients below this are treated as cancelled when counting frequencies.
pub const COEFF_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FourierError {
    #[error("{n_qubits} qubits × {layers} layers exceeds the enumeration guard of {MAX_ENUMERATION_BITS}")]
    GuardExceeded { n_qubits: usize, layers: usize },
    #[error("spectrum exceeds {MAX_FREQUENCIES} distinct frequencies")]
    TooManyFrequencies,
    #[error("{0} qubits exceeds the limit of {MAX_FOURIER_QUBITS}")]
    TooManyQubits(usize),
    #[error("expected {expected} input components, got {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("amplitude index {index} out of range for dimension {dim}")]
    AmplitudeOutOfRange { index: usize, dim: usize },
    #[error("invalid layout: {0}")]
    Layout(String),
    #[error("gate `{0}` has no fixed diagonalizing basis")]
    NonDecomposable(&'static str),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
}

/// Diagonal encoding layer: `h[k]` is the frequency vector picked up on basis state `k`.
#[derive(Clone, Debug, PartialEq)]
pub struct EncodingLayer {
    pub h: Vec<Vec<f64>>,
}

impl EncodingLayer {
    fn zero(dim: usize, input_dim: usize) -> Self {
        Self {
            h: vec![vec![0.0; input_dim]; dim],
        }
    }

    /// `Π_q RZ_q(x_{assign[q]})`: `h[k]_c = Σ_{q: assign[q]=c} ±½`, negative where qubit
    /// `q` of `k` is 0.
    pub fn from_assignment(n_qubits: usize, input_dim: usize, assign: &[usize]) -> Result<Self, FourierError> {
        if assign.len() != n_qubits {
            return Err(FourierError::Layout(format!(
                "assignment covers {} qubits, expected {n_qubits}",
                assign.len()
            )));
        }
        if let Some(&c) = assign.iter().find(|&&c| c >= input_dim) {
            return Err(FourierError::Layout(format!("component {c} out of range for {input_dim} inputs")));
        }
        let dim = 1 << n_qubits;
        let mut layer = Self::zero(dim, input_dim);
        for (k, row) in layer.h.iter_mut().enumerate() {
            for (q, &c) in assign.iter().enumerate() {
                let bit = (k >> (n_qubits - 1 - q)) & 1;
                row[c] += if bit == 0 { -0.5 } else { 0.5 };
            }
        }
        Ok(layer)
    }
}

/// Normal form of an encoding circuit. `interleavers[0]` acts first and
/// `interleavers[l]` follows layer `l`.
#[derive(Clone, Debug, PartialEq)]
pub struct EncodingLayout {
    pub n_qubits: usize,
    pub input_dim: usize,
    pub interleavers: Vec<CMatrix>,
    pub layers: Vec<EncodingLayer>,
}

fn lift(local: &CMatrix, targets: &[usize], n: usize) -> Result<CMatrix, FourierError> {
    Ok(circuit_unitary(&[GateOp::unitary(local.clone(), targets.to_vec())?], n)?)
}

fn off_diagonal(m: &CMatrix) -> f64 {
    let d = m.rows();
    let mut worst: f64 = 0.0;
    for i in 0..d {
        for j in 0..d {
            if i != j {
                worst = worst.max(m.as_slice()[i * d + j].norm());
            }
        }
    }
    worst
}

/// Fixed local basis `V` with `V† G(φ) V` diagonal for every angle `φ`.
fn diagonalizer(kind: &GateKind) -> Result<Vec<GateOp>, FourierError> {
    // Gates in time order; `S·H` maps Z to Y, `H` maps Z to X.
    let sh = |q: usize| vec![GateOp::h(q), GateOp::fixed(GateKind::S, vec![q])];
    Ok(match kind {
        GateKind::Rz | GateKind::Rzz | GateKind::Crz => vec![],
        GateKind::Rx => vec![GateOp::h(0)],
        GateKind::Ry => sh(0),
        GateKind::Rxx => vec![GateOp::h(0), GateOp::h(1)],
        GateKind::Ryy => [sh(0), sh(1)].concat(),
        GateKind::Crx => vec![GateOp::h(1)],
        GateKind::Cry => sh(1),
        other => return Err(FourierError::NonDecomposable(other.label())),
    })
}

/// `(V, η)` with `G(φ) = V diag(exp(i η φ)) V†` on the gate's local qubits.
fn decompose_rotation(kind: &GateKind) -> Result<(CMatrix, Vec<f64>), FourierError> {
    let m = kind.arity();
    let v = circuit_unitary(&diagonalizer(kind)?, m)?;
    let local: Vec<usize> = (0..m).collect();
    let at = |phi: f64| {
        let g = GateOp::rotation(kind.clone(), local.clone(), phi).matrix();
        v.adjoint().matmul(&g).matmul(&v)
    };
    let d1 = at(1.0);
    if off_diagonal(&d1) > 1e-12 {
        return Err(FourierError::NonDecomposable(kind.label()));
    }
    let dim = 1 << m;
    let eta: Vec<f64> = (0..dim).map(|k| d1.as_slice()[k * dim + k].arg()).collect();
    // A second angle rules out a basis that only happens to work at φ = 1.
    let d2 = at(0.7);
    for (k, e) in eta.iter().enumerate() {
        if (d2.as_slice()[k * dim + k] - C64::from_polar(1.0, 0.7 * e)).norm() > 1e-12 {
            return Err(FourierError::NonDecomposable(kind.label()));
        }
    }
    Ok((v, eta))
}

impl EncodingLayout {
    pub fn new(
        n_qubits: usize,
        input_dim: usize,
        interleavers: Vec<CMatrix>,
        layers: Vec<EncodingLayer>,
    ) -> Result<Self, FourierError> {
        if n_qubits == 0 || n_qubits > MAX_FOURIER_QUBITS {
            return Err(FourierError::TooManyQubits(n_qubits));
        }
        let dim = 1 << n_qubits;
        if interleavers.len() != layers.len() + 1 {
            return Err(FourierError::Layout(format!(
                "{} layers need {} interleavers, got {}",
                layers.len(),
                layers.len() + 1,
                interleavers.len()
            )));
        }
        for w in &interleavers {
            if w.rows() != dim || w.cols() != dim {
                return Err(FourierError::Layout(format!("interleaver is {}x{}, expected {dim}x{dim}", w.rows(), w.cols())));
            }
            if !w.is_unitary(1e-10) {
                return Err(SimError::NonUnitary(w.unitarity_error()).into());
            }
        }
        for l in &layers {
            if l.h.len() != dim || l.h.iter().any(|r| r.len() != input_dim) {
                return Err(FourierError::Layout(format!("layer table must be {dim}x{input_dim}")));
            }
        }
        Ok(Self {
            n_qubits,
            input_dim,
            interleavers,
            layers,
        })
    }

    /// Layout with `RZ(x_c)` encodings: `assignments[l][q]` is the input component on
    /// qubit `q` in layer `l`.
    pub fn from_assignments(
        n_qubits: usize,
        input_dim: usize,
        interleavers: Vec<CMatrix>,
        assignments: &[Vec<usize>],
    ) -> Result<Self, FourierError> {
        let layers = assignments
            .iter()
            .map(|a| EncodingLayer::from_assignment(n_qubits, input_dim, a))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(n_qubits, input_dim, interleavers, layers)
    }

    /// Normal form of a gate list whose bound angles read from an input of length
    /// `input_dim`. Each bound rotation is rotated into its diagonal basis; the
    /// basis changes join the neighbouring fixed gates. Consecutive diagonal factors
    /// share a layer.
    pub fn from_gates(gates: &[GateOp], n_qubits: usize, input_dim: usize) -> Result<Self, FourierError> {
        if n_qubits == 0 || n_qubits > MAX_FOURIER_QUBITS {
            return Err(FourierError::TooManyQubits(n_qubits));
        }
        let dim = 1usize << n_qubits;
        let mut interleavers = Vec::new();
        let mut layers: Vec<EncodingLayer> = Vec::new();
        let mut pending = CMatrix::identity(dim);
        for g in gates {
            let Some(b) = g.binding else {
                pending = lift(&g.matrix(), &g.targets, n_qubits)?.matmul(&pending);
                continue;
            };
            if b.index >= input_dim {
                return Err(SimError::BindingOutOfRange {
                    index: b.index,
                    n_params: input_dim,
                }
                .into());
            }
            let (v, eta) = decompose_rotation(&g.kind)?;
            pending = lift(&v.adjoint(), &g.targets, n_qubits)?.matmul(&pending);
            // A diagonal interleaver commutes with the new factor, so the factor can
            // join the open layer.
            if layers.is_empty() || off_diagonal(&pending) > 1e-12 {
                interleavers.push(std::mem::replace(&mut pending, CMatrix::identity(dim)));
                layers.push(EncodingLayer::zero(dim, input_dim));
            }
            let layer = layers.last_mut().expect("layer opened above");
            let m = g.targets.len();
            for (k, row) in layer.h.iter_mut().enumerate() {
                let local = g
                    .targets
                    .iter()
                    .enumerate()
                    .map(|(j, &q)| ((k >> (n_qubits - 1 - q)) & 1) << (m - 1 - j))
                    .sum::<usize>();
                row[b.index] += eta[local] * b.scale;
            }
            pending = lift(&v, &g.targets, n_qubits)?.matmul(&pending);
        }
        interleavers.push(pending);
        Self::new(n_qubits, input_dim, interleavers, layers)
    }

    pub fn for_embedding(kind: FeatureMapKind, n_qubits: usize) -> Result<Self, FourierError> {
        let spec = EmbeddingSpec::new(kind, n_qubits)?;
        let p = spec.param_count();
        Self::from_gates(&spec.build(&vec![0.0; p])?, n_qubits, p)
    }

    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    fn check_input(&self, x: &[f64]) -> Result<(), FourierError> {
        if x.len() != self.input_dim {
            return Err(FourierError::LengthMismatch {
                expected: self.input_dim,
                found: x.len(),
            });
        }
        Ok(())
    }

    fn check_amplitude(&self, index: usize) -> Result<(), FourierError> {
        if index >= self.dim() {
            return Err(FourierError::AmplitudeOutOfRange { index, dim: self.dim() });
        }
        Ok(())
    }

    /// `U(x)|0…0⟩` by multiplying out the normal form.
    pub fn simulate(&self, x: &[f64]) -> Result<Vec<C64>, FourierError> {
        self.check_input(x)?;
        let mut v = self.interleavers[0].column(0);
        for (layer, w) in self.layers.iter().zip(&self.interleavers[1..]) {
            for (a, h) in v.iter_mut().zip(&layer.h) {
                *a *= C64::from_polar(1.0, dot(h, x));
            }
            v = w.matvec(&v);
        }
        Ok(v)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p * q).sum()
}

/// One term `c · exp(i h·x)` of an amplitude's Fourier sum.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectrumEntry {
    pub h: Vec<f64>,
    pub coefficient: C64,
}

/// One entry per index tuple `(k_1..k_L)`, in lexicographic tuple order, for amplitude
/// `amplitude`. Frequencies are not merged.
pub fn enumerate_spectrum(layout: &EncodingLayout, amplitude: usize) -> Result<Vec<SpectrumEntry>, FourierError> {
    layout.check_amplitude(amplitude)?;
    let (n, l) = (layout.n_qubits, layout.layers.len());
    if n * l > MAX_ENUMERATION_BITS {
        return Err(FourierError::GuardExceeded { n_qubits: n, layers: l });
    }
    let dim = layout.dim();
    let total = 1usize << (n * l);
    let w = &layout.interleavers;
    let entry = |t: usize| {
        // Digit l-1 (most significant) is k_1.
        let k = |layer: usize| (t >> (n * (l - 1 - layer))) & (dim - 1);
        let mut h = vec![0.0; layout.input_dim];
        let mut c = if l == 0 {
            w[0].as_slice()[amplitude * dim]
        } else {
            w[0].as_slice()[k(0) * dim]
        };
        for layer in 0..l {
            for (hc, v) in h.iter_mut().zip(&layout.layers[layer].h[k(layer)]) {
                *hc += v;
            }
            let row = if layer + 1 == l { amplitude } else { k(layer + 1) };
            c *= w[layer + 1].as_slice()[row * dim + k(layer)];
        }
        SpectrumEntry { h, coefficient: c }
    };
    Ok((0..total).into_par_iter().map(entry).collect())
}

fn freq_key(h: &[f64]) -> Vec<i64> {
    h.iter().map(|v| (v / FREQUENCY_TOL).round() as i64).collect()
}

/// Sums coefficients of equal frequencies; output sorted by frequency.
pub fn merge_spectrum(entries: &[SpectrumEntry]) -> Vec<SpectrumEntry> {
    let mut map: BTreeMap<Vec<i64>, SpectrumEntry> = BTreeMap::new();
    for e in entries {
        map.entry(freq_key(&e.h))
            .and_modify(|m| m.coefficient += e.coefficient)
            .or_insert_with(|| e.clone());
    }
    map.into_values().collect()
}

/// `Σ c · exp(i h·x)`.
pub fn reconstruct_amplitude(spectrum: &[SpectrumEntry], x: &[f64]) -> Result<C64, FourierError> {
    if let Some(e) = spectrum.iter().find(|e| e.h.len() != x.len()) {
        return Err(FourierError::LengthMismatch {
            expected: e.h.len(),
            found: x.len(),
        });
    }
    Ok(spectrum
        .iter()
        .map(|e| e.coefficient * C64::from_polar(1.0, dot(&e.h, x)))
        .sum())
}

/// Merged spectra of every amplitude, built layer by layer: each distinct partial
/// frequency carries the vector of coefficients over the current basis index.
/// Entries whose coefficients cancel below `1e-14` everywhere are dropped.
pub fn amplitude_spectra(layout: &EncodingLayout) -> Result<Vec<Vec<SpectrumEntry>>, FourierError> {
    let dim = layout.dim();
    let zero_h = vec![0.0; layout.input_dim];
    let mut front: BTreeMap<Vec<i64>, (Vec<f64>, Vec<C64>)> = BTreeMap::new();
    front.insert(freq_key(&zero_h), (zero_h, layout.interleavers[0].column(0)));
    for (layer, w) in layout.layers.iter().zip(&layout.interleavers[1..]) {
        let mut next: BTreeMap<Vec<i64>, (Vec<f64>, Vec<C64>)> = BTreeMap::new();
        for (h, vec) in front.values() {
            for (k, &a) in vec.iter().enumerate() {
                if a == C64::new(0.0, 0.0) {
                    continue;
                }
                let h2: Vec<f64> = h.iter().zip(&layer.h[k]).map(|(p, q)| p + q).collect();
                let slot = next
                    .entry(freq_key(&h2))
                    .or_insert_with(|| (h2, vec![C64::new(0.0, 0.0); dim]));
                slot.1[k] += a;
            }
            if next.len() > MAX_FREQUENCIES {
                return Err(FourierError::TooManyFrequencies);
            }
        }
        next.par_iter_mut().for_each(|(_, (_, v))| *v = w.matvec(v));
        next.retain(|_, (_, v)| v.iter().any(|c| c.norm() > 1e-14));
        front = next;
    }
    Ok((0..dim)
        .map(|i| {
            front
                .values()
                .map(|(h, v)| SpectrumEntry {
                    h: h.clone(),
                    coefficient: v[i],
                })
                .collect()
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct SpectralSummary {
    /// Distinct frequencies with a surviving coefficient in some amplitude.
    pub n_frequencies: usize,
    /// Distinct surviving frequencies per amplitude.
    pub per_amplitude: Vec<usize>,
    /// Largest `‖h‖₁` among surviving frequencies.
    pub max_degree: f64,
}

pub fn spectral_summary(layout: &EncodingLayout) -> Result<SpectralSummary, FourierError> {
    let spectra = amplitude_spectra(layout)?;
    let alive = |e: &SpectrumEntry| e.coefficient.norm() > COEFF_TOL;
    let per_amplitude = spectra.iter().map(|s| s.iter().filter(|e| alive(e)).count()).collect();
    let n_freq = spectra.first().map_or(0, Vec::len);
    let mut n_frequencies = 0;
    let mut max_degree: f64 = 0.0;
    for f in 0..n_freq {
        if spectra.iter().any(|s| alive(&s[f])) {
            n_frequencies += 1;
            max_degree = max_degree.max(spectra[0][f].h.iter().map(|v| v.abs()).sum());
        }
    }
    Ok(SpectralSummary {
        n_frequencies,
        per_amplitude,
        max_degree,
    })
}

pub fn spectrum_of_embedding(kind: FeatureMapKind, n_qubits: usize) -> Result<SpectralSummary, FourierError> {
    spectral_summary(&EncodingLayout::for_embedding(kind, n_qubits)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qsim::run_circuit;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn h1() -> CMatrix {
        circuit_unitary(&[GateOp::h(0)], 1).unwrap()
    }

    fn hrzh() -> EncodingLayout {
        EncodingLayout::from_assignments(1, 1, vec![h1(), h1()], &[vec![0]]).unwrap()
    }

    #[test]
    fn hadamard_sandwich_is_cosine() {
        let s = enumerate_spectrum(&hrzh(), 0).unwrap();
        assert_eq!(s.len(), 2);
        let mut hs: Vec<f64> = s.iter().map(|e| e.h[0]).collect();
        hs.sort_by(f64::total_cmp);
        assert_eq!(hs, vec![-0.5, 0.5]);
        for e in &s {
            assert!((e.coefficient - C64::new(0.5, 0.0)).norm() < 1e-15);
        }
        assert!((reconstruct_amplitude(&s, &[0.0]).unwrap() - C64::new(1.0, 0.0)).norm() < 1e-15);
        assert!(reconstruct_amplitude(&s, &[PI]).unwrap().norm() < 1e-15);
        for x in [0.3, 1.7, -2.2] {
            let z = reconstruct_amplitude(&s, &[x]).unwrap();
            assert!((z - C64::new((x / 2.0).cos(), 0.0)).norm() < 1e-14);
        }
    }

    #[test]
    fn identity_interleavers_leave_one_frequency() {
        let l = EncodingLayout::from_assignments(1, 1, vec![CMatrix::identity(2); 2], &[vec![0]]).unwrap();
        let merged: Vec<_> = merge_spectrum(&enumerate_spectrum(&l, 0).unwrap())
            .into_iter()
            .filter(|e| e.coefficient.norm() > COEFF_TOL)
            .collect();
        assert_eq!(merged.len(), 1);
        assert!((merged[0].coefficient.norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn tuple_count_is_two_to_the_n() {
        let l = EncodingLayout::for_embedding(FeatureMapKind::ZzUnit, 2).unwrap();
        assert_eq!(l.layers.len(), 1);
        assert_eq!(enumerate_spectrum(&l, 0).unwrap().len(), 4);
    }

    #[test]
    fn single_rz_has_two_frequencies() {
        let gates = [GateOp::h(0), GateOp::bound(GateKind::Rz, vec![0], &[0.0], 0, 1.0)];
        let l = EncodingLayout::from_gates(&gates, 1, 1).unwrap();
        assert_eq!(spectral_summary(&l).unwrap().n_frequencies, 2);
    }

    #[test]
    fn zz_unit_two_qubits_spectrum() {
        let l = EncodingLayout::for_embedding(FeatureMapKind::ZzUnit, 2).unwrap();
        assert_eq!(l.input_dim, 3);
        let s = merge_spectrum(&enumerate_spectrum(&l, 0).unwrap());
        assert!(s.len() <= 8);
        let sum = spectral_summary(&l).unwrap();
        assert_eq!(sum.per_amplitude[0], s.iter().filter(|e| e.coefficient.norm() > COEFF_TOL).count());
    }

    #[test]
    fn guard_and_errors() {
        let l = EncodingLayout::for_embedding(FeatureMapKind::NcxUnit, 4).unwrap();
        assert!(matches!(enumerate_spectrum(&l, 0), Err(FourierError::GuardExceeded { .. })));
        assert!(matches!(enumerate_spectrum(&hrzh(), 2), Err(FourierError::AmplitudeOutOfRange { .. })));
        let s = enumerate_spectrum(&hrzh(), 0).unwrap();
        assert!(reconstruct_amplitude(&s, &[0.0, 1.0]).is_err());
        let g = [GateOp::bound(GateKind::XxPlusYy { beta: 0.0 }, vec![0, 1], &[0.0], 0, 1.0)];
        assert!(matches!(EncodingLayout::from_gates(&g, 2, 1), Err(FourierError::NonDecomposable(_))));
        assert!(EncodingLayout::from_assignments(1, 1, vec![h1()], &[vec![0]]).is_err());
        assert!(EncodingLayout::from_assignments(2, 1, vec![CMatrix::identity(4); 2], &[vec![0]]).is_err());
        assert!(EncodingLayout::new(1, 1, vec![CMatrix::from_real_rows(&[vec![1.0, 1.0], vec![0.0, 1.0]])], vec![]).is_err());
    }

    #[test]
    fn every_rotation_kind_diagonalizes() {
        for k in [
            GateKind::Rx,
            GateKind::Ry,
            GateKind::Rz,
            GateKind::Rxx,
            GateKind::Ryy,
            GateKind::Rzz,
            GateKind::Crx,
            GateKind::Cry,
            GateKind::Crz,
        ] {
            let (_, eta) = decompose_rotation(&k).unwrap();
            assert!(eta.iter().all(|e| [0.0, 0.5, -0.5].iter().any(|v| (e - v).abs() < 1e-12)), "{k:?}: {eta:?}");
        }
    }

    #[test]
    fn stack_frequencies_are_sums_of_unit_frequencies() {
        for (unit, stack) in [
            (FeatureMapKind::ZzUnit, FeatureMapKind::ZzStack),
            (FeatureMapKind::NcxUnit, FeatureMapKind::NcStack),
        ] {
            let n = 2;
            let unit_l = EncodingLayout::for_embedding(unit, n).unwrap();
            let p = unit_l.input_dim;
            let support = |l: &EncodingLayout| -> Vec<Vec<i64>> {
                let sp = amplitude_spectra(l).unwrap();
                (0..sp[0].len())
                    .filter(|&f| sp.iter().any(|s| s[f].coefficient.norm() > COEFF_TOL))
                    .map(|f| freq_key(&sp[0][f].h))
                    .collect()
            };
            let unit_set = support(&unit_l);
            let stack_set = support(&EncodingLayout::for_embedding(stack, n).unwrap());
            let mut minkowski = std::collections::BTreeSet::new();
            for a in &unit_set {
                for b in &unit_set {
                    for c in &unit_set {
                        minkowski.insert([a.clone(), b.clone(), c.clone()].concat());
                    }
                }
            }
            assert!(stack_set.iter().all(|s| minkowski.contains(s)), "{stack}");
            assert!(stack_set.len() > unit_set.len());
            assert_eq!(stack_set[0].len(), 3 * p);
        }
    }

    fn all_small_layouts() -> Vec<(FeatureMapKind, EncodingLayout)> {
        FeatureMapKind::UNITS
            .iter()
            .map(|&k| (k, EncodingLayout::for_embedding(k, 2).unwrap()))
            .chain([FeatureMapKind::ZzStack, FeatureMapKind::NcStack].map(|k| (k, EncodingLayout::for_embedding(k, 2).unwrap())))
            .collect()
    }

    #[test]
    fn enumeration_and_merged_routes_agree() {
        for (k, l) in all_small_layouts() {
            if l.n_qubits * l.layers.len() > MAX_ENUMERATION_BITS {
                continue;
            }
            let dp = amplitude_spectra(&l).unwrap();
            for (i, dp_i) in dp.iter().enumerate() {
                let raw = merge_spectrum(&enumerate_spectrum(&l, i).unwrap());
                let live = |s: &[SpectrumEntry]| -> Vec<(Vec<i64>, C64)> {
                    s.iter().filter(|e| e.coefficient.norm() > COEFF_TOL).map(|e| (freq_key(&e.h), e.coefficient)).collect()
                };
                let (a, b) = (live(&raw), live(dp_i));
                assert_eq!(a.len(), b.len(), "{k} amplitude {i}");
                for ((ka, ca), (kb, cb)) in a.iter().zip(&b) {
                    assert_eq!(ka, kb);
                    assert!((ca - cb).norm() < 1e-12);
                }
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(50))]

        #[test]
        fn reconstruction_matches_simulation(x in proptest::collection::vec(-4.0f64..4.0, 24), pick in 0usize..9) {
            let layouts = all_small_layouts();
            let (kind, l) = &layouts[pick % layouts.len()];
            let x = &x[..l.input_dim];
            let spec = EmbeddingSpec::new(*kind, l.n_qubits).unwrap();
            let direct = run_circuit(&spec.build(x).unwrap(), l.n_qubits).unwrap();
            let spectra = amplitude_spectra(l).unwrap();
            let mut norm = 0.0;
            for (i, s) in spectra.iter().enumerate() {
                let z = reconstruct_amplitude(s, x).unwrap();
                prop_assert!((z - direct.amplitudes()[i]).norm() < 1e-9, "{} amplitude {}", kind, i);
                norm += z.norm_sqr();
            }
            prop_assert!((norm - 1.0).abs() < 1e-9);
            let sim = l.simulate(x).unwrap();
            for (a, b) in sim.iter().zip(direct.amplitudes()) {
                prop_assert!((a - b).norm() < 1e-10);
            }
        }

        #[test]
        fn merging_preserves_value(x in -4.0f64..4.0, y in -4.0f64..4.0, z in -4.0f64..4.0, amp in 0usize..4) {
            let l = EncodingLayout::for_embedding(FeatureMapKind::ZzUnit, 2).unwrap();
            let raw = enumerate_spectrum(&l, amp).unwrap();
            let merged = merge_spectrum(&raw);
            let p = [x, y, z];
            let a = reconstruct_amplitude(&raw, &p).unwrap();
            let b = reconstruct_amplitude(&merged, &p).unwrap();
            prop_assert!((a - b).norm() < 1e-12);
        }
    }
}
