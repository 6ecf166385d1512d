//! Cyclic complex Jacobi eigensolver for Hermitian matrices.

use super::matrix::CMatrix;
use super::SimError;
use crate::C64;

const HERMITIAN_TOL: f64 = 1e-8;
const OFF_TOL: f64 = 1e-12;
const MAX_SWEEPS: usize = 100;

/// Eigenvalues in descending order with the matching unit eigenvectors as columns.
#[derive(Clone, Debug)]
pub struct Eigen {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

fn off_norm(a: &CMatrix) -> f64 {
    let n = a.rows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a[(i, j)].norm_sqr();
            }
        }
    }
    s.sqrt()
}

/// Full decomposition. The input is symmetrized as `(A + A†)/2` first.
pub fn hermitian_eigen(m: &CMatrix) -> Result<Eigen, SimError> {
    if !m.is_square() {
        return Err(SimError::DimensionMismatch {
            expected: m.rows(),
            found: m.cols(),
        });
    }
    let herm = m.hermiticity_error();
    if herm > HERMITIAN_TOL {
        return Err(SimError::NotHermitian(herm));
    }
    let n = m.rows();
    let half = C64::new(0.5, 0.0);
    let mut a = m.add(&m.adjoint()).scale(half);
    let mut v = CMatrix::identity(n);
    let scale = a.frobenius_norm().max(1.0);

    let mut converged = n <= 1;
    for _ in 0..MAX_SWEEPS {
        if off_norm(&a) < OFF_TOL * scale {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                rotate(&mut a, &mut v, p, q);
            }
        }
    }
    if !converged && off_norm(&a) >= OFF_TOL * scale {
        return Err(SimError::NoConvergence(MAX_SWEEPS));
    }

    let mut order: Vec<usize> = (0..n).collect();
    let diag: Vec<f64> = (0..n).map(|i| a[(i, i)].re).collect();
    order.sort_by(|&i, &j| diag[j].total_cmp(&diag[i]));
    let values = order.iter().map(|&i| diag[i]).collect();
    let vectors = CMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    Ok(Eigen { values, vectors })
}

/// Zeroes `a[p][q]` with a unitary plane rotation, `A ← G†AG`, `V ← VG`.
fn rotate(a: &mut CMatrix, v: &mut CMatrix, p: usize, q: usize) {
    let apq = a[(p, q)];
    let mag = apq.norm();
    if mag < 1e-300 {
        return;
    }
    let phase = apq / mag;
    let app = a[(p, p)].re;
    let aqq = a[(q, q)].re;
    let tau = (aqq - app) / (2.0 * mag);
    let t = if tau >= 0.0 {
        1.0 / (tau + (1.0 + tau * tau).sqrt())
    } else {
        -1.0 / (-tau + (1.0 + tau * tau).sqrt())
    };
    let c = 1.0 / (1.0 + t * t).sqrt();
    let s = t * c;
    let n = a.rows();
    let g_pp = C64::new(c, 0.0);
    let g_pq = C64::new(s, 0.0);
    let g_qp = -phase.conj() * s;
    let g_qq = phase.conj() * c;

    // columns: A ← A G
    for k in 0..n {
        let akp = a[(k, p)];
        let akq = a[(k, q)];
        a[(k, p)] = akp * g_pp + akq * g_qp;
        a[(k, q)] = akp * g_pq + akq * g_qq;
    }
    // rows: A ← G† A
    for k in 0..n {
        let apk = a[(p, k)];
        let aqk = a[(q, k)];
        a[(p, k)] = g_pp.conj() * apk + g_qp.conj() * aqk;
        a[(q, k)] = g_pq.conj() * apk + g_qq.conj() * aqk;
    }
    a[(p, q)] = C64::new(0.0, 0.0);
    a[(q, p)] = C64::new(0.0, 0.0);
    a[(p, p)] = C64::new(a[(p, p)].re, 0.0);
    a[(q, q)] = C64::new(a[(q, q)].re, 0.0);
    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = vkp * g_pp + vkq * g_qp;
        v[(k, q)] = vkp * g_pq + vkq * g_qq;
    }
}

/// Eigenvalues only, descending.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Result<Vec<f64>, SimError> {
    hermitian_eigen(m).map(|e| e.values)
}

/// `‖A‖₁ = Σ|λ_i|` for Hermitian `A`.
pub fn trace_norm_hermitian(m: &CMatrix) -> Result<f64, SimError> {
    Ok(hermitian_eigenvalues(m)?.iter().map(|l| l.abs()).sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn diagonal_sorted() {
        let m = CMatrix::diagonal(&[c(3.0, 0.0), c(1.0, 0.0), c(2.0, 0.0)]);
        assert_eq!(hermitian_eigenvalues(&m).unwrap(), vec![3.0, 2.0, 1.0]);
    }

    #[test]
    fn pauli_x() {
        let m = CMatrix::from_real_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]);
        let ev = hermitian_eigenvalues(&m).unwrap();
        assert!((ev[0] - 1.0).abs() < 1e-14 && (ev[1] + 1.0).abs() < 1e-14);
    }

    #[test]
    fn complex_pauli_y_vectors() {
        let m = CMatrix::from_rows(&[vec![c(0.0, 0.0), c(0.0, -1.0)], vec![c(0.0, 1.0), c(0.0, 0.0)]]);
        let e = hermitian_eigen(&m).unwrap();
        let recon = e
            .vectors
            .matmul(&CMatrix::diagonal(&e.values.iter().map(|&x| c(x, 0.0)).collect::<Vec<_>>()))
            .matmul(&e.vectors.adjoint());
        assert!(recon.max_abs_diff(&m) < 1e-12);
    }

    #[test]
    fn rejects_non_hermitian() {
        let m = CMatrix::from_real_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]]);
        assert!(matches!(hermitian_eigenvalues(&m), Err(SimError::NotHermitian(_))));
    }
}
