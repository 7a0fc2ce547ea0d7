//! Dense complex eigendecomposition for small non-Hermitian matrices.
//!
//! The Schur form comes from nalgebra's shifted QR iteration; eigenvectors
//! are recovered by back substitution on the triangular factor. Triangular
//! inputs skip the iteration entirely so their spectrum is exactly the
//! diagonal.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EigenError {
    #[error("QR iteration did not converge for a {dim}x{dim} matrix")]
    NoConvergence { dim: usize },
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
}

/// Right eigenpairs; each vector has unit Euclidean norm.
#[derive(Debug, Clone, PartialEq)]
pub struct Eigen {
    pub values: Vec<Complex64>,
    pub vectors: Vec<Vec<Complex64>>,
}

const MAX_ITERATIONS: usize = 10_000;

pub fn eigen(matrix: &DMatrix<Complex64>) -> Result<Eigen, EigenError> {
    let (rows, cols) = matrix.shape();
    if rows != cols {
        return Err(EigenError::NotSquare { rows, cols });
    }
    let n = rows;
    if n == 0 {
        return Ok(Eigen { values: Vec::new(), vectors: Vec::new() });
    }
    let scale = matrix.iter().map(|z| z.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);

    if is_upper_triangular(matrix) {
        let values = (0..n).map(|k| matrix[(k, k)]).collect::<Vec<_>>();
        let vectors = (0..n).map(|k| upper_eigenvector(matrix, k, scale)).collect();
        return Ok(Eigen { values, vectors });
    }
    if is_lower_triangular(matrix) {
        let values = (0..n).map(|k| matrix[(k, k)]).collect::<Vec<_>>();
        let vectors = (0..n).map(|k| lower_eigenvector(matrix, k, scale)).collect();
        return Ok(Eigen { values, vectors });
    }

    let schur = nalgebra::Schur::try_new(matrix.clone(), f64::EPSILON, MAX_ITERATIONS)
        .ok_or(EigenError::NoConvergence { dim: n })?;
    let (q, t) = schur.unpack();
    let values = (0..n).map(|k| t[(k, k)]).collect::<Vec<_>>();
    let vectors = (0..n)
        .map(|k| {
            let y = upper_eigenvector(&t, k, scale);
            let mut v = vec![Complex64::new(0.0, 0.0); n];
            for (i, vi) in v.iter_mut().enumerate() {
                for (j, yj) in y.iter().enumerate().take(k + 1) {
                    *vi += q[(i, j)] * yj;
                }
            }
            normalize(&mut v);
            v
        })
        .collect();
    Ok(Eigen { values, vectors })
}

/// Eigenpairs of the conjugate transpose, i.e. left eigenvectors `y` with
/// `yᴴ A = λ yᴴ`. The returned values are those of `A` (conjugated back).
pub fn left_eigen(matrix: &DMatrix<Complex64>) -> Result<Eigen, EigenError> {
    let mut adj = eigen(&matrix.adjoint())?;
    for v in adj.values.iter_mut() {
        *v = v.conj();
    }
    Ok(adj)
}

fn is_upper_triangular(m: &DMatrix<Complex64>) -> bool {
    let n = m.nrows();
    (0..n).all(|i| (0..i).all(|j| m[(i, j)] == Complex64::new(0.0, 0.0)))
}

fn is_lower_triangular(m: &DMatrix<Complex64>) -> bool {
    let n = m.nrows();
    (0..n).all(|i| (i + 1..n).all(|j| m[(i, j)] == Complex64::new(0.0, 0.0)))
}

/// Guards `λ_j − λ_k` against exact degeneracy (defective Jordan pairs).
fn guarded(den: Complex64, scale: f64) -> Complex64 {
    let floor = f64::EPSILON * scale;
    if den.norm() < floor {
        Complex64::new(floor, 0.0)
    } else {
        den
    }
}

fn upper_eigenvector(t: &DMatrix<Complex64>, k: usize, scale: f64) -> Vec<Complex64> {
    let n = t.nrows();
    let lambda = t[(k, k)];
    let mut y = vec![Complex64::new(0.0, 0.0); n];
    y[k] = Complex64::new(1.0, 0.0);
    for j in (0..k).rev() {
        let mut acc = Complex64::new(0.0, 0.0);
        for l in j + 1..=k {
            acc += t[(j, l)] * y[l];
        }
        y[j] = -acc / guarded(t[(j, j)] - lambda, scale);
    }
    normalize(&mut y);
    y
}

fn lower_eigenvector(m: &DMatrix<Complex64>, k: usize, scale: f64) -> Vec<Complex64> {
    let n = m.nrows();
    let lambda = m[(k, k)];
    let mut y = vec![Complex64::new(0.0, 0.0); n];
    y[k] = Complex64::new(1.0, 0.0);
    for j in k + 1..n {
        let mut acc = Complex64::new(0.0, 0.0);
        for l in k..j {
            acc += m[(j, l)] * y[l];
        }
        y[j] = -acc / guarded(m[(j, j)] - lambda, scale);
    }
    normalize(&mut y);
    y
}

pub(crate) fn normalize(v: &mut [Complex64]) {
    let norm = libm::sqrt(v.iter().map(|z| z.norm_sqr()).sum::<f64>());
    if norm > 0.0 {
        for z in v.iter_mut() {
            *z /= norm;
        }
    }
}
