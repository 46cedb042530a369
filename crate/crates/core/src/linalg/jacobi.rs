//! Cyclic Jacobi eigensolver for small dense symmetric matrices.
//!
//! Self-contained reference implementation with the same interface as the
//! production LAPACK-backed path in [`super::eigen`]; tests use it as an
//! independent cross-check. Sizes are at most a few hundred, where Jacobi's
//! O(n^3) per sweep is tolerable and its accuracy (eigenvalues to machine
//! precision relative to the norm) matches what the trackers need.

use super::{check_symmetric, LinalgError};
use ndarray::{Array1, Array2};

const MAX_SWEEPS: usize = 60;
/// Off-diagonal Frobenius mass below this multiple of the matrix norm counts
/// as diagonalized.
const OFF_TOL: f64 = 1e-14;

fn jacobi_inner(
    a: &Array2<f64>,
    want_vectors: bool,
) -> Result<(Array1<f64>, Option<Array2<f64>>), LinalgError> {
    check_symmetric(a)?;
    let n = a.nrows();
    // Work on the symmetrized copy so tiny input asymmetry cannot bias sweeps.
    let mut m = Array2::from_shape_fn((n, n), |(i, j)| 0.5 * (a[[i, j]] + a[[j, i]]));
    let mut v = want_vectors.then(|| Array2::<f64>::eye(n));
    let frob = m.iter().map(|x| x * x).sum::<f64>().sqrt();
    if frob == 0.0 {
        return Ok((Array1::zeros(n), v));
    }

    let mut converged = false;
    for _sweep in 0..MAX_SWEEPS {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += m[[p, q]] * m[[p, q]];
            }
        }
        if (2.0 * off).sqrt() <= OFF_TOL * frob {
            converged = true;
            break;
        }
        for p in 0..(n - 1) {
            for q in (p + 1)..n {
                let apq = m[[p, q]];
                if apq == 0.0 {
                    continue;
                }
                let app = m[[p, p]];
                let aqq = m[[q, q]];
                let tau = (aqq - app) / (2.0 * apq);
                let t = if tau == 0.0 {
                    1.0
                } else {
                    tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;

                m[[p, p]] = app - t * apq;
                m[[q, q]] = aqq + t * apq;
                m[[p, q]] = 0.0;
                m[[q, p]] = 0.0;
                for i in 0..n {
                    if i == p || i == q {
                        continue;
                    }
                    let aip = m[[i, p]];
                    let aiq = m[[i, q]];
                    m[[i, p]] = c * aip - s * aiq;
                    m[[p, i]] = m[[i, p]];
                    m[[i, q]] = s * aip + c * aiq;
                    m[[q, i]] = m[[i, q]];
                }
                if let Some(v) = v.as_mut() {
                    for i in 0..n {
                        let vip = v[[i, p]];
                        let viq = v[[i, q]];
                        v[[i, p]] = c * vip - s * viq;
                        v[[i, q]] = s * vip + c * viq;
                    }
                }
            }
        }
    }
    if !converged {
        return Err(LinalgError::NoConvergence {
            iterations: MAX_SWEEPS,
        });
    }

    // Sort eigenpairs by descending eigenvalue.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[[j, j]].partial_cmp(&m[[i, i]]).unwrap());
    let values = Array1::from_iter(order.iter().map(|&i| m[[i, i]]));
    let vectors = v.map(|v| {
        let mut out = Array2::zeros((n, n));
        for (col_out, &col_in) in order.iter().enumerate() {
            out.column_mut(col_out).assign(&v.column(col_in));
        }
        out
    });
    Ok((values, vectors))
}

/// Full eigendecomposition of a symmetric matrix.
///
/// Returns eigenvalues in descending order and the matching orthonormal
/// eigenvector columns.
pub fn sym_eigen(a: &Array2<f64>) -> Result<(Array1<f64>, Array2<f64>), LinalgError> {
    let (values, vectors) = jacobi_inner(a, true)?;
    Ok((values, vectors.expect("vectors requested")))
}

/// Eigenvalues only (descending), skipping eigenvector accumulation.
pub fn sym_eigenvalues(a: &Array2<f64>) -> Result<Array1<f64>, LinalgError> {
    Ok(jacobi_inner(a, false)?.0)
}

/// Largest eigenvalue of a symmetric matrix.
///
/// # Errors
/// [`LinalgError::NotSymmetric`] if `max |a - a'|` exceeds `1e-8 * (1 + max |a|)`,
/// [`LinalgError::DimensionMismatch`] if `a` is not square.
pub fn lambda_max_sym(a: &Array2<f64>) -> Result<f64, LinalgError> {
    let values = sym_eigenvalues(a)?;
    Ok(values[0])
}
