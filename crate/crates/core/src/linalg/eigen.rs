//! Symmetric eigendecomposition for small dense matrices, backed by the
//! LAPACK `dsyev` routine exported by the linked OpenBLAS.
//!
//! This is the production eigensolver for Rayleigh-Ritz projections inside
//! the block power SVD, principal-angle computations, and the detection
//! statistic. The hand-rolled cyclic Jacobi solver in [`super::jacobi`] keeps
//! the same interface and serves as an independent cross-check in tests.

use super::{check_symmetric, LinalgError};
use ndarray::{Array1, Array2};
use std::os::raw::{c_char, c_int};

extern "C" {
    // Fortran LAPACK symbol (column-major), provided by the linked OpenBLAS.
    fn dsyev_(
        jobz: *const c_char,
        uplo: *const c_char,
        n: *const c_int,
        a: *mut f64,
        lda: *const c_int,
        w: *mut f64,
        work: *mut f64,
        lwork: *const c_int,
        info: *mut c_int,
    );
}

fn dsyev(
    a: &Array2<f64>,
    want_vectors: bool,
) -> Result<(Array1<f64>, Option<Array2<f64>>), LinalgError> {
    check_symmetric(a)?;
    let n = a.nrows();
    if n == 0 {
        return Ok((
            Array1::zeros(0),
            want_vectors.then(|| Array2::zeros((0, 0))),
        ));
    }
    // Symmetrized copy so tiny input asymmetry cannot bias the result. A
    // symmetric buffer reads the same in row- and column-major order, so it
    // can be handed to Fortran LAPACK directly.
    let mut buf: Vec<f64> = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            buf.push(0.5 * (a[[i, j]] + a[[j, i]]));
        }
    }
    let mut w = vec![0.0_f64; n];
    let jobz = if want_vectors { b'V' } else { b'N' } as c_char;
    let uplo = b'L' as c_char;
    let nn = n as c_int;
    let mut info: c_int = 0;

    // Workspace query, then the real call.
    let mut wkopt = 0.0_f64;
    let query: c_int = -1;
    unsafe {
        dsyev_(
            &jobz,
            &uplo,
            &nn,
            buf.as_mut_ptr(),
            &nn,
            w.as_mut_ptr(),
            &mut wkopt,
            &query,
            &mut info,
        );
    }
    if info == 0 {
        let lwork = (wkopt as usize).max(3 * n).max(1);
        let mut work = vec![0.0_f64; lwork];
        let lw = lwork as c_int;
        unsafe {
            dsyev_(
                &jobz,
                &uplo,
                &nn,
                buf.as_mut_ptr(),
                &nn,
                w.as_mut_ptr(),
                work.as_mut_ptr(),
                &lw,
                &mut info,
            );
        }
    }
    if info < 0 {
        return Err(LinalgError::DimensionMismatch(format!(
            "invalid argument {} passed to dsyev",
            -info
        )));
    }
    if info > 0 {
        return Err(LinalgError::NoConvergence {
            iterations: info as usize,
        });
    }

    // LAPACK returns eigenvalues ascending; flip to descending.
    let values = Array1::from_iter(w.iter().rev().copied());
    let vectors = want_vectors.then(|| {
        // Eigenvector k sits in column-major column k: buf[k*n..(k+1)*n].
        let mut out = Array2::zeros((n, n));
        for k in 0..n {
            let src = &buf[k * n..(k + 1) * n];
            let mut col = out.column_mut(n - 1 - k);
            for (dst, &v) in col.iter_mut().zip(src) {
                *dst = v;
            }
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
    let (values, vectors) = dsyev(a, true)?;
    Ok((values, vectors.expect("vectors requested")))
}

/// Eigenvalues only (descending), skipping eigenvector accumulation.
pub fn sym_eigenvalues(a: &Array2<f64>) -> Result<Array1<f64>, LinalgError> {
    Ok(dsyev(a, false)?.0)
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

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    #[test]
    fn diagonal_and_zero_matrices() {
        let d = Array2::from_diag(&array![3.0, -1.0, 7.0, 0.5]);
        assert_abs_diff_eq!(lambda_max_sym(&d).unwrap(), 7.0, epsilon = 1e-14);
        let z = Array2::<f64>::zeros((5, 5));
        assert_abs_diff_eq!(lambda_max_sym(&z).unwrap(), 0.0, epsilon = 1e-300);
    }

    #[test]
    fn two_by_two_closed_form() {
        let (a, b, c) = (2.0_f64, 0.7, -1.0);
        let m = array![[a, b], [b, c]];
        let disc = (((a - c) / 2.0).powi(2) + b * b).sqrt();
        let (values, vectors) = sym_eigen(&m).unwrap();
        assert_abs_diff_eq!(values[0], (a + c) / 2.0 + disc, epsilon = 1e-14);
        assert_abs_diff_eq!(values[1], (a + c) / 2.0 - disc, epsilon = 1e-14);
        for k in 0..2 {
            let v = vectors.column(k).to_owned();
            let mv = m.dot(&v);
            for i in 0..2 {
                assert_abs_diff_eq!(mv[i], values[k] * v[i], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn matches_jacobi_reference_on_random_gram() {
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = crate::seeds::rng_for(8, 97);
        let g = Array2::from_shape_fn((30, 14), |_| -> f64 { StandardNormal.sample(&mut rng) });
        let m = g.dot(&g.t()) / 14.0; // 30x30 PSD, rank 14
        let (values, vectors) = sym_eigen(&m).unwrap();
        let reference = super::super::jacobi::sym_eigenvalues(&m).unwrap();
        for (a, b) in values.iter().zip(reference.iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-11);
        }
        // Orthonormal columns and V D V' = M.
        let vv = vectors.t().dot(&vectors);
        for i in 0..30 {
            for j in 0..30 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(vv[[i, j]], want, epsilon = 1e-12);
            }
        }
        let recon = vectors.dot(&Array2::from_diag(&values)).dot(&vectors.t());
        let err = (&recon - &m).iter().map(|x| x.abs()).fold(0.0_f64, f64::max);
        assert!(err <= 1e-10, "reconstruction error {err}");
    }

    #[test]
    fn rejects_asymmetric_input() {
        let m = array![[1.0, 2.0], [0.0, 1.0]];
        assert!(matches!(lambda_max_sym(&m), Err(LinalgError::NotSymmetric)));
        let rect = Array2::<f64>::zeros((2, 3));
        assert!(matches!(
            lambda_max_sym(&rect),
            Err(LinalgError::DimensionMismatch(_))
        ));
    }
}
