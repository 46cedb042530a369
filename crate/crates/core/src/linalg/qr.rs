//! Economy-size orthonormal factor of a tall matrix via LAPACK Householder
//! QR (`dgeqrf` + `dorgqr`), used inside the block power SVD.
//!
//! Householder QR returns orthonormal columns for any input, including
//! rank-deficient blocks: collapsed directions come back as arbitrary
//! orthonormal completions, which is exactly what an oversampled iteration
//! block needs.

use super::LinalgError;
use ndarray::Array2;
use std::os::raw::c_int;

extern "C" {
    // Fortran LAPACK symbols (column-major), provided by the linked OpenBLAS.
    fn dgeqrf_(
        m: *const c_int,
        n: *const c_int,
        a: *mut f64,
        lda: *const c_int,
        tau: *mut f64,
        work: *mut f64,
        lwork: *const c_int,
        info: *mut c_int,
    );
    fn dorgqr_(
        m: *const c_int,
        n: *const c_int,
        k: *const c_int,
        a: *mut f64,
        lda: *const c_int,
        tau: *const f64,
        work: *mut f64,
        lwork: *const c_int,
        info: *mut c_int,
    );
}

fn lapack_err(routine: &str, info: c_int) -> LinalgError {
    LinalgError::DimensionMismatch(format!(
        "invalid argument {} passed to {routine}",
        -info
    ))
}

/// Orthonormal factor `Q` (same shape) of a tall matrix, `m >= n` columns.
pub(crate) fn householder_q(a: &Array2<f64>) -> Result<Array2<f64>, LinalgError> {
    let (m, n) = (a.nrows(), a.ncols());
    if m < n || n == 0 {
        return Err(LinalgError::DimensionMismatch(format!(
            "householder_q needs a tall nonempty matrix, got {m}x{n}"
        )));
    }
    // Column-major copy: iterating the transpose row-major walks `a` in
    // column order.
    let mut buf: Vec<f64> = a.t().iter().copied().collect();
    let mut tau = vec![0.0_f64; n];
    let (mm, nn) = (m as c_int, n as c_int);
    let mut info: c_int = 0;

    // Workspace query across both routines, then run them back to back.
    let mut wk1 = 0.0_f64;
    let mut wk2 = 0.0_f64;
    let query: c_int = -1;
    unsafe {
        dgeqrf_(
            &mm,
            &nn,
            buf.as_mut_ptr(),
            &mm,
            tau.as_mut_ptr(),
            &mut wk1,
            &query,
            &mut info,
        );
    }
    if info != 0 {
        return Err(lapack_err("dgeqrf", info));
    }
    unsafe {
        dorgqr_(
            &mm,
            &nn,
            &nn,
            buf.as_mut_ptr(),
            &mm,
            tau.as_ptr(),
            &mut wk2,
            &query,
            &mut info,
        );
    }
    if info != 0 {
        return Err(lapack_err("dorgqr", info));
    }
    let lwork = (wk1.max(wk2) as usize).max(n).max(1);
    let mut work = vec![0.0_f64; lwork];
    let lw = lwork as c_int;
    unsafe {
        dgeqrf_(
            &mm,
            &nn,
            buf.as_mut_ptr(),
            &mm,
            tau.as_mut_ptr(),
            work.as_mut_ptr(),
            &lw,
            &mut info,
        );
    }
    if info != 0 {
        return Err(lapack_err("dgeqrf", info));
    }
    unsafe {
        dorgqr_(
            &mm,
            &nn,
            &nn,
            buf.as_mut_ptr(),
            &mm,
            tau.as_ptr(),
            work.as_mut_ptr(),
            &lw,
            &mut info,
        );
    }
    if info != 0 {
        return Err(lapack_err("dorgqr", info));
    }
    // buf now holds Q column-major; reinterpret and restore row-major layout.
    let qt = Array2::from_shape_vec((n, m), buf)
        .expect("dimensions preserved through the LAPACK calls");
    Ok(qt.reversed_axes().as_standard_layout().into_owned())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, StandardNormal};

    fn max_abs(a: &Array2<f64>) -> f64 {
        a.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    #[test]
    fn orthonormal_and_span_preserving_on_full_rank_input() {
        let mut rng = crate::seeds::rng_for(21, 98);
        let a = Array2::from_shape_fn((40, 7), |_| -> f64 { StandardNormal.sample(&mut rng) });
        let q = householder_q(&a).unwrap();
        let qq = q.t().dot(&q);
        let eye: Array2<f64> = Array2::eye(7);
        assert!(max_abs(&(&qq - &eye)) <= 1e-13);
        // Span check: A must equal Q (Q' A).
        let proj = q.dot(&q.t().dot(&a));
        assert!(max_abs(&(&proj - &a)) <= 1e-12 * max_abs(&a));
    }

    #[test]
    fn rank_deficient_input_still_yields_orthonormal_columns() {
        let mut rng = crate::seeds::rng_for(22, 98);
        let mut a = Array2::from_shape_fn((30, 5), |_| -> f64 { StandardNormal.sample(&mut rng) });
        // Duplicate a column and zero another: rank 3 of 5.
        let c0 = a.column(0).to_owned();
        a.column_mut(1).assign(&c0);
        a.column_mut(4).fill(0.0);
        let q = householder_q(&a).unwrap();
        let qq = q.t().dot(&q);
        let eye: Array2<f64> = Array2::eye(5);
        assert!(max_abs(&(&qq - &eye)) <= 1e-13);
    }

    #[test]
    fn wide_or_empty_input_is_rejected() {
        let a = Array2::<f64>::zeros((3, 5));
        assert!(householder_q(&a).is_err());
        let b = Array2::<f64>::zeros((3, 0));
        assert!(householder_q(&b).is_err());
    }
}
