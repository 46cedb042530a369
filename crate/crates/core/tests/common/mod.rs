//! Independent reference implementations ("oracles") used by the
//! integration and acceptance tests. Deliberately written with different
//! algorithms than the library (one-sided Jacobi SVD instead of block power
//! iteration, explicit dense pseudoinverse instead of CGLS, plain Taylor
//! series instead of Padé) so agreement is meaningful evidence.

#![allow(dead_code)]

use ndarray::{Array1, Array2};

/// Full SVD of `a` by one-sided Jacobi rotations on the columns.
///
/// Returns `(u, sigma, v)` with `a = u diag(sigma) v'`, singular values in
/// descending order. Columns of `u` for zero singular values are zeroed.
pub fn jacobi_svd(a: &Array2<f64>) -> (Array2<f64>, Array1<f64>, Array2<f64>) {
    let (m, n) = (a.nrows(), a.ncols());
    let mut w = a.clone();
    let mut v: Array2<f64> = Array2::eye(n);
    let eps = f64::EPSILON;
    for _sweep in 0..60 {
        let mut rotated = false;
        for p in 0..n.saturating_sub(1) {
            for q in (p + 1)..n {
                let cp = w.column(p).to_owned();
                let cq = w.column(q).to_owned();
                let app = cp.dot(&cp);
                let aqq = cq.dot(&cq);
                let apq = cp.dot(&cq);
                if apq.abs() <= 10.0 * eps * (app * aqq).sqrt() || apq == 0.0 {
                    continue;
                }
                rotated = true;
                let tau = (aqq - app) / (2.0 * apq);
                let t = if tau == 0.0 {
                    1.0
                } else {
                    tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for i in 0..m {
                    let wip = w[[i, p]];
                    let wiq = w[[i, q]];
                    w[[i, p]] = c * wip - s * wiq;
                    w[[i, q]] = s * wip + c * wiq;
                }
                for i in 0..n {
                    let vip = v[[i, p]];
                    let viq = v[[i, q]];
                    v[[i, p]] = c * vip - s * viq;
                    v[[i, q]] = s * vip + c * viq;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    // Column norms are the singular values; sort descending.
    let mut order: Vec<usize> = (0..n).collect();
    let norms: Vec<f64> = (0..n)
        .map(|j| w.column(j).dot(&w.column(j)).sqrt())
        .collect();
    order.sort_by(|&i, &j| norms[j].partial_cmp(&norms[i]).unwrap());
    let mut u = Array2::zeros((m, n));
    let mut sigma = Array1::zeros(n);
    let mut v_sorted = Array2::zeros((n, n));
    for (out, &j) in order.iter().enumerate() {
        sigma[out] = norms[j];
        v_sorted.column_mut(out).assign(&v.column(j));
        if norms[j] > 0.0 {
            let col = w.column(j).mapv(|x| x / norms[j]);
            u.column_mut(out).assign(&col);
        }
    }
    (u, sigma, v_sorted)
}

/// Minimum-norm least-squares solution `argmin ||a x - b||` through the
/// oracle SVD (explicit pseudoinverse with relative cutoff `1e-13`).
pub fn pinv_solve(a: &Array2<f64>, b: &Array1<f64>) -> Array1<f64> {
    let (u, sigma, v) = jacobi_svd(a);
    let cutoff = 1e-13 * sigma[0].max(f64::MIN_POSITIVE);
    let mut x = Array1::zeros(a.ncols());
    for k in 0..sigma.len() {
        if sigma[k] > cutoff {
            let coeff = u.column(k).dot(b) / sigma[k];
            x.scaled_add(coeff, &v.column(k));
        }
    }
    x
}

/// Dense solve of the square system `a x = b` by Gaussian elimination with
/// partial pivoting. Panics on exact singularity (fine for test oracles).
pub fn solve_dense(a: &Array2<f64>, b: &Array1<f64>) -> Array1<f64> {
    let n = a.nrows();
    assert_eq!(a.ncols(), n);
    let mut m = a.clone();
    let mut x = b.clone();
    for k in 0..n {
        let mut p = k;
        for i in (k + 1)..n {
            if m[[i, k]].abs() > m[[p, k]].abs() {
                p = i;
            }
        }
        assert!(m[[p, k]] != 0.0, "oracle solve hit a zero pivot");
        if p != k {
            for j in 0..n {
                let tmp = m[[k, j]];
                m[[k, j]] = m[[p, j]];
                m[[p, j]] = tmp;
            }
            x.swap(k, p);
        }
        for i in (k + 1)..n {
            let f = m[[i, k]] / m[[k, k]];
            if f == 0.0 {
                continue;
            }
            for j in k..n {
                m[[i, j]] -= f * m[[k, j]];
            }
            x[i] -= f * x[k];
        }
    }
    for i in (0..n).rev() {
        let mut v = x[i];
        for j in (i + 1)..n {
            v -= m[[i, j]] * x[j];
        }
        x[i] = v / m[[i, i]];
    }
    x
}

/// Least squares by explicitly formed normal equations (independent of both
/// CGLS and the pseudoinverse route; only for well-conditioned test cases).
pub fn normal_equations_solve(a: &Array2<f64>, b: &Array1<f64>) -> Array1<f64> {
    let ata = a.t().dot(a);
    let atb = a.t().dot(b);
    solve_dense(&ata, &atb)
}

/// Matrix exponential by plain scaled Taylor summation (no Padé): scales to
/// norm <= 1/16, sums until terms vanish, squares back.
pub fn expm_taylor(a: &Array2<f64>) -> Array2<f64> {
    let n = a.nrows();
    let norm = a
        .columns()
        .into_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0_f64, f64::max);
    let mut squarings = 0u32;
    let mut scale = 1.0;
    while norm * scale > 0.0625 {
        scale *= 0.5;
        squarings += 1;
    }
    let x = a * scale;
    let mut term: Array2<f64> = Array2::eye(n);
    let mut sum = term.clone();
    for k in 1..60 {
        term = term.dot(&x) / k as f64;
        let biggest = term.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        sum = sum + &term;
        if biggest < 1e-300 {
            break;
        }
    }
    for _ in 0..squarings {
        sum = sum.dot(&sum);
    }
    sum
}

/// Dense reference for the projected-LS fill: explicitly forms
/// `psi = I - p p'`, restricts its columns to the missing support, solves the
/// least-squares by pseudoinverse, and subtracts the interpolation.
pub fn dense_projected_fill(
    y: &Array1<f64>,
    missing: &[usize],
    basis: Option<&Array2<f64>>,
) -> Array1<f64> {
    let n = y.len();
    let psi = match basis {
        Some(p) => &Array2::eye(n) - &p.dot(&p.t()),
        None => Array2::eye(n),
    };
    let y_tilde = psi.dot(y);
    let mut psi_t = Array2::zeros((n, missing.len()));
    for (col, &i) in missing.iter().enumerate() {
        psi_t.column_mut(col).assign(&psi.column(i));
    }
    let z = pinv_solve(&psi_t, &y_tilde);
    let mut ell = y.clone();
    for (col, &i) in missing.iter().enumerate() {
        ell[i] -= z[col];
    }
    ell
}

/// Max absolute entry difference between two matrices.
pub fn max_abs_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Exhaustive double-loop reference for the missing-fraction statistics:
/// counts per-row occupancy over every length-`alpha` window directly.
pub fn exhaustive_miss_frac(
    supports: &[Vec<usize>],
    n: usize,
    alpha: usize,
) -> (f64, f64) {
    let d = supports.len();
    let max_col = supports
        .iter()
        .map(|s| s.len() as f64 / n as f64)
        .fold(0.0_f64, f64::max);
    let mut worst = 0usize;
    for w in 0..=(d - alpha) {
        for row in 0..n {
            let mut count = 0;
            for t in w..w + alpha {
                if supports[t].contains(&row) {
                    count += 1;
                }
            }
            worst = worst.max(count);
        }
    }
    (max_col, worst as f64 / alpha as f64)
}
