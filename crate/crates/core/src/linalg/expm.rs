//! Matrix exponential of scaled skew-symmetric generators.
//!
//! `skew_expm(b, gamma)` computes `exp(gamma * b)` for skew-symmetric `b` by
//! Padé(13) scaling and squaring. Because the generator is skew, the result
//! is orthogonal, which is how piecewise-constant subspace changes are
//! produced: rotating an orthonormal basis leaves it orthonormal, and
//! `gamma` dials the rotation angle (and hence the principal angles between
//! the old and new subspaces) continuously.

use super::LinalgError;
use ndarray::{s, Array1, Array2};

/// Padé(13) numerator coefficients (Higham's scaling-and-squaring constants).
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
/// Largest 1-norm for which the (13,13) Padé approximant is accurate at f64.
const THETA13: f64 = 5.371920351148152;

fn one_norm(a: &Array2<f64>) -> f64 {
    a.columns()
        .into_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0_f64, f64::max)
}

/// Solves `a x = rhs` by LU with partial pivoting (dense, square). The
/// elimination and substitutions run as whole-row vector operations so the
/// cost is dominated by streaming `axpy`s rather than scalar index loops.
fn lu_solve(mut a: Array2<f64>, mut rhs: Array2<f64>) -> Result<Array2<f64>, LinalgError> {
    let n = a.nrows();
    let m = rhs.ncols();
    for k in 0..n {
        // Partial pivot.
        let mut p = k;
        let mut best = a[[k, k]].abs();
        for i in (k + 1)..n {
            let v = a[[i, k]].abs();
            if v > best {
                best = v;
                p = i;
            }
        }
        if best == 0.0 {
            return Err(LinalgError::RankDeficient);
        }
        if p != k {
            for j in 0..n {
                a.swap([k, j], [p, j]);
            }
            for j in 0..m {
                rhs.swap([k, j], [p, j]);
            }
        }
        let pivot = a[[k, k]];
        for i in (k + 1)..n {
            let factor = a[[i, k]] / pivot;
            if factor == 0.0 {
                continue;
            }
            a[[i, k]] = factor;
            if k + 1 < n {
                let (row_k, mut row_i) = a.multi_slice_mut((s![k, k + 1..], s![i, k + 1..]));
                row_i.scaled_add(-factor, &row_k);
            }
            let (rhs_k, mut rhs_i) = rhs.multi_slice_mut((s![k, ..], s![i, ..]));
            rhs_i.scaled_add(-factor, &rhs_k);
        }
    }
    // Back substitution, again row-at-a-time over the full right-hand side.
    for i in (0..n).rev() {
        for k in (i + 1)..n {
            let aik = a[[i, k]];
            if aik != 0.0 {
                let (row_k, mut row_i) = rhs.multi_slice_mut((s![k, ..], s![i, ..]));
                row_i.scaled_add(-aik, &row_k);
            }
        }
        let inv = 1.0 / a[[i, i]];
        rhs.row_mut(i).mapv_inplace(|v| v * inv);
    }
    Ok(rhs)
}

/// Upper estimate of the spectral norm by power iteration on `a'a`,
/// inflated by a 25% safety margin and capped by `one_norm_cap`. Only used
/// to pick the squaring count: the Padé accuracy bound holds for any
/// submultiplicative norm, and the spectral norm is the smallest of them,
/// so a reliable upper estimate saves squarings without losing accuracy
/// (for random dense skew generators the 1-norm overshoots sigma_max by an
/// order of magnitude).
fn spectral_norm_upper(a: &Array2<f64>, one_norm_cap: f64) -> f64 {
    let n = a.nrows();
    let mut v = Array1::from_shape_fn(n, |i| 1.0 + (0.7 * i as f64).sin());
    let norm0 = v.dot(&v).sqrt();
    if norm0 == 0.0 || one_norm_cap == 0.0 {
        return one_norm_cap;
    }
    v /= norm0;
    let mut sigma2 = 0.0_f64;
    for _ in 0..60 {
        let w = a.t().dot(&a.dot(&v));
        let rayleigh = v.dot(&w);
        let wn = w.dot(&w).sqrt();
        if wn == 0.0 {
            break;
        }
        let done = (rayleigh - sigma2).abs() <= 1e-4 * rayleigh.abs().max(1e-300);
        sigma2 = rayleigh;
        v = w / wn;
        if done {
            break;
        }
    }
    (sigma2.max(0.0).sqrt() * 1.25).min(one_norm_cap)
}

/// Computes the orthogonal matrix `exp(gamma * b)` for skew-symmetric `b`.
///
/// # Errors
/// [`LinalgError::NotSkewSymmetric`] if `max |b + b'|` exceeds
/// `1e-10 * (1 + max |b|)`; [`LinalgError::DimensionMismatch`] if `b` is not
/// square.
pub fn skew_expm(b: &Array2<f64>, gamma: f64) -> Result<Array2<f64>, LinalgError> {
    let n = b.nrows();
    if b.ncols() != n {
        return Err(LinalgError::DimensionMismatch(format!(
            "skew_expm needs a square matrix, got {}x{}",
            n,
            b.ncols()
        )));
    }
    let scale = b.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let tol = 1e-10 * (1.0 + scale);
    for i in 0..n {
        for j in i..n {
            if (b[[i, j]] + b[[j, i]]).abs() > tol {
                return Err(LinalgError::NotSkewSymmetric);
            }
        }
    }

    let mut a = b * gamma;
    let norm1 = one_norm(&a);
    if norm1 == 0.0 {
        return Ok(Array2::eye(n));
    }
    let norm = if norm1 > THETA13 {
        spectral_norm_upper(&a, norm1)
    } else {
        norm1
    };
    let squarings = if norm > THETA13 {
        (norm / THETA13).log2().ceil() as u32
    } else {
        0
    };
    a /= 2f64.powi(squarings as i32);

    // Padé(13): U odd part, V even part, exp(A) ~= (V - U)^-1 (V + U).
    let ident: Array2<f64> = Array2::eye(n);
    let a2 = a.dot(&a);
    let a4 = a2.dot(&a2);
    let a6 = a2.dot(&a4);
    let w1 = &a6 * PADE13[13] + &a4 * PADE13[11] + &a2 * PADE13[9];
    let w2 = &a6 * PADE13[7] + &a4 * PADE13[5] + &a2 * PADE13[3] + &ident * PADE13[1];
    let u = a.dot(&(a6.dot(&w1) + w2));
    let z1 = &a6 * PADE13[12] + &a4 * PADE13[10] + &a2 * PADE13[8];
    let v = a6.dot(&z1) + &a6 * PADE13[6] + &a4 * PADE13[4] + &a2 * PADE13[2] + &ident * PADE13[0];

    let mut f = lu_solve(&v - &u, &v + &u)?;
    for _ in 0..squarings {
        f = f.dot(&f);
    }
    Ok(f)
}
