//! Dense linear-algebra kernels used by the tracker.
//!
//! Matrix products run through `ndarray`'s BLAS backend and small symmetric
//! eigenproblems through LAPACK's `dsyev`; everything algorithmic on top is
//! written here so the numerical behaviour is fully pinned down: Modified
//! Gram-Schmidt orthonormalization, truncated SVD by block power iteration
//! with Rayleigh-Ritz extraction, CGLS for least squares given operator
//! closures, and a Padé scaling-and-squaring exponential for skew-symmetric
//! generators. A self-contained cyclic Jacobi eigensolver doubles as an
//! independent cross-check for the LAPACK path in tests.

mod cgls;
mod eigen;
mod qr;
mod expm;
pub(crate) mod jacobi;
pub(crate) mod svd;

pub use cgls::{cgls_solve, CglsOutcome};
pub use eigen::{lambda_max_sym, sym_eigen, sym_eigenvalues};
pub use expm::skew_expm;
pub use svd::{r_svd, r_svd_warm};

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use thiserror::Error;

/// Orthonormality tolerance enforced on every [`BasisMatrix`]:
/// `max |Q'Q - I|` must not exceed this.
pub const ORTHONORMALITY_TOL: f64 = 1e-10;

/// Relative singular-value floor below which a matrix is treated as
/// rank-deficient by [`orthonormalize`].
pub const RANK_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("matrix is rank deficient (column span collapses below tolerance)")]
    RankDeficient,
    #[error("iteration failed to converge within {iterations} iterations")]
    NoConvergence { iterations: usize },
    #[error("matrix is not skew-symmetric")]
    NotSkewSymmetric,
    #[error("matrix is not symmetric")]
    NotSymmetric,
    #[error("columns are not orthonormal to within {ORTHONORMALITY_TOL:e}")]
    NotOrthonormal,
    #[error("index {index} out of range for dimension {n}")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("duplicate index {index}")]
    DuplicateIndex { index: usize },
}

/// Rejects non-square input and input whose asymmetry exceeds
/// `1e-8 * (1 + max |a|)`; the eigensolvers symmetrize anything below that.
pub(crate) fn check_symmetric(a: &Array2<f64>) -> Result<(), LinalgError> {
    if a.nrows() != a.ncols() {
        return Err(LinalgError::DimensionMismatch(format!(
            "expected square symmetric matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    let scale = a.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let tol = 1e-8 * (1.0 + scale);
    for i in 0..a.nrows() {
        for j in (i + 1)..a.ncols() {
            if (a[[i, j]] - a[[j, i]]).abs() > tol {
                return Err(LinalgError::NotSymmetric);
            }
        }
    }
    Ok(())
}

/// A tall matrix with orthonormal columns representing a linear subspace.
///
/// The constructor enforces `max |Q'Q - I| <= 1e-10`, so any code receiving a
/// `BasisMatrix` may rely on `Q'Q = I` without re-checking.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisMatrix {
    cols: Array2<f64>,
}

impl BasisMatrix {
    /// Wraps an already-orthonormal matrix, verifying orthonormality.
    pub fn new(cols: Array2<f64>) -> Result<Self, LinalgError> {
        if cols.ncols() > cols.nrows() {
            return Err(LinalgError::DimensionMismatch(format!(
                "basis has more columns ({}) than rows ({})",
                cols.ncols(),
                cols.nrows()
            )));
        }
        let gram = cols.t().dot(&cols);
        for i in 0..gram.nrows() {
            for j in 0..gram.ncols() {
                let expected = if i == j { 1.0 } else { 0.0 };
                if (gram[[i, j]] - expected).abs() > ORTHONORMALITY_TOL {
                    return Err(LinalgError::NotOrthonormal);
                }
            }
        }
        Ok(Self { cols })
    }

    /// Wraps without checking; for internal use where orthonormality is a
    /// structural consequence of the construction.
    pub(crate) fn from_orthonormal_unchecked(cols: Array2<f64>) -> Self {
        debug_assert!(
            Self::new(cols.clone()).is_ok(),
            "from_orthonormal_unchecked received a non-orthonormal matrix"
        );
        Self { cols }
    }

    /// Ambient (row) dimension `n`.
    pub fn ambient_dim(&self) -> usize {
        self.cols.nrows()
    }

    /// Subspace (column) dimension `r`.
    pub fn rank(&self) -> usize {
        self.cols.ncols()
    }

    /// The underlying `n x r` array.
    pub fn as_array(&self) -> &Array2<f64> {
        &self.cols
    }

    /// View of the underlying array.
    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.cols.view()
    }

    /// Consumes the basis and returns the underlying array.
    pub fn into_inner(self) -> Array2<f64> {
        self.cols
    }
}

/// A sorted set of distinct row indices in `[0, n)`, used for per-frame
/// missing-entry and outlier supports.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexSet {
    idx: Vec<usize>,
}

impl IndexSet {
    /// Builds a set from arbitrary-order indices, validating range `< n` and
    /// distinctness.
    pub fn new(mut idx: Vec<usize>, n: usize) -> Result<Self, LinalgError> {
        idx.sort_unstable();
        for w in idx.windows(2) {
            if w[0] == w[1] {
                return Err(LinalgError::DuplicateIndex { index: w[0] });
            }
        }
        if let Some(&last) = idx.last() {
            if last >= n {
                return Err(LinalgError::IndexOutOfRange { index: last, n });
            }
        }
        Ok(Self { idx })
    }

    /// The empty set.
    pub fn empty() -> Self {
        Self { idx: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.idx.len()
    }

    pub fn is_empty(&self) -> bool {
        self.idx.is_empty()
    }

    /// Membership test by binary search.
    pub fn contains(&self, i: usize) -> bool {
        self.idx.binary_search(&i).is_ok()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.idx
    }

    pub fn iter(&self) -> std::slice::Iter<'_, usize> {
        self.idx.iter()
    }

    /// All indices in `[0, n)` not in `self`.
    pub fn complement(&self, n: usize) -> Self {
        let mut out = Vec::with_capacity(n - self.idx.len());
        let mut it = self.idx.iter().peekable();
        for i in 0..n {
            match it.peek() {
                Some(&&next) if next == i => {
                    it.next();
                }
                _ => out.push(i),
            }
        }
        Self { idx: out }
    }

    /// Sorted union of two sets.
    pub fn union(&self, other: &Self) -> Self {
        let mut out = Vec::with_capacity(self.len() + other.len());
        let (mut a, mut b) = (self.idx.iter().peekable(), other.idx.iter().peekable());
        loop {
            match (a.peek(), b.peek()) {
                (Some(&&x), Some(&&y)) => {
                    if x < y {
                        out.push(x);
                        a.next();
                    } else if y < x {
                        out.push(y);
                        b.next();
                    } else {
                        out.push(x);
                        a.next();
                        b.next();
                    }
                }
                (Some(&&x), None) => {
                    out.push(x);
                    a.next();
                }
                (None, Some(&&y)) => {
                    out.push(y);
                    b.next();
                }
                (None, None) => break,
            }
        }
        Self { idx: out }
    }
}

/// Orthonormalizes the columns of `m` by Modified Gram-Schmidt with a second
/// re-orthogonalization pass.
///
/// # Errors
/// [`LinalgError::RankDeficient`] if any column's residual after projection
/// onto the previous columns falls below `1e-12` times the largest original
/// column norm (the matrix does not have full column rank at working
/// precision).
pub fn orthonormalize(m: &Array2<f64>) -> Result<BasisMatrix, LinalgError> {
    let (n, r) = (m.nrows(), m.ncols());
    if r > n {
        return Err(LinalgError::DimensionMismatch(format!(
            "cannot orthonormalize {n}x{r}: more columns than rows"
        )));
    }
    let scale = m
        .columns()
        .into_iter()
        .map(|c| c.dot(&c).sqrt())
        .fold(0.0_f64, f64::max);
    if scale == 0.0 {
        return Err(LinalgError::RankDeficient);
    }
    let mut q = m.clone();
    for j in 0..r {
        // Two MGS passes against the already-orthonormal prefix.
        for _pass in 0..2 {
            for i in 0..j {
                let qi = q.column(i).to_owned();
                let coeff = qi.dot(&q.column(j));
                let mut col = q.column_mut(j);
                col.scaled_add(-coeff, &qi);
            }
        }
        let norm = q.column(j).dot(&q.column(j)).sqrt();
        if norm <= RANK_TOL * scale {
            return Err(LinalgError::RankDeficient);
        }
        q.column_mut(j).mapv_inplace(|v| v / norm);
    }
    Ok(BasisMatrix::from_orthonormal_unchecked(q))
}

/// Orthonormal basis for `span(p1) + span(p2)`, dropping directions of `p2`
/// already represented in `p1` (residual below `drop_tol` after projection).
///
/// Used to build the union bases for offline smoothing, where the two inputs
/// are typically near-identical and a plain orthonormalization would fail as
/// rank-deficient.
pub fn union_basis(
    p1: &BasisMatrix,
    p2: &BasisMatrix,
    drop_tol: f64,
) -> Result<BasisMatrix, LinalgError> {
    if p1.ambient_dim() != p2.ambient_dim() {
        return Err(LinalgError::DimensionMismatch(format!(
            "union of bases with ambient dims {} and {}",
            p1.ambient_dim(),
            p2.ambient_dim()
        )));
    }
    let n = p1.ambient_dim();
    let mut cols: Vec<Array1<f64>> = p1.as_array().columns().into_iter().map(|c| c.to_owned()).collect();
    for c in p2.as_array().columns() {
        let mut v = c.to_owned();
        for _pass in 0..2 {
            for q in &cols {
                let coeff = q.dot(&v);
                v.scaled_add(-coeff, q);
            }
        }
        let norm = v.dot(&v).sqrt();
        if norm > drop_tol {
            cols.push(v.mapv(|x| x / norm));
        }
    }
    let mut out = Array2::zeros((n, cols.len()));
    for (j, c) in cols.iter().enumerate() {
        out.column_mut(j).assign(c);
    }
    Ok(BasisMatrix::from_orthonormal_unchecked(out))
}

/// Largest principal-angle sine between the subspaces spanned by `p1` and
/// `p2`: the spectral norm of `(I - p1 p1') p2`.
///
/// Asymmetric in general when the ranks differ; for equal ranks it is the
/// usual symmetric subspace distance. Returns a value in `[0, 1]`.
pub fn sin_theta_max(p1: &BasisMatrix, p2: &BasisMatrix) -> Result<f64, LinalgError> {
    if p1.ambient_dim() != p2.ambient_dim() {
        return Err(LinalgError::DimensionMismatch(format!(
            "sin_theta_max between ambient dims {} and {}",
            p1.ambient_dim(),
            p2.ambient_dim()
        )));
    }
    // M = p2 - p1 (p1' p2), then sigma_max(M) via the small Gram matrix.
    let p1p2 = p1.as_array().t().dot(p2.as_array());
    let m = p2.as_array() - &p1.as_array().dot(&p1p2);
    let gram = m.t().dot(&m);
    let lam = lambda_max_sym(&gram)?;
    Ok(lam.max(0.0).sqrt().min(1.0))
}

/// Incoherence parameter of a basis: `(n / r) * max_i ||row_i||^2`.
///
/// Equals 1 for perfectly spread bases and `n / r` for a basis aligned with
/// coordinate axes; small values mean no row carries outsized energy, which
/// is what makes recovery from missing entries well posed.
pub fn mu_coherence(p: &BasisMatrix) -> f64 {
    let (n, r) = (p.ambient_dim(), p.rank());
    let max_row: f64 = p
        .as_array()
        .rows()
        .into_iter()
        .map(|row| row.dot(&row))
        .fold(0.0_f64, f64::max);
    (n as f64 / r as f64) * max_row
}

/// Restriction of the rows of `p` to `support`: the `|support| x r` matrix of
/// selected rows. Helper shared by the fill and detection paths.
pub(crate) fn select_rows(p: &Array2<f64>, support: &IndexSet) -> Array2<f64> {
    let r = p.ncols();
    let mut out = Array2::zeros((support.len(), r));
    for (row_out, &i) in support.iter().enumerate() {
        out.row_mut(row_out).assign(&p.row(i));
    }
    out
}

/// Scatters `values` into a zero vector of length `n` at `support` positions.
pub(crate) fn scatter(values: ArrayView1<'_, f64>, support: &IndexSet, n: usize) -> Array1<f64> {
    let mut out = Array1::zeros(n);
    for (v, &i) in values.iter().zip(support.iter()) {
        out[i] = *v;
    }
    out
}
