//! Schedule and fill variants layered over the core tracker.
//!
//! Three refinements of the same state machine, selectable per run:
//!
//! - **Sample-efficient fills**: once the subspace estimate for the current
//!   change interval has converged (its K-th mini-batch update), the
//!   per-frame estimate switches from projected least squares to a direct
//!   least-squares coefficient fit on the observed rows. That system has
//!   only `r` unknowns, so it tolerates far fewer observed entries per
//!   frame, and it denoises observed coordinates instead of copying them.
//! - **Sliding-window updates**: mini-batch updates fire every `beta <=
//!   alpha` frames on the trailing `alpha`-frame window instead of every
//!   `alpha` frames on disjoint windows, so each update sees mostly
//!   well-filled frames sooner. `beta = alpha` reproduces the basic
//!   schedule exactly.
//! - **Buffer reuse**: an update re-fills its window against the basis it
//!   just computed and re-runs the SVD, `R` additional times, extracting
//!   more accuracy from the same stored samples. `R = 0` reproduces the
//!   basic update exactly.

use crate::linalg::svd::block_power_svd;
use crate::linalg::{cgls_solve, select_rows, BasisMatrix, IndexSet};
use crate::tracker::{project_ls_fill, TrackerError};
use ndarray::{Array1, Array2};

/// Which scheduling/fill variant the tracker runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VariantMode {
    /// Disjoint `alpha`-frame update windows, projected-LS fills everywhere.
    Basic,
    /// Basic schedule; coefficient-LS fills once an interval has converged.
    SampleEfficient,
    /// Updates every `beta` frames on the trailing `alpha`-frame window.
    SlidingWindow {
        /// Update hop; `1 <= beta <= alpha`.
        beta: usize,
    },
    /// `reuse` extra fill+SVD passes per update window.
    BufferReuse {
        /// Extra passes; 0 reduces to [`VariantMode::Basic`].
        reuse: usize,
    },
    /// Sliding-window scheduling combined with buffer reuse.
    SlidingPlusReuse {
        /// Update hop; `1 <= beta <= alpha`.
        beta: usize,
        /// Extra fill+SVD passes per update.
        reuse: usize,
    },
}

impl VariantMode {
    /// Frames between consecutive subspace updates (and, in the detect
    /// phase, between refinements). The basic modes use `alpha`.
    pub fn hop(&self, alpha: usize) -> usize {
        match *self {
            VariantMode::SlidingWindow { beta } | VariantMode::SlidingPlusReuse { beta, .. } => {
                beta
            }
            _ => alpha,
        }
    }

    /// Extra fill+SVD passes per update window.
    pub fn reuse_rounds(&self) -> usize {
        match *self {
            VariantMode::BufferReuse { reuse } | VariantMode::SlidingPlusReuse { reuse, .. } => {
                reuse
            }
            _ => 0,
        }
    }

    /// Whether converged intervals switch to coefficient-LS fills.
    pub fn uses_sample_efficient_fill(&self) -> bool {
        matches!(self, VariantMode::SampleEfficient)
    }

    /// Canonical text form, also used by checkpoints and the CLI:
    /// `basic`, `sample_efficient`, `sliding,B`, `buffer_reuse,R`,
    /// `sliding_reuse,B,R`.
    pub fn label(&self) -> String {
        match *self {
            VariantMode::Basic => "basic".into(),
            VariantMode::SampleEfficient => "sample_efficient".into(),
            VariantMode::SlidingWindow { beta } => format!("sliding,{beta}"),
            VariantMode::BufferReuse { reuse } => format!("buffer_reuse,{reuse}"),
            VariantMode::SlidingPlusReuse { beta, reuse } => {
                format!("sliding_reuse,{beta},{reuse}")
            }
        }
    }

    /// Parses the canonical text form produced by [`VariantMode::label`].
    pub fn parse_label(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        let num = |p: &str| -> Result<usize, String> {
            p.parse::<usize>()
                .map_err(|_| format!("expected an integer, got {p:?}"))
        };
        match parts.as_slice() {
            ["basic"] => Ok(VariantMode::Basic),
            ["sample_efficient"] => Ok(VariantMode::SampleEfficient),
            ["sliding", b] => Ok(VariantMode::SlidingWindow { beta: num(b)? }),
            ["buffer_reuse", r] => Ok(VariantMode::BufferReuse { reuse: num(r)? }),
            ["sliding_reuse", b, r] => Ok(VariantMode::SlidingPlusReuse {
                beta: num(b)?,
                reuse: num(r)?,
            }),
            _ => Err(format!(
                "unknown variant {s:?}; expected basic, sample_efficient, \
                 sliding,B, buffer_reuse,R or sliding_reuse,B,R"
            )),
        }
    }

    /// Checks the mode against the batch length `alpha`.
    pub fn validate(&self, alpha: usize) -> Result<(), TrackerError> {
        let beta = match *self {
            VariantMode::SlidingWindow { beta } | VariantMode::SlidingPlusReuse { beta, .. } => {
                beta
            }
            _ => return Ok(()),
        };
        if beta == 0 || beta > alpha {
            return Err(TrackerError::InvalidParams(format!(
                "update hop beta = {beta} must satisfy 1 <= beta <= alpha = {alpha}"
            )));
        }
        Ok(())
    }
}

impl std::fmt::Display for VariantMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.label())
    }
}

/// Variant selection bundled for constructors; defaults to the basic mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct VariantParams {
    /// Scheduling/fill variant.
    pub mode: VariantMode,
}

impl Default for VariantMode {
    fn default() -> Self {
        VariantMode::Basic
    }
}

impl VariantParams {
    /// Wraps a mode.
    pub fn new(mode: VariantMode) -> Self {
        Self { mode }
    }
}

/// Update-time predicate for the sliding-window schedule of a change
/// interval starting at `era_start`: updates fire at `t = era_start + alpha
/// - 1 + m*beta` for `m = 0, 1, ...`. With `beta = alpha` these are exactly
/// the disjoint-window update times of the basic schedule.
pub fn sliding_window_schedule(
    era_start: usize,
    alpha: usize,
    beta: usize,
) -> impl Fn(usize) -> bool {
    move |t: usize| {
        let first = era_start + alpha - 1;
        t >= first && (t - first) % beta == 0
    }
}

/// Coefficient-least-squares fill on the observed rows: fits `a` minimizing
/// `||P_omega a - y_omega||` and returns `P a`, where `P_omega` is the
/// restriction of the basis to the observed rows `omega`.
///
/// Unlike the projected-LS fill, observed coordinates of the result may
/// differ from `y` (the fit denoises them). Requires `|omega| >= rank`; an
/// effectively rank-deficient restriction (condition above ~1e8) is
/// reported as [`TrackerError::IllConditioned`], and callers fall back to
/// the projected-LS fill for that frame.
pub fn sample_efficient_fill(
    y: ndarray::ArrayView1<'_, f64>,
    observed: &IndexSet,
    basis: &BasisMatrix,
    cgls_tol: f64,
    cgls_max_iter: usize,
) -> Result<Array1<f64>, TrackerError> {
    let n = y.len();
    if basis.ambient_dim() != n {
        return Err(TrackerError::ShapeMismatch(format!(
            "frame has {n} coordinates but the basis lives in dimension {}",
            basis.ambient_dim()
        )));
    }
    if let Some(&max) = observed.as_slice().last() {
        if max >= n {
            return Err(TrackerError::ShapeMismatch(format!(
                "observed index {max} out of range for dimension {n}"
            )));
        }
    }
    let r = basis.rank();
    if observed.len() < r {
        return Err(TrackerError::IllConditioned);
    }
    let p_obs = select_rows(basis.as_array(), observed);
    let y_obs = Array1::from_iter(observed.iter().map(|&i| y[i]));
    let out = cgls_solve(
        |v| p_obs.dot(v),
        |w| p_obs.t().dot(w),
        &y_obs,
        cgls_tol,
        cgls_max_iter,
    );
    if !out.converged {
        // Only now pay for a conditioning diagnosis: sigma_min(P_omega)^2 is
        // the smallest eigenvalue of the r x r Gram matrix.
        let gram = p_obs.t().dot(&p_obs);
        let evals = crate::linalg::sym_eigenvalues(&gram)?;
        let lam_min = evals[evals.len() - 1].max(0.0);
        if lam_min <= 1e-16 {
            return Err(TrackerError::IllConditioned);
        }
    }
    Ok(basis.as_array().dot(&out.x))
}

/// One buffer-reuse subspace update: `reuse + 1` rounds of (fill the window
/// by projected LS against the current basis estimate, then take the top-`r`
/// left singular basis of the filled window). Returns the final basis and
/// its singular values.
///
/// `p_start = None` starts from the zero basis (fills pass `y` through).
/// Frames whose fill fails contribute their raw `y` column, mirroring the
/// online tracker's degraded-frame policy. With `reuse = 0` this is exactly
/// fill-then-SVD, i.e. one basic update on those fills.
pub fn buffer_reuse_update(
    window: &[(Array1<f64>, IndexSet)],
    p_start: Option<&BasisMatrix>,
    reuse: usize,
    r: usize,
    cgls_tol: f64,
    cgls_max_iter: usize,
) -> Result<(BasisMatrix, Array1<f64>), TrackerError> {
    if window.is_empty() {
        return Err(TrackerError::InvalidParams(
            "buffer-reuse update called on an empty window".into(),
        ));
    }
    let n = window[0].0.len();
    let mut current: Option<BasisMatrix> = p_start.cloned();
    let mut last: Option<(Array2<f64>, Array1<f64>)> = None;
    for _round in 0..=reuse {
        let mut filled = Array2::zeros((n, window.len()));
        for (c, (y, miss)) in window.iter().enumerate() {
            let col = match project_ls_fill(y.view(), miss, current.as_ref(), cgls_tol, cgls_max_iter)
            {
                Ok((ell, _)) => ell,
                Err(TrackerError::IllConditioned) => y.clone(),
                Err(e) => return Err(e),
            };
            filled.column_mut(c).assign(&col);
        }
        let warm = current.as_ref().map(|b| b.as_array());
        let out = block_power_svd(&filled, r, warm, true)?;
        current = Some(BasisMatrix::from_orthonormal_unchecked(out.basis.clone()));
        last = Some((out.basis, out.sigmas));
    }
    let (basis, sigmas) = last.expect("at least one round always runs");
    Ok((BasisMatrix::from_orthonormal_unchecked(basis), sigmas))
}
