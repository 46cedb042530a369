//! Tracking when frames carry sparse outliers on top of missing entries.
//!
//! Each frame is demixed before it reaches the tracker: an l1 solve with
//! zero penalty on the known-missing coordinates ([`modified_cs`]) estimates
//! the combined sparse vector, a threshold turns it into an enlarged
//! suspect support ([`support_estimate`]), and the frame — zeroed on that
//! support — is handed to the ordinary tracker, whose projected-LS fill
//! then re-estimates both the missing and the outlier-corrupted entries.
//! The subspace schedule (updates, detection, refinement) is untouched.
//!
//! The tracker needs a decent starting basis for the demixing to work, so a
//! short training prefix is decomposed in batch by alternating rank-`r`
//! projections with hard thresholding ([`altproj_init`]), with missing
//! entries pre-filled by a large constant so they behave like outliers
//! during training.

use crate::linalg::{BasisMatrix, IndexSet, LinalgError};
use crate::tracker::{
    smooth, EraRecord, FrameOutput, TimedEvent, Tracker, TrackerError, TrackerParams,
};
use crate::variants::VariantParams;
use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2};
use std::sync::Arc;
use thiserror::Error;

/// Errors from the robust pipeline.
#[derive(Debug, Error)]
pub enum RobustError {
    /// A parameter constraint was violated.
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    /// Matrix or frame dimensions do not line up.
    #[error("dimension mismatch: {0}")]
    ShapeMismatch(String),
    /// The batch initialization did not stabilize within its iteration cap.
    #[error("batch initialization did not stabilize after {iterations} iterations")]
    NoConvergence {
        /// Iterations performed.
        iterations: usize,
    },
    /// The wrapped tracker failed.
    #[error(transparent)]
    Tracker(#[from] TrackerError),
    /// An underlying dense kernel failed.
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

type Result<T> = std::result::Result<T, RobustError>;

/// How the per-frame support threshold is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SupportThreshold {
    /// Fixed threshold, normally `x_min / 2`.
    Fixed(f64),
    /// Per-frame `0.9 * ||y_t|| / sqrt(n)`, for data where the outlier
    /// magnitude floor is unknown; the residual bound then scales along as
    /// `2/15` of the threshold (the same ratio the fixed rule implies).
    EnergyScaled,
}

/// Parameters of the robust variant.
#[derive(Debug, Clone, PartialEq)]
pub struct RobustParams {
    /// Assumed minimum outlier magnitude.
    pub x_min: f64,
    /// Residual bound of the sparse-recovery solve, normally `x_min / 15`.
    pub xi: f64,
    /// Support threshold rule, normally `x_min / 2`.
    pub omega_supp: SupportThreshold,
    /// Training prefix length for the batch initialization.
    pub t_train: usize,
    /// Alternating-projection iterations of the batch initialization.
    pub altproj_iters: usize,
    /// Total iteration budget of one [`modified_cs`] call (shared across
    /// its internal penalty search).
    pub cs_max_iter: usize,
    /// Relative objective tolerance of the l1 solver.
    pub cs_obj_tol: f64,
}

impl RobustParams {
    /// Standard parameters implied by a known outlier magnitude floor:
    /// `xi = x_min/15`, threshold `x_min/2`, a 500-iteration
    /// alternating-projection budget, l1 budget 2000 at objective
    /// tolerance 1e-8.
    pub fn from_x_min(x_min: f64, t_train: usize) -> Result<Self> {
        if !(x_min > 0.0) {
            return Err(RobustError::InvalidParams(format!(
                "x_min must be positive, got {x_min}"
            )));
        }
        Ok(Self {
            x_min,
            xi: x_min / 15.0,
            omega_supp: SupportThreshold::Fixed(x_min / 2.0),
            t_train,
            altproj_iters: 500,
            cs_max_iter: 2000,
            cs_obj_tol: 1e-8,
        })
    }

    /// Energy-scaled variant for data without a known magnitude floor; the
    /// nominal `x_min` is still used for the batch-initialization fill
    /// constant.
    pub fn auto(x_min_nominal: f64, t_train: usize) -> Result<Self> {
        let mut p = Self::from_x_min(x_min_nominal, t_train)?;
        p.omega_supp = SupportThreshold::EnergyScaled;
        Ok(p)
    }

    /// Validates `xi > 0`, a positive threshold, `t_train >= rank` and
    /// nonzero solver budgets.
    pub fn validate(&self, rank: usize) -> Result<()> {
        if !(self.xi > 0.0) {
            return Err(RobustError::InvalidParams(format!(
                "xi must be positive, got {}",
                self.xi
            )));
        }
        if let SupportThreshold::Fixed(w) = self.omega_supp {
            if !(w > 0.0) {
                return Err(RobustError::InvalidParams(format!(
                    "support threshold must be positive, got {w}"
                )));
            }
        }
        if self.t_train < rank {
            return Err(RobustError::InvalidParams(format!(
                "t_train = {} must be at least the rank {rank}",
                self.t_train
            )));
        }
        if self.altproj_iters == 0 || self.cs_max_iter == 0 {
            return Err(RobustError::InvalidParams(
                "iteration budgets must be >= 1".into(),
            ));
        }
        if !(self.cs_obj_tol > 0.0) {
            return Err(RobustError::InvalidParams(
                "cs_obj_tol must be positive".into(),
            ));
        }
        Ok(())
    }

    /// `(threshold, residual bound)` in effect for a frame with observation
    /// energy `y_norm`.
    fn frame_thresholds(&self, y_norm: f64, n: usize) -> (f64, f64) {
        match self.omega_supp {
            SupportThreshold::Fixed(w) => (w, self.xi),
            SupportThreshold::EnergyScaled => {
                let w = 0.9 * y_norm / (n as f64).sqrt();
                (w, 2.0 * w / 15.0)
            }
        }
    }
}

/// Per-frame sparse-recovery outcome.
#[derive(Debug, Clone)]
pub struct SparseEstimate {
    /// The l1 estimate of the combined sparse vector (full length).
    pub x_cs: Array1<f64>,
    /// Enlarged suspect support: known-missing indices united with the
    /// thresholded support of `x_cs`. Always contains the known set.
    pub support_est: IndexSet,
}

// ---------------------------------------------------------------------------
// Modified-CS: l1 recovery with partial support knowledge
// ---------------------------------------------------------------------------

/// Soft threshold with zero shrinkage on `free` coordinates.
fn shrink(v: &Array1<f64>, lambda: f64, free: &[bool]) -> Array1<f64> {
    let mut out = v.clone();
    for (i, x) in out.iter_mut().enumerate() {
        if !free[i] {
            *x = x.signum() * (x.abs() - lambda).max(0.0);
        }
    }
    out
}

/// One accelerated proximal-gradient solve of
/// `min_x 0.5 ||y_tilde - Psi x||^2 + lambda ||x_{T^c}||_1`, warm-started at
/// `x0`. `yp = Psi y_tilde` is precomputed by the caller. Returns the final
/// iterate, its image `Psi x`, and the iterations consumed.
///
/// Relies on `Psi` being an orthogonal projector (`Psi' Psi = Psi`, norm 1):
/// the gradient is `Psi x - yp`, the unit step size is exact, and the
/// projector image of the momentum point follows by linearity from the two
/// latest iterate images — one operator application per iteration.
fn fista<F>(
    psi: &F,
    y_tilde: ArrayView1<'_, f64>,
    yp: &Array1<f64>,
    free: &[bool],
    lambda: f64,
    x0: Array1<f64>,
    obj_tol: f64,
    max_iter: usize,
) -> (Array1<f64>, Array1<f64>, usize)
where
    F: Fn(ArrayView1<'_, f64>) -> Array1<f64>,
{
    let l1 = |x: &Array1<f64>| -> f64 {
        x.iter()
            .zip(free.iter())
            .filter(|(_, &f)| !f)
            .map(|(v, _)| v.abs())
            .sum()
    };
    let mut x = x0;
    let mut px = psi(x.view());
    let mut x_prev = x.clone();
    let mut px_prev = px.clone();
    let mut momentum = 1.0f64;
    let mut prev_obj = f64::INFINITY;
    for it in 1..=max_iter {
        let m_new = 0.5 * (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt());
        let beta = (momentum - 1.0) / m_new;
        // Momentum point v = x + beta (x - x_prev) and its projector image.
        let mut v = x.clone();
        v.scaled_add(beta, &(&x - &x_prev));
        let mut pv = px.clone();
        pv.scaled_add(beta, &(&px - &px_prev));
        let grad = &pv - yp;
        let x_new = shrink(&(&v - &grad), lambda, free);
        let px_new = psi(x_new.view());
        let misfit = &y_tilde.to_owned() - &px_new;
        let obj = 0.5 * misfit.dot(&misfit) + lambda * l1(&x_new);
        momentum = if obj > prev_obj {
            // Non-monotone momentum step: restart acceleration.
            1.0
        } else {
            m_new
        };
        let done = it >= 5 && (prev_obj - obj).abs() <= obj_tol * obj.abs().max(1.0);
        x_prev = x;
        px_prev = px;
        x = x_new;
        px = px_new;
        prev_obj = obj;
        if momentum == 1.0 {
            // Restarted: next step is a plain gradient step from x.
            x_prev = x.clone();
            px_prev = px.clone();
        }
        if done {
            return (x, px, it);
        }
    }
    (x, px, max_iter)
}

/// l1 recovery of a sparse vector from its image under an orthogonal
/// projector, with zero penalty on an already-known partial support:
/// approximately solves
/// `min_x ||x_{T^c}||_1  subject to  ||y_tilde - Psi x|| <= xi`.
///
/// `psi_apply` must apply an orthogonal projector (symmetric, idempotent);
/// the subspace pipelines pass `Psi = I - P P'`. The constrained form is
/// realized as a penalized solve whose penalty is searched (geometric
/// bracket, then bisection) for the largest value that still meets the
/// residual bound — larger penalties give sparser, more conservative
/// estimates. Returns `(x, converged)`; when the shared iteration budget
/// runs out, the best feasible iterate found so far (or the
/// smallest-residual iterate if none was feasible) is returned with
/// `converged = false`.
pub fn modified_cs<F>(
    y_tilde: ArrayView1<'_, f64>,
    psi_apply: F,
    t_known: &IndexSet,
    xi: f64,
    max_iter: usize,
    obj_tol: f64,
) -> Result<(Array1<f64>, bool)>
where
    F: Fn(ArrayView1<'_, f64>) -> Array1<f64>,
{
    modified_cs_warm(y_tilde, psi_apply, t_known, xi, max_iter, obj_tol, None)
        .map(|out| (out.x, out.converged))
}

/// Full outcome of a [`modified_cs`] solve, including the settled penalty
/// (used to warm-start the solve on the next frame of a stream).
pub(crate) struct CsOutcome {
    pub x: Array1<f64>,
    pub lambda: f64,
    pub converged: bool,
}

/// [`modified_cs`] with an optional `(penalty, x)` warm start from a
/// previous, similar solve (consecutive frames of a stream).
pub(crate) fn modified_cs_warm<F>(
    y_tilde: ArrayView1<'_, f64>,
    psi_apply: F,
    t_known: &IndexSet,
    xi: f64,
    max_iter: usize,
    obj_tol: f64,
    warm: Option<(f64, &Array1<f64>)>,
) -> Result<CsOutcome>
where
    F: Fn(ArrayView1<'_, f64>) -> Array1<f64>,
{
    let n = y_tilde.len();
    if !(xi > 0.0) {
        return Err(RobustError::InvalidParams(format!(
            "xi must be positive, got {xi}"
        )));
    }
    if let Some(&max) = t_known.as_slice().last() {
        if max >= n {
            return Err(RobustError::ShapeMismatch(format!(
                "known-support index {max} out of range for dimension {n}"
            )));
        }
    }
    let mut free = vec![false; n];
    for &i in t_known.iter() {
        free[i] = true;
    }
    let yp = psi_apply(y_tilde);
    if yp.len() != n {
        return Err(RobustError::ShapeMismatch(format!(
            "psi_apply returned length {} for input length {n}",
            yp.len()
        )));
    }
    // Trivial input: zero is feasible and has minimal objective.
    if y_tilde.iter().all(|&v| v == 0.0) {
        return Ok(CsOutcome {
            x: Array1::zeros(n),
            lambda: 0.0,
            converged: true,
        });
    }
    // Largest useful penalty: above the infinity norm of the gradient at
    // zero the l1 term pins every penalized coordinate to zero.
    let lambda_max = yp
        .iter()
        .enumerate()
        .filter(|(i, _)| !free[*i])
        .map(|(_, v)| v.abs())
        .fold(0.0_f64, f64::max)
        .max(f64::MIN_POSITIVE);
    let slack = xi * (1.0 + 1e-3);

    let mut budget = max_iter;
    let mut lambda = warm
        .as_ref()
        .map(|(l, _)| l.clamp(1e-12 * lambda_max, lambda_max))
        .unwrap_or(lambda_max);
    let mut x = warm
        .as_ref()
        .map(|(_, x0)| (*x0).clone())
        .unwrap_or_else(|| Array1::zeros(n));
    let mut best_feasible: Option<(f64, Array1<f64>)> = None; // (penalty, x)
    let mut best_res = (f64::INFINITY, Array1::zeros(n), 0.0);
    let mut lo_feasible: Option<f64> = None;
    let mut hi_infeasible: Option<f64> = None;

    while budget > 0 {
        let cap = budget.min(400);
        let (sol, psol, used) = fista(
            &psi_apply,
            y_tilde,
            &yp,
            &free,
            lambda,
            x.clone(),
            obj_tol,
            cap,
        );
        budget = budget.saturating_sub(used);
        let misfit = &y_tilde.to_owned() - &psol;
        let res = misfit.dot(&misfit).sqrt();
        if res < best_res.0 {
            best_res = (res, sol.clone(), lambda);
        }
        if res <= slack {
            let better = best_feasible
                .as_ref()
                .map(|(l, _)| lambda >= *l)
                .unwrap_or(true);
            if better {
                best_feasible = Some((lambda, sol.clone()));
            }
            lo_feasible = Some(lo_feasible.map_or(lambda, |l: f64| l.max(lambda)));
            match hi_infeasible {
                // Feasible at the top of the range: sparsest useful answer.
                None if lambda >= lambda_max => break,
                None => lambda = (lambda * 4.0).min(lambda_max),
                Some(hi) => {
                    if hi / lambda <= 1.5 {
                        break;
                    }
                    lambda = (lambda * hi).sqrt();
                }
            }
        } else {
            hi_infeasible = Some(hi_infeasible.map_or(lambda, |h: f64| h.min(lambda)));
            match lo_feasible {
                None => {
                    lambda /= 4.0;
                    if lambda < 1e-12 * lambda_max {
                        break; // cannot reach the bound even unpenalized
                    }
                }
                Some(lo) => {
                    if lambda / lo <= 1.5 {
                        break;
                    }
                    lambda = (lambda * lo).sqrt();
                }
            }
        }
        x = sol;
    }
    Ok(match best_feasible {
        Some((lam, sol)) => CsOutcome {
            x: sol,
            lambda: lam,
            converged: budget > 0,
        },
        None => CsOutcome {
            x: best_res.1,
            lambda: best_res.2,
            converged: false,
        },
    })
}

/// Enlarged suspect support: the known set united with the coordinates
/// where the l1 estimate exceeds the threshold.
pub fn support_estimate(
    x_cs: &Array1<f64>,
    t_known: &IndexSet,
    omega_supp: f64,
) -> Result<IndexSet> {
    let n = x_cs.len();
    let extra: Vec<usize> = x_cs
        .iter()
        .enumerate()
        .filter(|(i, v)| v.abs() > omega_supp && !t_known.contains(*i))
        .map(|(i, _)| i)
        .collect();
    let extra = IndexSet::new(extra, n).map_err(RobustError::Linalg)?;
    Ok(t_known.union(&extra))
}

// ---------------------------------------------------------------------------
// Batch initialization: alternating projections
// ---------------------------------------------------------------------------

/// Constant the training pipeline writes into missing entries so they look
/// like removable outliers to the batch initialization.
pub const TRAIN_FILL_VALUE: f64 = 10.0;

/// Incoherence-style scale of the thresholding schedule: stage-`k`
/// thresholds are `ALTPROJ_THRESH_SCALE * r / sqrt(n * t) * (sigma_{k+1} +
/// 0.7^i sigma_k)`, an entrywise magnitude bound for the unfitted part of a
/// rank-`r` incoherent matrix with those singular values. The constant
/// carries the incoherence margin: it must keep the threshold floor above
/// the largest residual entry of the not-yet-fitted signal directions, or
/// thresholding starts flagging legitimate entries and the flag/refit
/// feedback loop strips real signal.
const ALTPROJ_THRESH_SCALE: f64 = 3.0;
/// Relative-change level at which the alternation is declared stable. Kept
/// at machine level so the iteration count is the effective control; fixed
/// points (clean input) still exit early.
const ALTPROJ_TOL: f64 = 1e-12;
/// Threshold decay per iteration.
const ALTPROJ_DECAY: f64 = 0.7;
/// Inner-iteration cap of the intermediate stages. Small on purpose: an
/// intermediate stage that loiters lets its threshold decay to the next
/// *signal* direction's entry level (the stage floor), which over-flags;
/// bulk corruption removal belongs to the full-rank final stage, whose
/// floor is the genuine noise tail.
const ALTPROJ_STAGE_CAP: usize = 4;

/// Outcome of [`altproj_decompose`]: the basis plus the sparse residual it
/// isolated (used to clean the training prefix for offline smoothing).
pub(crate) struct AltprojOutcome {
    pub basis: BasisMatrix,
    pub sparse: Array2<f64>,
}

/// Leading singular value by plain power iteration, started from the
/// largest-norm column. Returns 0 for a (near-)zero matrix. A slight
/// underestimate on small spectral gaps is acceptable for threshold use.
fn top_singular_value(a: &Array2<f64>, iters: usize) -> f64 {
    let mut best = 0usize;
    let mut best_sq = 0.0f64;
    for (j, c) in a.columns().into_iter().enumerate() {
        let sq = c.dot(&c);
        if sq > best_sq {
            best_sq = sq;
            best = j;
        }
    }
    if best_sq <= 0.0 {
        return 0.0;
    }
    let mut u = a.column(best).to_owned();
    let mut sigma = 0.0;
    for _ in 0..iters {
        let nu = u.dot(&u).sqrt();
        if nu == 0.0 {
            return 0.0;
        }
        u.mapv_inplace(|x| x / nu);
        let mut v = a.t().dot(&u);
        let nv = v.dot(&v).sqrt();
        if nv == 0.0 {
            return 0.0;
        }
        v.mapv_inplace(|x| x / nv);
        u = a.dot(&v);
        sigma = u.dot(&u).sqrt();
    }
    sigma
}

fn altproj_decompose(y_train: ArrayView2<'_, f64>, r: usize, iters: usize) -> Result<AltprojOutcome> {
    let (n, t) = (y_train.nrows(), y_train.ncols());
    if r == 0 || r > n.min(t) {
        return Err(RobustError::InvalidParams(format!(
            "rank {r} out of range for a {n}x{t} training batch"
        )));
    }
    let scale = ALTPROJ_THRESH_SCALE * r as f64 / ((n * t) as f64).sqrt();
    let y = y_train.to_owned();
    // Start of the threshold schedule: clip the data itself at the
    // top-singular-value level, so dominant spikes never enter the first
    // low-rank fit (they would otherwise be absorbed into its span and
    // kept there by every later pass).
    let zeta0 = scale * top_singular_value(&y, 8);
    let mut sparse = y.mapv(|v| if v.abs() > zeta0 { v } else { 0.0 });
    let mut basis: Option<Array2<f64>> = None;
    let mut rel_change = f64::INFINITY;

    // Staged rank schedule: fit rank k = 1..r, several thresholding passes
    // per stage. With only k directions of capacity, the fit is pinned to
    // the strongest signal directions and cannot chase corrupted entries,
    // so they stand at nearly full height above the fit and are removed
    // before the next (weaker) direction is admitted. A single full-rank
    // stage instead reaches a self-consistent partial fixed point: spare
    // directions fit part of the corruption, which then hides below the
    // threshold while burying the weakest signal directions.
    let budget = iters.max(r);
    let inner_cap = (budget / r).clamp(2, ALTPROJ_STAGE_CAP);
    let mut used = 0usize;
    // Smallest relative change seen in the final stage (stall reference).
    let mut stall_ref = f64::INFINITY;
    for k in 1..=r {
        let cap = if k == r {
            budget.saturating_sub(used).max(2)
        } else {
            inner_cap
        };
        let mut stage_low_rank: Option<Array2<f64>> = None;
        for i in 0..cap {
            let m = &y - &sparse;
            let out = crate::linalg::svd::block_power_svd(&m, k, basis.as_ref(), true)
                .map_err(RobustError::Linalg)?;
            let l_new = out.basis.dot(&out.basis.t().dot(&m));
            // sigma_{k+1}(M): top singular value of the part of M outside
            // the fitted span; the floor of the threshold schedule. (A
            // Frobenius proxy stalls here: leftover sparse mass keeps it
            // large even when the spectral tail is already small.)
            let fit_resid = &m - &l_new;
            let sigma_tail = top_singular_value(&fit_resid, 8);
            let zeta =
                scale * (sigma_tail + ALTPROJ_DECAY.powi(i as i32 + 1) * out.sigmas[k - 1]);
            let resid = &y - &l_new;
            sparse = resid.mapv(|v| if v.abs() > zeta { v } else { 0.0 });
            used += 1;
            let prev_norm_diff = stage_low_rank
                .as_ref()
                .map(|p| (&l_new - p).iter().map(|v| v * v).sum::<f64>().sqrt());
            let norm = l_new.iter().map(|v| v * v).sum::<f64>().sqrt();
            rel_change = match prev_norm_diff {
                Some(diff) if norm > 0.0 => diff / norm,
                Some(_) => 0.0,
                None => f64::INFINITY,
            };
            stage_low_rank = Some(l_new);
            basis = Some(out.basis);
            if i > 0 {
                // Early stage advance once the fit has stabilized; the
                // final stage polishes down to the numerical tolerance.
                if rel_change <= if k == r { ALTPROJ_TOL } else { 1e-3 } {
                    break;
                }
                // Final-stage stall: small, non-shrinking steps mean the
                // alternation has found its fixed point to the precision
                // the data supports; further passes only churn.
                if k == r && i >= 3 && rel_change <= 1e-2 && rel_change >= 0.5 * stall_ref {
                    break;
                }
            }
            if k == r {
                stall_ref = stall_ref.min(rel_change);
            }
        }
    }
    if !(rel_change <= 0.1) {
        return Err(RobustError::NoConvergence { iterations: used });
    }
    let b = basis.expect("at least one stage ran");
    Ok(AltprojOutcome {
        basis: BasisMatrix::from_orthonormal_unchecked(b),
        sparse,
    })
}

/// Batch initialization: decomposes the training matrix (missing entries
/// pre-filled with [`TRAIN_FILL_VALUE`]) into low-rank plus sparse by
/// alternating a staged-rank projection (rank 1 up to `r`) with hard
/// thresholding at a geometrically decreasing level, and returns the final
/// rank-`r` basis. `iters` is the total alternation budget across stages.
///
/// Fails with [`RobustError::NoConvergence`] when the alternation is still
/// moving by more than 10% relative once the threshold has decayed to its
/// floor.
pub fn altproj_init(y_train: ArrayView2<'_, f64>, r: usize, iters: usize) -> Result<BasisMatrix> {
    Ok(altproj_decompose(y_train, r, iters)?.basis)
}

// ---------------------------------------------------------------------------
// The robust tracker
// ---------------------------------------------------------------------------

/// Per-frame output of [`RobustTracker::step`].
#[derive(Debug, Clone)]
pub struct RobustFrameOutput {
    /// The wrapped tracker's output (fill, basis, events).
    pub frame: FrameOutput,
    /// The sparse-recovery outcome for this frame.
    pub sparse: SparseEstimate,
    /// The l1 solve met its residual bound within budget.
    pub cs_converged: bool,
}

/// Warm-start state carried between consecutive l1 solves.
struct CsWarm {
    lambda: f64,
    x: Array1<f64>,
}

/// Online tracker for streams with sparse outliers: demixes each frame with
/// [`modified_cs`] + [`support_estimate`], then drives an ordinary
/// [`Tracker`] on the outlier-suspect-zeroed frame with the enlarged
/// support. Build it from a training batch ([`RobustTracker::from_training_batch`])
/// or from a known basis ([`RobustTracker::with_initial_basis`]).
pub struct RobustTracker {
    tracker: Tracker,
    rparams: RobustParams,
    warm: Option<CsWarm>,
    supports: Vec<IndexSet>,
    cleaned: Vec<Array1<f64>>,
    cs_unconverged: usize,
}

impl RobustTracker {
    /// Start from a known basis at frame `start_t` (oracle initialization
    /// for tests, or a basis computed elsewhere).
    pub fn with_initial_basis(
        params: TrackerParams,
        variant: VariantParams,
        rparams: RobustParams,
        basis: BasisMatrix,
        start_t: usize,
    ) -> Result<Self> {
        rparams.validate(params.rank)?;
        let tracker = Tracker::with_initial_basis(params, variant, basis, start_t)?;
        Ok(Self {
            tracker,
            rparams,
            warm: None,
            supports: Vec::new(),
            cleaned: Vec::new(),
            cs_unconverged: 0,
        })
    }

    /// Batch initialization on a training prefix: missing entries are
    /// replaced by [`TRAIN_FILL_VALUE`], the result is decomposed by
    /// [`altproj_init`], and the tracker starts at `t = t_train` with the
    /// recovered basis.
    pub fn from_training_batch(
        params: TrackerParams,
        variant: VariantParams,
        rparams: RobustParams,
        y_train: ArrayView2<'_, f64>,
        missing_train: &[IndexSet],
    ) -> Result<Self> {
        rparams.validate(params.rank)?;
        if y_train.ncols() != rparams.t_train {
            return Err(RobustError::ShapeMismatch(format!(
                "training batch has {} columns, expected t_train = {}",
                y_train.ncols(),
                rparams.t_train
            )));
        }
        if missing_train.len() != y_train.ncols() {
            return Err(RobustError::ShapeMismatch(format!(
                "{} support sets for {} training frames",
                missing_train.len(),
                y_train.ncols()
            )));
        }
        let mut filled = y_train.to_owned();
        for (t, miss) in missing_train.iter().enumerate() {
            for &i in miss.iter() {
                filled[[i, t]] = TRAIN_FILL_VALUE;
            }
        }
        let basis = altproj_init(filled.view(), params.rank, rparams.altproj_iters)?;
        Self::with_initial_basis(params, variant, rparams, basis, y_train.ncols())
    }

    /// The wrapped tracker (schedule state, events, eras).
    pub fn tracker(&self) -> &Tracker {
        &self.tracker
    }

    /// Enlarged supports of the frames stepped so far, in order.
    pub fn supports(&self) -> &[IndexSet] {
        &self.supports
    }

    /// Frames whose l1 solve missed its residual bound within budget.
    pub fn cs_unconverged(&self) -> usize {
        self.cs_unconverged
    }

    /// Consumes one frame `(y_t, T_t)`, `y_t` zero on the missing set.
    /// Demixes, enlarges the support, and steps the wrapped tracker on the
    /// cleaned frame.
    pub fn step(
        &mut self,
        y: ArrayView1<'_, f64>,
        missing: &IndexSet,
    ) -> Result<RobustFrameOutput> {
        let n = y.len();
        let basis = self.tracker.basis().cloned();
        let psi = |v: ArrayView1<'_, f64>| -> Array1<f64> {
            match &basis {
                Some(p) => {
                    let c = p.as_array().t().dot(&v);
                    &v.to_owned() - &p.as_array().dot(&c)
                }
                None => v.to_owned(),
            }
        };
        let y_tilde = psi(y);
        let y_norm = y.dot(&y).sqrt();
        let (omega_t, xi_t) = self.rparams.frame_thresholds(y_norm, n);
        let warm_ref = self.warm.as_ref().map(|w| (w.lambda, &w.x));
        let cs = modified_cs_warm(
            y_tilde.view(),
            &psi,
            missing,
            xi_t,
            self.rparams.cs_max_iter,
            self.rparams.cs_obj_tol,
            warm_ref,
        )?;
        let (x_cs, cs_converged) = (cs.x, cs.converged);
        if !cs_converged {
            self.cs_unconverged += 1;
        }
        let support_est = support_estimate(&x_cs, missing, omega_t)?;
        let mut cleaned = y.to_owned();
        for &i in support_est.iter() {
            cleaned[i] = 0.0;
        }
        let frame = self.tracker.step(cleaned.view(), &support_est)?;
        // Remember the settled penalty and solution for the next frame's
        // warm start; supports drift slowly between frames.
        if cs.lambda > 0.0 {
            self.warm = Some(CsWarm {
                lambda: cs.lambda,
                x: x_cs.clone(),
            });
        }
        self.supports.push(support_est.clone());
        self.cleaned.push(cleaned);
        Ok(RobustFrameOutput {
            frame,
            sparse: SparseEstimate { x_cs, support_est },
            cs_converged,
        })
    }

    /// One final update on the trailing partial window (for completion).
    pub fn finish_partial_window(&mut self) -> Result<bool> {
        Ok(self.tracker.finish_partial_window()?)
    }
}

// ---------------------------------------------------------------------------
// Whole-stream driving and robust completion
// ---------------------------------------------------------------------------

/// Everything recorded from one robust pass over a stream.
#[derive(Debug, Clone)]
pub struct RobustRun {
    /// Online estimates, one column per frame; the training prefix holds
    /// the batch decomposition's low-rank fit re-filled during smoothing.
    pub fills: Array2<f64>,
    /// Enlarged suspect support per frame, as used for the offline
    /// smoothing. Frames before the first era's completion (the training
    /// prefix and the initialization ramp) are re-estimated against that
    /// era's final basis when it converged; otherwise the training prefix
    /// keeps the batch decomposition's sparse support united with the
    /// missing set.
    pub supports: Vec<IndexSet>,
    /// All tracker events, in frame order.
    pub events: Vec<TimedEvent>,
    /// Per-era records.
    pub eras: Vec<EraRecord>,
    /// Frames whose l1 solve missed its residual bound.
    pub cs_unconverged: usize,
    /// Per-frame degraded-fill flags (training prefix: `false`).
    pub degraded: Vec<bool>,
    /// Basis in effect after each frame (training prefix: the initial one).
    pub bases: Vec<Option<Arc<BasisMatrix>>>,
}

/// Result of [`robust_complete`].
#[derive(Debug, Clone)]
pub struct RobustCompletion {
    /// The smoothed `n x d` low-rank estimate.
    pub l_hat: Array2<f64>,
    /// The online pass it was built from.
    pub run: RobustRun,
}

/// Robust matrix completion over a full stream: batch initialization on the
/// first `t_train` frames, online robust tracking over the rest (plus a
/// final partial-window update), then offline smoothing over all frames
/// with every frame's outlier-suspect entries treated as missing.
pub fn robust_complete(
    stream: &crate::datagen::ObservationStream,
    params: &TrackerParams,
    variant: &VariantParams,
    rparams: &RobustParams,
) -> Result<RobustCompletion> {
    let (n, d) = (stream.n, stream.d);
    let t_train = rparams.t_train;
    if d <= t_train {
        return Err(RobustError::InvalidParams(format!(
            "stream length {d} must exceed t_train = {t_train}"
        )));
    }
    rparams.validate(params.rank)?;

    // --- batch initialization on the training prefix ---
    let mut filled = stream.y.slice(s![.., ..t_train]).to_owned();
    for t in 0..t_train {
        for &i in stream.missing[t].iter() {
            filled[[i, t]] = TRAIN_FILL_VALUE;
        }
    }
    let decomp = altproj_decompose(filled.view(), params.rank, rparams.altproj_iters)?;

    let mut tracker = RobustTracker::with_initial_basis(
        params.clone(),
        *variant,
        rparams.clone(),
        decomp.basis.clone(),
        t_train,
    )?;

    // Training-prefix supports: missing united with the sparse residual the
    // batch decomposition isolated (which includes the filled entries).
    let mut supports: Vec<IndexSet> = Vec::with_capacity(d);
    let mut cleaned = Array2::<f64>::zeros((n, d));
    let mut fills = Array2::<f64>::zeros((n, d));
    let mut degraded = vec![false; d];
    let mut bases: Vec<Option<Arc<BasisMatrix>>> = Vec::with_capacity(d);
    let init_arc = Arc::new(decomp.basis);
    for t in 0..t_train {
        let extra: Vec<usize> = (0..n)
            .filter(|&i| decomp.sparse[[i, t]] != 0.0 && !stream.missing[t].contains(i))
            .collect();
        let extra = IndexSet::new(extra, n).map_err(RobustError::Linalg)?;
        let sup = stream.missing[t].union(&extra);
        let mut col = stream.y.column(t).to_owned();
        for &i in sup.iter() {
            col[i] = 0.0;
        }
        cleaned.column_mut(t).assign(&col);
        // Online fallback for the prefix: the cleaned observation itself
        // (smoothing re-fills it against the final era-0 basis).
        fills.column_mut(t).assign(&col);
        supports.push(sup);
        bases.push(Some(Arc::clone(&init_arc)));
    }

    // --- online robust pass ---
    let sync_window = variant.mode.reuse_rounds() > 0;
    for t in t_train..d {
        let out = tracker.step(stream.column(t), stream.missing_at(t))?;
        fills.column_mut(t).assign(&out.frame.ell_hat);
        degraded[t] = out.frame.degraded;
        bases.push(out.frame.basis.clone());
        cleaned
            .column_mut(t)
            .assign(&tracker.cleaned[t - t_train]);
        supports.push(out.sparse.support_est.clone());
        if sync_window && out.frame.event.is_some() {
            for (wt, f) in tracker.tracker.window_fills() {
                fills.column_mut(wt).assign(f);
            }
        }
    }
    if tracker.finish_partial_window()? && sync_window {
        for (wt, f) in tracker.tracker.window_fills() {
            fills.column_mut(wt).assign(f);
        }
    }
    let mut cs_unconverged = tracker.cs_unconverged;

    // --- offline support refinement for the initialization span ---
    // The batch decomposition separates corruption only partially when the
    // outlier pattern is itself low-rank-ish (structured supports put the
    // outliers' mean pattern above the weakest signal directions, and any
    // rank-r fit absorbs it), and the first online frames estimate supports
    // against a still-converging basis. Leaked corruption in either span
    // would contaminate the smoothing solves, so once the first era has a
    // converged basis, re-estimate supports per frame against it: sparse
    // recovery against an accurate basis has no such degeneracy.
    let eras = tracker.tracker.eras();
    if let Some(era0) = eras.first() {
        if let (Some(completed), Some(basis)) = (era0.completed, era0.basis.clone()) {
            let refine_until = completed.min(d);
            let p = basis.as_array();
            let psi = |v: ArrayView1<'_, f64>| -> Array1<f64> {
                let c = p.t().dot(&v);
                &v.to_owned() - &p.dot(&c)
            };
            let mut warm: Option<CsWarm> = None;
            for t in 0..refine_until {
                let y = stream.column(t);
                let missing = stream.missing_at(t);
                let y_tilde = psi(y);
                let y_norm = y.dot(&y).sqrt();
                let (omega_t, xi_t) = rparams.frame_thresholds(y_norm, n);
                let warm_ref = warm.as_ref().map(|w| (w.lambda, &w.x));
                let cs = modified_cs_warm(
                    y_tilde.view(),
                    &psi,
                    missing,
                    xi_t,
                    rparams.cs_max_iter,
                    rparams.cs_obj_tol,
                    warm_ref,
                )?;
                if !cs.converged {
                    cs_unconverged += 1;
                }
                let sup = support_estimate(&cs.x, missing, omega_t)?;
                if cs.lambda > 0.0 {
                    warm = Some(CsWarm {
                        lambda: cs.lambda,
                        x: cs.x,
                    });
                }
                let mut col = y.to_owned();
                for &i in sup.iter() {
                    col[i] = 0.0;
                }
                cleaned.column_mut(t).assign(&col);
                supports[t] = sup;
            }
        }
    }

    // --- offline smoothing with enlarged supports ---
    let l_hat = smooth(
        &cleaned,
        &supports,
        tracker.tracker.eras(),
        params,
        Some(&fills),
    )?;
    let run = RobustRun {
        fills,
        supports,
        events: tracker.tracker.events().to_vec(),
        eras: tracker.tracker.eras().to_vec(),
        cs_unconverged,
        degraded,
        bases,
    };
    Ok(RobustCompletion { l_hat, run })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::orthonormalize;
    use crate::variants::VariantMode;
    use ndarray::Array2;
    use rand::Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian(n: usize, d: usize, seed: u64) -> Array2<f64> {
        let mut rng = crate::seeds::rng_for(seed, 402);
        Array2::from_shape_fn((n, d), |_| StandardNormal.sample(&mut rng))
    }

    fn random_basis(n: usize, r: usize, seed: u64) -> BasisMatrix {
        orthonormalize(&gaussian(n, r, seed)).unwrap()
    }

    fn projector<'a>(
        basis: &'a BasisMatrix,
    ) -> impl Fn(ArrayView1<'_, f64>) -> Array1<f64> + 'a {
        move |v: ArrayView1<'_, f64>| {
            let c = basis.as_array().t().dot(&v);
            &v.to_owned() - &basis.as_array().dot(&c)
        }
    }

    #[test]
    fn modified_cs_zero_input_returns_zero() {
        let basis = random_basis(40, 5, 1);
        let y = Array1::<f64>::zeros(40);
        let t = IndexSet::new(vec![3, 7], 40).unwrap();
        let (x, ok) = modified_cs(y.view(), projector(&basis), &t, 0.5, 500, 1e-8).unwrap();
        assert!(ok);
        assert!(x.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn modified_cs_recovers_single_outlier_location_and_size() {
        let n = 60;
        let basis = random_basis(n, 4, 2);
        let psi = projector(&basis);
        let t_known = IndexSet::new(vec![5, 6], n).unwrap();
        // Signal: outlier of 20 at a free index plus arbitrary known-support
        // content.
        let mut x_true = Array1::<f64>::zeros(n);
        x_true[30] = 20.0;
        x_true[5] = -3.0;
        let y_tilde = psi(x_true.view());
        let xi = 0.05;
        let (x, ok) = modified_cs(y_tilde.view(), &psi, &t_known, xi, 2000, 1e-9).unwrap();
        assert!(ok);
        // Feasible within the documented slack.
        let res = &psi(x.view()) - &y_tilde;
        assert!(res.dot(&res).sqrt() <= xi * (1.0 + 1e-3));
        // The estimate concentrates on the outlier: dominant coordinate is
        // index 30 with nearly the right value.
        assert!(
            (x[30] - 20.0).abs() <= 1.0,
            "outlier coordinate recovered as {}",
            x[30]
        );
        let spurious = x
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != 30 && !t_known.contains(*i))
            .map(|(_, v)| v.abs())
            .fold(0.0_f64, f64::max);
        assert!(spurious <= 2.0, "largest spurious magnitude {spurious}");
    }

    #[test]
    fn modified_cs_known_support_absorbs_everything_without_penalty() {
        let n = 50;
        let basis = random_basis(n, 6, 3);
        let psi = projector(&basis);
        let t_known = IndexSet::new(vec![2, 11, 27], n).unwrap();
        let mut x_true = Array1::<f64>::zeros(n);
        x_true[2] = 4.0;
        x_true[11] = -7.0;
        x_true[27] = 1.5;
        let y_tilde = psi(x_true.view());
        let (x, ok) = modified_cs(y_tilde.view(), &psi, &t_known, 1e-6, 2000, 1e-10).unwrap();
        assert!(ok);
        let off_support: f64 = x
            .iter()
            .enumerate()
            .filter(|(i, _)| !t_known.contains(*i))
            .map(|(_, v)| v.abs())
            .sum();
        assert!(
            off_support <= 1e-4,
            "free-coordinate l1 mass {off_support}"
        );
        let res = &psi(x.view()) - &y_tilde;
        assert!(res.dot(&res).sqrt() <= 1e-6 * (1.0 + 1e-3));
    }

    #[test]
    fn support_estimate_unions_and_thresholds() {
        let t = IndexSet::new(vec![1, 4], 10).unwrap();
        let zero = Array1::<f64>::zeros(10);
        assert_eq!(
            support_estimate(&zero, &t, 5.0).unwrap().as_slice(),
            t.as_slice()
        );
        let mut x = Array1::<f64>::zeros(10);
        x[7] = 12.0;
        x[8] = 0.1;
        let got = support_estimate(&x, &t, 5.0).unwrap();
        assert_eq!(got.as_slice(), &[1, 4, 7]);
    }

    #[test]
    fn support_estimate_always_contains_known_set() {
        let mut rng = crate::seeds::rng_for(77, 403);
        for trial in 0..50 {
            let n = 30;
            let x = Array1::from_shape_fn(n, |_| rng.random_range(-10.0..10.0));
            let idx: Vec<usize> = (0..n).filter(|_| rng.random::<f64>() < 0.2).collect();
            let t = IndexSet::new(idx, n).unwrap();
            let got = support_estimate(&x, &t, rng.random_range(0.1..5.0)).unwrap();
            for &i in t.iter() {
                assert!(got.contains(i), "trial {trial}: lost known index {i}");
            }
        }
    }

    /// Builds a small rank-r training batch with optional outliers.
    fn low_rank_batch(
        n: usize,
        t: usize,
        r: usize,
        seed: u64,
    ) -> (Array2<f64>, BasisMatrix) {
        let basis = random_basis(n, r, seed);
        let mut rng = crate::seeds::rng_for(seed, 404);
        let coeff = Array2::from_shape_fn((r, t), |_| rng.random_range(-5.0..5.0_f64));
        (basis.as_array().dot(&coeff), basis)
    }

    #[test]
    fn altproj_clean_input_recovers_exact_subspace() {
        let (y, basis) = low_rank_batch(40, 60, 4, 10);
        let got = altproj_init(y.view(), 4, 100).unwrap();
        let err = crate::linalg::sin_theta_max(&basis, &got).unwrap();
        assert!(err <= 1e-8, "clean batch subspace error {err}");
    }

    #[test]
    fn altproj_removes_huge_outliers_in_first_pass() {
        let (y_clean, basis) = low_rank_batch(50, 80, 3, 11);
        let clean_err = {
            let got = altproj_init(y_clean.view(), 3, 100).unwrap();
            crate::linalg::sin_theta_max(&basis, &got).unwrap()
        };
        let mut y = y_clean.clone();
        let mut rng = crate::seeds::rng_for(11, 405);
        // 1% entries at +/- 1e6.
        let total = y.len() / 100;
        for _ in 0..total {
            let i = rng.random_range(0..50);
            let t = rng.random_range(0..80);
            y[[i, t]] = if rng.random::<bool>() { 1e6 } else { -1e6 };
        }
        let got = altproj_init(y.view(), 3, 100).unwrap();
        let err = crate::linalg::sin_theta_max(&basis, &got).unwrap();
        assert!(
            err <= (2.0 * clean_err).max(1e-7),
            "outlier batch error {err} vs clean {clean_err}"
        );
    }

    #[test]
    fn altproj_moderate_outliers_reach_useful_accuracy() {
        let (y_clean, basis) = low_rank_batch(60, 90, 4, 12);
        let mut y = y_clean.clone();
        let mut rng = crate::seeds::rng_for(12, 406);
        // 5% entries with magnitudes in the tracking experiments' range.
        let total = y.len() / 20;
        for _ in 0..total {
            let i = rng.random_range(0..60);
            let t = rng.random_range(0..90);
            let mag = rng.random_range(10.0..25.0_f64);
            y[[i, t]] = mag;
        }
        let got = altproj_init(y.view(), 4, 100).unwrap();
        let err = crate::linalg::sin_theta_max(&basis, &got).unwrap();
        assert!(err <= 0.25, "moderate-outlier init error {err}");
    }

    /// Experiment-scale initialization: rank-30 signal with a condition
    /// number of 100 across coefficient variances, 5% outliers at
    /// magnitudes 10..25 on unstructured (independent per-entry) supports.
    /// The recovered basis must land within the tracker's correction
    /// radius, sin_theta <= 0.25.
    #[test]
    fn altproj_experiment_scale_outliers_within_correction_radius() {
        let (n, t, r) = (1000, 400, 30);
        let subspaces = crate::datagen::gen_subspaces(n, r, 0, 0.0, 31).unwrap();
        let cspec = crate::datagen::CoefficientSpec::new(r, 100.0).unwrap();
        let coeffs = crate::datagen::gen_coefficients(&cspec, t, 31);
        let mut y = subspaces[0].as_array().dot(&coeffs);
        // 5%-dense supports, reusing the Bernoulli support generator.
        let sup = crate::datagen::gen_bernoulli_supports(n, t, 0.95, 31).unwrap();
        let mut rng = crate::seeds::rng_for(31, 408);
        for (col, s) in sup.iter().enumerate() {
            for &i in s.iter() {
                y[[i, col]] += rng.random_range(10.0..25.0_f64);
            }
        }
        let got = altproj_init(y.view(), r, 500).unwrap();
        let err = crate::linalg::sin_theta_max(&subspaces[0], &got).unwrap();
        assert!(err <= 0.25, "experiment-scale init error {err}");
    }

    #[test]
    fn altproj_rejects_bad_rank() {
        let y = gaussian(10, 8, 13);
        assert!(matches!(
            altproj_init(y.view(), 0, 5),
            Err(RobustError::InvalidParams(_))
        ));
        assert!(matches!(
            altproj_init(y.view(), 9, 5),
            Err(RobustError::InvalidParams(_))
        ));
    }

    #[test]
    fn params_validation_catches_bad_values() {
        assert!(RobustParams::from_x_min(0.0, 100).is_err());
        let mut p = RobustParams::from_x_min(10.0, 100).unwrap();
        p.t_train = 20;
        assert!(p.validate(30).is_err());
        p.t_train = 100;
        assert!(p.validate(30).is_ok());
        p.xi = 0.0;
        assert!(p.validate(30).is_err());
    }

    /// With no outliers and thresholds high enough that no spurious support
    /// is added, the robust tracker must reproduce the plain tracker.
    #[test]
    fn zero_outlier_stream_reduces_to_plain_tracker() {
        let n = 50;
        let d = 200;
        let r = 3;
        let basis = random_basis(n, r, 20);
        let mut rng = crate::seeds::rng_for(20, 407);
        let mut y = Array2::<f64>::zeros((n, d));
        let mut missing: Vec<IndexSet> = Vec::new();
        for t in 0..d {
            let a = Array1::from_shape_fn(r, |_| rng.random_range(-3.0..3.0_f64));
            let mut col = basis.as_array().dot(&a);
            let idx: Vec<usize> = (0..n).filter(|_| rng.random::<f64>() < 0.1).collect();
            let sup = IndexSet::new(idx, n).unwrap();
            for &i in sup.iter() {
                col[i] = 0.0;
            }
            y.column_mut(t).assign(&col);
            missing.push(sup);
        }
        let mut params = TrackerParams::new(r, 3);
        params.alpha = 10;
        let variant = VariantParams::new(VariantMode::Basic);
        let rparams = RobustParams::from_x_min(10.0, 20).unwrap();

        let mut plain = Tracker::with_initial_basis(
            params.clone(),
            variant,
            basis.clone(),
            0,
        )
        .unwrap();
        let mut robust = RobustTracker::with_initial_basis(
            params.clone(),
            variant,
            rparams,
            basis.clone(),
            0,
        )
        .unwrap();
        let mut max_diff = 0.0_f64;
        for t in 0..d {
            let a = plain.step(y.column(t), &missing[t]).unwrap();
            let b = robust.step(y.column(t), &missing[t]).unwrap();
            assert_eq!(
                b.sparse.support_est.as_slice(),
                missing[t].as_slice(),
                "frame {t}: spurious support"
            );
            let diff = (&a.ell_hat - &b.frame.ell_hat)
                .iter()
                .map(|v| v.abs())
                .fold(0.0_f64, f64::max);
            max_diff = max_diff.max(diff);
        }
        assert!(max_diff <= 1e-12, "fill divergence {max_diff}");
    }

    /// Feasibility contract of the l1 solve holds on random instances.
    #[test]
    fn modified_cs_feasibility_contract_random_instances() {
        let mut ok_count = 0;
        for seed in 0..20 {
            let n = 40;
            let basis = random_basis(n, 5, 100 + seed);
            let psi = projector(&basis);
            let mut rng = crate::seeds::rng_for(seed, 408);
            let mut x_true = Array1::<f64>::zeros(n);
            for _ in 0..3 {
                let i = rng.random_range(0..n);
                x_true[i] = rng.random_range(5.0..15.0_f64);
            }
            let t_known =
                IndexSet::new((0..n).filter(|_| rng.random::<f64>() < 0.1).collect(), n)
                    .unwrap();
            let y_tilde = psi(x_true.view());
            let xi = 0.2;
            let (x, ok) = modified_cs(y_tilde.view(), &psi, &t_known, xi, 2000, 1e-8).unwrap();
            if ok {
                ok_count += 1;
                let res = &psi(x.view()) - &y_tilde;
                assert!(
                    res.dot(&res).sqrt() <= xi * (1.0 + 1e-3),
                    "seed {seed}: reported feasible but residual violates the bound"
                );
            }
        }
        assert!(ok_count >= 18, "only {ok_count}/20 solves feasible");
    }
}
