//! Synthetic stream generation: piecewise-constant subspaces, bounded
//! uniform coefficients with a prescribed condition number, missing-entry
//! support models (Bernoulli / moving object), additive noise, sparse
//! outliers, missing-fraction statistics, and CSV import/export.
//!
//! All generators are pure functions of their parameters and a single 64-bit
//! seed; independent random streams (subspaces, coefficients, supports,
//! noise, outliers) are split off the seed so regenerating one component
//! never perturbs the others.

use crate::linalg::{orthonormalize, skew_expm, BasisMatrix, IndexSet, LinalgError};
use crate::seeds::{self, stream};
use ndarray::{Array1, Array2, ArrayView1};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use thiserror::Error;

/// Errors from generation, assembly, or stream (de)serialization.
#[derive(Debug, Error)]
pub enum DatagenError {
    /// Inconsistent dimensions between components.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    /// A parameter outside its documented domain.
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    /// Propagated linear-algebra failure.
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    /// Filesystem failure during import/export.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    /// Unparsable file content; `line` is 1-based within the offending file.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}

type Result<T> = std::result::Result<T, DatagenError>;

// ---------------------------------------------------------------------------
// Coefficients
// ---------------------------------------------------------------------------

/// Bounded-uniform coefficient model: coordinate `i` (1-based) of every
/// coefficient vector is uniform on `[-q_i, q_i]` with
/// `q_i = sqrt(f) - sqrt(f)*(i-1)/(2r)` for `i < r` and `q_r = 1`, so the
/// coefficient covariance is diagonal with `lambda_i = q_i^2 / 3` and
/// condition number `lambda_1 / lambda_r = f`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoefficientSpec {
    /// Number of coefficient coordinates (the subspace rank).
    pub r: usize,
    /// Condition number of the coefficient covariance (`>= 1`).
    pub f: f64,
}

impl CoefficientSpec {
    /// Validates `r >= 1` and `f >= 1`.
    pub fn new(r: usize, f: f64) -> Result<Self> {
        if r < 1 {
            return Err(DatagenError::InvalidParam("rank r must be >= 1".into()));
        }
        if !(f >= 1.0) {
            return Err(DatagenError::InvalidParam(format!(
                "condition number f must be >= 1, got {f}"
            )));
        }
        Ok(Self { r, f })
    }

    /// Per-coordinate half-widths `q_1 >= ... >= q_{r-1} > q_r = 1`.
    pub fn half_widths(&self) -> Vec<f64> {
        let rf = self.r as f64;
        (1..=self.r)
            .map(|i| {
                if i == self.r {
                    1.0
                } else {
                    self.f.sqrt() - self.f.sqrt() * (i as f64 - 1.0) / (2.0 * rf)
                }
            })
            .collect()
    }

    /// Smallest coefficient variance, `q_r^2 / 3 = 1/3`.
    pub fn lambda_min(&self) -> f64 {
        1.0 / 3.0
    }

    /// Largest coefficient variance, `q_1^2 / 3` (equals `f/3` for `r > 1`).
    pub fn lambda_max(&self) -> f64 {
        let q1 = self.half_widths()[0];
        q1 * q1 / 3.0
    }
}

/// Draws an `r x d` coefficient matrix with independent entries, row `i`
/// uniform on `[-q_i, q_i]`.
pub fn gen_coefficients(spec: &CoefficientSpec, d: usize, seed: u64) -> Array2<f64> {
    let q = spec.half_widths();
    let mut rng = seeds::rng_for(seed, stream::COEFFICIENTS);
    Array2::from_shape_fn((spec.r, d), |(i, _)| rng.random_range(-q[i]..=q[i]))
}

/// Draws coefficients whose half-widths alternate frame to frame: frames
/// 1, 3, 5, ... (1-based) use `q_i + lambda_min/2` and frames 2, 4, 6, ...
/// use `q_i - lambda_min/2`, while the last coordinate keeps `q_r = 1`.
/// This is the time-varying-covariance stress case.
pub fn gen_coefficients_alternating(spec: &CoefficientSpec, d: usize, seed: u64) -> Array2<f64> {
    let base = spec.half_widths();
    let offset = spec.lambda_min() / 2.0;
    let mut rng = seeds::rng_for(seed, stream::COEFFICIENTS);
    let mut out = Array2::zeros((spec.r, d));
    for t in 0..d {
        // Internal frame t is 1-based frame t+1: even internal t is odd
        // 1-based, which takes the + offset.
        let shift = if t % 2 == 0 { offset } else { -offset };
        for i in 0..spec.r {
            let q = if i + 1 == spec.r {
                1.0
            } else {
                (base[i] + shift).max(0.0)
            };
            out[[i, t]] = rng.random_range(-q..=q);
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Subspaces and ground truth
// ---------------------------------------------------------------------------

/// Generates `j_count + 1` piecewise-constant subspace bases: the first is an
/// orthonormalized standard-normal draw; each successive basis is the
/// previous one rotated by `exp(gamma * B)` for a fresh random skew-symmetric
/// `B` (re-orthonormalized to remove rounding drift, which preserves span).
///
/// `gamma = 0` returns exact copies of the first basis.
pub fn gen_subspaces(
    n: usize,
    r: usize,
    j_count: usize,
    gamma: f64,
    seed: u64,
) -> Result<Vec<BasisMatrix>> {
    if r > n {
        return Err(DatagenError::InvalidParam(format!(
            "rank {r} exceeds ambient dimension {n}"
        )));
    }
    if gamma < 0.0 {
        return Err(DatagenError::InvalidParam(
            "rotation scale gamma must be >= 0".into(),
        ));
    }
    let mut rng = seeds::rng_for(seed, stream::SUBSPACE);
    let raw = Array2::from_shape_fn((n, r), |_| StandardNormal.sample(&mut rng));
    let p0 = orthonormalize(&raw)?;
    let mut out = Vec::with_capacity(j_count + 1);
    out.push(p0);
    for _ in 0..j_count {
        let prev = out.last().expect("non-empty");
        if gamma == 0.0 {
            out.push(prev.clone());
            continue;
        }
        let b_tilde: Array2<f64> = Array2::from_shape_fn((n, n), |_| StandardNormal.sample(&mut rng));
        let b = &b_tilde - &b_tilde.t();
        let rot = skew_expm(&b, gamma)?;
        let rotated = rot.dot(prev.as_array());
        out.push(orthonormalize(&rotated)?);
    }
    Ok(out)
}

/// The generating model of one synthetic run: bases, change times,
/// coefficients, and the noiseless data matrix.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    /// Ambient dimension.
    pub n: usize,
    /// Number of frames.
    pub d: usize,
    /// Subspace rank.
    pub r: usize,
    /// Bases `P_0 .. P_J`; basis `j` is active on `[t_j, t_{j+1})` with
    /// `t_0 = 0` and `t_{J+1} = d` (frames are 0-based).
    pub subspaces: Vec<BasisMatrix>,
    /// Change times `t_1 < ... < t_J`: frame `t_j` is the first frame that
    /// uses basis `j`.
    pub change_times: Vec<usize>,
    /// Coefficient matrix, `r x d`.
    pub coefficients: Array2<f64>,
    /// Noiseless data, `n x d`, column `t = P_(t) a_t`.
    pub clean: Array2<f64>,
    /// Ratio of the per-entry noise standard deviation to
    /// `sqrt(lambda_min)`; zero for noiseless runs. Informational — the
    /// absolute noise level is chosen at assembly time.
    pub noise_std_ratio: f64,
}

impl GroundTruth {
    /// Assembles the truth and materializes the clean matrix. Validates that
    /// all bases share `(n, r)`, change times are strictly increasing and in
    /// range, every segment is at least `r` frames long, and the coefficient
    /// matrix is `r x d`.
    pub fn new(
        subspaces: Vec<BasisMatrix>,
        change_times: Vec<usize>,
        coefficients: Array2<f64>,
        noise_std_ratio: f64,
    ) -> Result<Self> {
        let first = subspaces
            .first()
            .ok_or_else(|| DatagenError::InvalidParam("at least one subspace required".into()))?;
        let (n, r) = (first.ambient_dim(), first.rank());
        if subspaces
            .iter()
            .any(|p| p.ambient_dim() != n || p.rank() != r)
        {
            return Err(DatagenError::ShapeMismatch(
                "all subspace bases must share (n, r)".into(),
            ));
        }
        if change_times.len() + 1 != subspaces.len() {
            return Err(DatagenError::ShapeMismatch(format!(
                "{} bases need exactly {} change times, got {}",
                subspaces.len(),
                subspaces.len() - 1,
                change_times.len()
            )));
        }
        if coefficients.nrows() != r {
            return Err(DatagenError::ShapeMismatch(format!(
                "coefficients have {} rows, expected rank {r}",
                coefficients.nrows()
            )));
        }
        let d = coefficients.ncols();
        let mut boundaries = Vec::with_capacity(change_times.len() + 2);
        boundaries.push(0);
        boundaries.extend_from_slice(&change_times);
        boundaries.push(d);
        for w in boundaries.windows(2) {
            if w[1] <= w[0] || w[1] - w[0] < r {
                return Err(DatagenError::InvalidParam(format!(
                    "segment [{}, {}) shorter than rank {r}",
                    w[0], w[1]
                )));
            }
        }
        let mut clean = Array2::zeros((n, d));
        let mut seg = 0usize;
        for t in 0..d {
            while seg < change_times.len() && t >= change_times[seg] {
                seg += 1;
            }
            let col = subspaces[seg].as_array().dot(&coefficients.column(t));
            clean.column_mut(t).assign(&col);
        }
        Ok(Self {
            n,
            d,
            r,
            subspaces,
            change_times,
            coefficients,
            clean,
            noise_std_ratio,
        })
    }

    /// Index `j` of the subspace active at frame `t`.
    pub fn segment_index(&self, t: usize) -> usize {
        debug_assert!(t < self.d);
        self.change_times.partition_point(|&c| c <= t)
    }

    /// The subspace active at frame `t`.
    pub fn subspace_at(&self, t: usize) -> &BasisMatrix {
        &self.subspaces[self.segment_index(t)]
    }
}

// ---------------------------------------------------------------------------
// Missing-entry supports
// ---------------------------------------------------------------------------

/// Which entries go unobserved.
#[derive(Debug, Clone)]
pub enum SupportModel {
    /// Each entry observed independently with probability `observe_prob`.
    Bernoulli {
        /// Probability an entry is observed (`0 < p <= 1`).
        observe_prob: f64,
    },
    /// A contiguous block of `block` indices is missing each frame; the
    /// block start advances cyclically by `ceil(block * motion)` per frame.
    MovingObject {
        /// Block size (`1 <= block < n`).
        block: usize,
        /// Motion parameter (`0 < motion <= 1`).
        motion: f64,
    },
    /// Fixed per-frame supports supplied by the caller.
    Replay(Vec<IndexSet>),
}

/// Draws Bernoulli missing supports: each index is missing independently
/// with probability `1 - observe_prob`.
pub fn gen_bernoulli_supports(
    n: usize,
    d: usize,
    observe_prob: f64,
    seed: u64,
) -> Result<Vec<IndexSet>> {
    if !(observe_prob > 0.0 && observe_prob <= 1.0) {
        return Err(DatagenError::InvalidParam(format!(
            "observe probability must be in (0, 1], got {observe_prob}"
        )));
    }
    let miss_prob = 1.0 - observe_prob;
    let mut rng = seeds::rng_for(seed, stream::SUPPORT);
    let mut out = Vec::with_capacity(d);
    for _ in 0..d {
        let mut missing = Vec::new();
        for i in 0..n {
            if rng.random::<f64>() < miss_prob {
                missing.push(i);
            }
        }
        out.push(IndexSet::new(missing, n)?);
    }
    Ok(out)
}

/// Draws moving-object missing supports: a contiguous (mod `n`) block of
/// `block` indices whose start is a seed-chosen offset advancing by
/// `ceil(block * motion)` indices per frame.
pub fn gen_moving_object_supports(
    n: usize,
    d: usize,
    block: usize,
    motion: f64,
    seed: u64,
) -> Result<Vec<IndexSet>> {
    if block == 0 || block >= n {
        return Err(DatagenError::InvalidParam(format!(
            "block size must satisfy 1 <= block < n, got {block} with n = {n}"
        )));
    }
    if !(motion > 0.0 && motion <= 1.0) {
        return Err(DatagenError::InvalidParam(format!(
            "motion parameter must be in (0, 1], got {motion}"
        )));
    }
    let step = (block as f64 * motion).ceil() as usize;
    let mut rng = seeds::rng_for(seed, stream::SUPPORT);
    let start0 = rng.random_range(0..n);
    let mut out = Vec::with_capacity(d);
    for t in 0..d {
        let start = (start0 + t * step) % n;
        let idx: Vec<usize> = (0..block).map(|k| (start + k) % n).collect();
        out.push(IndexSet::new(idx, n)?);
    }
    Ok(out)
}

/// Dispatches to the model-specific generator (or clones a replay).
pub fn gen_supports(model: &SupportModel, n: usize, d: usize, seed: u64) -> Result<Vec<IndexSet>> {
    match model {
        SupportModel::Bernoulli { observe_prob } => {
            gen_bernoulli_supports(n, d, *observe_prob, seed)
        }
        SupportModel::MovingObject { block, motion } => {
            gen_moving_object_supports(n, d, *block, *motion, seed)
        }
        SupportModel::Replay(sets) => {
            if sets.len() != d {
                return Err(DatagenError::ShapeMismatch(format!(
                    "replay provides {} supports for {d} frames",
                    sets.len()
                )));
            }
            for (t, s) in sets.iter().enumerate() {
                if let Some(&last) = s.as_slice().last() {
                    if last >= n {
                        return Err(DatagenError::InvalidParam(format!(
                            "replay support at frame {t} references index {last} >= n = {n}"
                        )));
                    }
                }
            }
            Ok(sets.clone())
        }
    }
}

// ---------------------------------------------------------------------------
// Sparse outliers
// ---------------------------------------------------------------------------

/// Sparse-outlier generation model.
#[derive(Debug, Clone)]
pub struct OutlierSpec {
    /// Support model for the outlier locations.
    pub model: SupportModel,
    /// Minimum nonzero magnitude.
    pub x_min: f64,
    /// Maximum nonzero magnitude.
    pub x_max: f64,
    /// Draw signs uniformly at random; default is all-positive magnitudes.
    pub random_signs: bool,
}

impl OutlierSpec {
    /// Validates `0 < x_min <= x_max`.
    pub fn new(model: SupportModel, x_min: f64, x_max: f64, random_signs: bool) -> Result<Self> {
        if !(x_min > 0.0 && x_min <= x_max) {
            return Err(DatagenError::InvalidParam(format!(
                "need 0 < x_min <= x_max, got [{x_min}, {x_max}]"
            )));
        }
        Ok(Self {
            model,
            x_min,
            x_max,
            random_signs,
        })
    }
}

/// Per-frame outlier truth: supports and the values on them (aligned with
/// the sorted support order).
#[derive(Debug, Clone)]
pub struct OutlierTruth {
    /// Outlier support per frame, always disjoint from the missing support.
    pub supports: Vec<IndexSet>,
    /// Outlier values, `values[t][k]` sitting at index `supports[t][k]`.
    pub values: Vec<Vec<f64>>,
}

impl OutlierTruth {
    /// Materializes the dense `n x d` outlier matrix (test/report helper).
    pub fn to_dense(&self, n: usize) -> Array2<f64> {
        let d = self.supports.len();
        let mut out = Array2::zeros((n, d));
        for t in 0..d {
            for (k, &i) in self.supports[t].iter().enumerate() {
                out[[i, t]] = self.values[t][k];
            }
        }
        out
    }
}

/// Generates sparse outliers whose supports are disjoint from the given
/// missing supports. Candidate supports come from `spec.model`; any index
/// that collides with a missing index (or an already-placed outlier) walks
/// forward cyclically to the nearest free index, preserving the outlier
/// count per frame.
pub fn gen_outliers(
    n: usize,
    d: usize,
    spec: &OutlierSpec,
    missing: &[IndexSet],
    seed: u64,
) -> Result<OutlierTruth> {
    if missing.len() != d {
        return Err(DatagenError::ShapeMismatch(format!(
            "{} missing supports for {d} frames",
            missing.len()
        )));
    }
    let raw = gen_supports(&spec.model, n, d, seeds::derive(seed, stream::OUTLIER))?;
    let mut rng = seeds::rng_for(seed, stream::OUTLIER);
    let mut supports = Vec::with_capacity(d);
    let mut values = Vec::with_capacity(d);
    let mut taken = vec![false; n];
    for t in 0..d {
        if raw[t].len() + missing[t].len() >= n {
            return Err(DatagenError::InvalidParam(format!(
                "frame {t}: outlier support ({}) plus missing support ({}) \
                 leaves no free indices in n = {n}",
                raw[t].len(),
                missing[t].len()
            )));
        }
        for f in taken.iter_mut() {
            *f = false;
        }
        for &i in missing[t].iter() {
            taken[i] = true;
        }
        let mut placed = Vec::with_capacity(raw[t].len());
        for &want in raw[t].iter() {
            let mut i = want;
            while taken[i] {
                i = (i + 1) % n;
            }
            taken[i] = true;
            placed.push(i);
        }
        let support = IndexSet::new(placed, n)?;
        let vals: Vec<f64> = support
            .iter()
            .map(|_| {
                let mag = rng.random_range(spec.x_min..=spec.x_max);
                if spec.random_signs && rng.random::<bool>() {
                    -mag
                } else {
                    mag
                }
            })
            .collect();
        supports.push(support);
        values.push(vals);
    }
    Ok(OutlierTruth { supports, values })
}

// ---------------------------------------------------------------------------
// Stream assembly
// ---------------------------------------------------------------------------

/// An observed data stream: per-frame vectors with unobserved coordinates
/// zeroed, the missing supports, and (when generated synthetically) the
/// outlier truth for audits.
#[derive(Debug, Clone)]
pub struct ObservationStream {
    /// Ambient dimension.
    pub n: usize,
    /// Number of frames.
    pub d: usize,
    /// Observations, `n x d`; entry `(i, t)` is zero whenever `i` is missing
    /// at frame `t`.
    pub y: Array2<f64>,
    /// Missing support per frame.
    pub missing: Vec<IndexSet>,
    /// Ground-truth outliers if the stream was generated with them.
    pub outliers: Option<OutlierTruth>,
}

impl ObservationStream {
    /// Observation vector of frame `t`.
    pub fn column(&self, t: usize) -> ArrayView1<'_, f64> {
        self.y.column(t)
    }

    /// Missing support of frame `t`.
    pub fn missing_at(&self, t: usize) -> &IndexSet {
        &self.missing[t]
    }
}

/// Builds the observation stream: adds outliers on their supports, adds
/// i.i.d. Gaussian noise of standard deviation `noise_std` on observed
/// coordinates, then zeroes the missing coordinates.
///
/// The noise field is drawn for every entry (then masked), so the
/// realization on observed coordinates does not depend on the support
/// pattern for a fixed seed.
pub fn assemble_stream(
    truth: &GroundTruth,
    missing: Vec<IndexSet>,
    outliers: Option<OutlierTruth>,
    noise_std: f64,
    seed: u64,
) -> Result<ObservationStream> {
    let (n, d) = (truth.n, truth.d);
    if missing.len() != d {
        return Err(DatagenError::ShapeMismatch(format!(
            "{} missing supports for {d} frames",
            missing.len()
        )));
    }
    for (t, s) in missing.iter().enumerate() {
        if let Some(&last) = s.as_slice().last() {
            if last >= n {
                return Err(DatagenError::ShapeMismatch(format!(
                    "missing support at frame {t} references index {last} >= n = {n}"
                )));
            }
        }
    }
    if noise_std < 0.0 {
        return Err(DatagenError::InvalidParam(
            "noise standard deviation must be >= 0".into(),
        ));
    }
    let mut y = truth.clean.clone();
    if let Some(ref out) = outliers {
        if out.supports.len() != d {
            return Err(DatagenError::ShapeMismatch(format!(
                "{} outlier supports for {d} frames",
                out.supports.len()
            )));
        }
        for t in 0..d {
            for (k, &i) in out.supports[t].iter().enumerate() {
                if !missing[t].contains(i) {
                    y[[i, t]] += out.values[t][k];
                } else {
                    return Err(DatagenError::InvalidParam(format!(
                        "outlier at ({i}, {t}) collides with a missing index"
                    )));
                }
            }
        }
    }
    if noise_std > 0.0 {
        let mut rng = seeds::rng_for(seed, stream::NOISE);
        for t in 0..d {
            for i in 0..n {
                let v: f64 = StandardNormal.sample(&mut rng);
                if !missing[t].contains(i) {
                    y[[i, t]] += noise_std * v;
                }
            }
        }
    }
    for (t, s) in missing.iter().enumerate() {
        for &i in s.iter() {
            y[[i, t]] = 0.0;
        }
    }
    Ok(ObservationStream {
        n,
        d,
        y,
        missing,
        outliers,
    })
}

// ---------------------------------------------------------------------------
// Missing-fraction statistics
// ---------------------------------------------------------------------------

/// Worst-case missing-entry fractions of a support sequence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MissFracStats {
    /// Largest per-frame missing fraction, `max_t |T_t| / n`.
    pub max_col_frac: f64,
    /// Largest per-row missing fraction over any window of `alpha`
    /// consecutive frames.
    pub max_row_frac_alpha: f64,
}

/// Computes the worst column fraction and the worst windowed row fraction.
///
/// # Panics
/// If `alpha` is zero or exceeds the number of frames.
pub fn miss_frac_stats(supports: &[IndexSet], n: usize, alpha: usize) -> MissFracStats {
    let d = supports.len();
    assert!(alpha >= 1 && alpha <= d, "need 1 <= alpha <= d");
    let max_col = supports
        .iter()
        .map(|s| s.len() as f64 / n as f64)
        .fold(0.0_f64, f64::max);
    let mut row_counts = vec![0usize; n];
    for s in supports.iter().take(alpha) {
        for &i in s.iter() {
            row_counts[i] += 1;
        }
    }
    let mut worst = row_counts.iter().copied().max().unwrap_or(0);
    for w in 1..=(d - alpha) {
        for &i in supports[w - 1].iter() {
            row_counts[i] -= 1;
        }
        for &i in supports[w + alpha - 1].iter() {
            row_counts[i] += 1;
        }
        worst = worst.max(row_counts.iter().copied().max().unwrap_or(0));
    }
    MissFracStats {
        max_col_frac: max_col,
        max_row_frac_alpha: worst as f64 / alpha as f64,
    }
}

// ---------------------------------------------------------------------------
// CSV import / export
// ---------------------------------------------------------------------------

/// Writes the stream as one dense CSV: `n` rows by `d` columns, `NaN` at
/// missing entries. Outlier truth is not representable in this format.
pub fn write_stream_nan_csv(stream: &ObservationStream, path: &Path) -> Result<()> {
    let mut text = String::new();
    for i in 0..stream.n {
        for t in 0..stream.d {
            if t > 0 {
                text.push(',');
            }
            if stream.missing[t].contains(i) {
                text.push_str("NaN");
            } else {
                let _ = write!(text, "{}", stream.y[[i, t]]);
            }
        }
        text.push('\n');
    }
    fs::write(path, text)?;
    Ok(())
}

/// Reads the dense-CSV format written by [`write_stream_nan_csv`]; `NaN`
/// entries become missing coordinates (stored as zero).
pub fn read_stream_nan_csv(path: &Path) -> Result<ObservationStream> {
    let text = fs::read_to_string(path)?;
    let rows = parse_numeric_rows(&text)?;
    let n = rows.len();
    let d = rows.first().map_or(0, Vec::len);
    if n == 0 || d == 0 {
        return Err(DatagenError::Parse {
            line: 1,
            message: "empty matrix file".into(),
        });
    }
    let mut y = Array2::zeros((n, d));
    let mut missing_idx: Vec<Vec<usize>> = vec![Vec::new(); d];
    for (i, row) in rows.iter().enumerate() {
        if row.len() != d {
            return Err(DatagenError::Parse {
                line: i + 1,
                message: format!("expected {d} fields, found {}", row.len()),
            });
        }
        for (t, &v) in row.iter().enumerate() {
            if v.is_nan() {
                missing_idx[t].push(i);
            } else {
                y[[i, t]] = v;
            }
        }
    }
    let missing = missing_idx
        .into_iter()
        .map(|idx| IndexSet::new(idx, n))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    Ok(ObservationStream {
        n,
        d,
        y,
        missing,
        outliers: None,
    })
}

/// Writes the two-file pair format: a dense values CSV (missing entries
/// written as their stored zeros) and a missing-index CSV with one line per
/// frame: `t,i1,i2,...`. This format round-trips bit-exactly.
pub fn write_stream_pair(
    stream: &ObservationStream,
    values_path: &Path,
    missing_path: &Path,
) -> Result<()> {
    let mut vals = String::new();
    for i in 0..stream.n {
        for t in 0..stream.d {
            if t > 0 {
                vals.push(',');
            }
            let _ = write!(vals, "{}", stream.y[[i, t]]);
        }
        vals.push('\n');
    }
    fs::write(values_path, vals)?;
    let mut miss = String::new();
    for (t, s) in stream.missing.iter().enumerate() {
        let _ = write!(miss, "{t}");
        for &i in s.iter() {
            let _ = write!(miss, ",{i}");
        }
        miss.push('\n');
    }
    fs::write(missing_path, miss)?;
    Ok(())
}

/// Reads the two-file pair format written by [`write_stream_pair`]. Missing
/// coordinates are normalized to zero in the value matrix.
pub fn read_stream_pair(values_path: &Path, missing_path: &Path) -> Result<ObservationStream> {
    let vtext = fs::read_to_string(values_path)?;
    let rows = parse_numeric_rows(&vtext)?;
    let n = rows.len();
    let d = rows.first().map_or(0, Vec::len);
    if n == 0 || d == 0 {
        return Err(DatagenError::Parse {
            line: 1,
            message: "empty values file".into(),
        });
    }
    let mut y = Array2::zeros((n, d));
    for (i, row) in rows.iter().enumerate() {
        if row.len() != d {
            return Err(DatagenError::Parse {
                line: i + 1,
                message: format!("expected {d} fields, found {}", row.len()),
            });
        }
        for (t, &v) in row.iter().enumerate() {
            y[[i, t]] = v;
        }
    }
    let mtext = fs::read_to_string(missing_path)?;
    let mut missing = vec![None; d];
    for (lineno, line) in mtext.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let t: usize = fields
            .next()
            .unwrap()
            .trim()
            .parse()
            .map_err(|e| DatagenError::Parse {
                line: lineno + 1,
                message: format!("bad frame index: {e}"),
            })?;
        if t >= d {
            return Err(DatagenError::Parse {
                line: lineno + 1,
                message: format!("frame index {t} out of range for d = {d}"),
            });
        }
        let mut idx = Vec::new();
        for f in fields {
            let i: usize = f.trim().parse().map_err(|e| DatagenError::Parse {
                line: lineno + 1,
                message: format!("bad row index: {e}"),
            })?;
            idx.push(i);
        }
        missing[t] = Some(IndexSet::new(idx, n)?);
    }
    let missing = missing
        .into_iter()
        .enumerate()
        .map(|(t, m)| {
            m.ok_or_else(|| DatagenError::Parse {
                line: 0,
                message: format!("missing-support line for frame {t} absent"),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    for (t, s) in missing.iter().enumerate() {
        for &i in s.iter() {
            y[[i, t]] = 0.0;
        }
    }
    Ok(ObservationStream {
        n,
        d,
        y,
        missing,
        outliers: None,
    })
}

/// Parses comma-separated numeric rows; `NaN` (any case) parses to NaN.
fn parse_numeric_rows(text: &str) -> Result<Vec<Vec<f64>>> {
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let mut row = Vec::new();
        for field in line.split(',') {
            let v: f64 = field.trim().parse().map_err(|e| DatagenError::Parse {
                line: lineno + 1,
                message: format!("bad number {field:?}: {e}"),
            })?;
            row.push(v);
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Convenience for tests: the per-frame clean column.
pub fn clean_column(truth: &GroundTruth, t: usize) -> Array1<f64> {
    truth.clean.column(t).to_owned()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::sin_theta_max;
    use approx::assert_abs_diff_eq;

    fn small_truth(n: usize, r: usize, d: usize, seed: u64) -> GroundTruth {
        let spec = CoefficientSpec::new(r, 16.0).unwrap();
        let subspaces = gen_subspaces(n, r, 0, 0.0, seed).unwrap();
        let coeff = gen_coefficients(&spec, d, seed);
        GroundTruth::new(subspaces, vec![], coeff, 0.0).unwrap()
    }

    #[test]
    fn half_widths_follow_the_profile() {
        let spec = CoefficientSpec::new(30, 100.0).unwrap();
        let q = spec.half_widths();
        assert_abs_diff_eq!(q[0], 10.0, epsilon = 1e-12);
        assert_abs_diff_eq!(q[29], 1.0, epsilon = 1e-12);
        for w in q.windows(2) {
            assert!(w[0] >= w[1]);
        }
        assert_abs_diff_eq!(spec.lambda_max() / spec.lambda_min(), 100.0, epsilon = 1e-9);
    }

    #[test]
    fn coefficient_rows_match_prescribed_variance() {
        let spec = CoefficientSpec::new(5, 49.0).unwrap();
        let q = spec.half_widths();
        let a = gen_coefficients(&spec, 6000, 7);
        for i in 0..5 {
            let row = a.row(i);
            assert!(row.iter().all(|v| v.abs() <= q[i] + 1e-12));
            let var = row.dot(&row) / 6000.0;
            let expected = q[i] * q[i] / 3.0;
            assert!(
                (var - expected).abs() <= 0.1 * expected,
                "row {i}: var {var} vs expected {expected}"
            );
        }
    }

    #[test]
    fn alternating_widths_keep_last_coordinate_fixed() {
        let spec = CoefficientSpec::new(4, 25.0).unwrap();
        let a = gen_coefficients_alternating(&spec, 2000, 3);
        let q = spec.half_widths();
        let off = spec.lambda_min() / 2.0;
        for t in 0..2000 {
            assert!(a[[3, t]].abs() <= 1.0 + 1e-12);
            let bound = if t % 2 == 0 { q[0] + off } else { q[0] - off };
            assert!(a[[0, t]].abs() <= bound + 1e-12);
        }
        // Odd (1-based) frames must sometimes exceed the even-frame bound,
        // otherwise the schedule is not actually alternating.
        let exceeds = (0..2000)
            .step_by(2)
            .any(|t| a[[0, t]].abs() > q[0] - off);
        assert!(exceeds);
    }

    #[test]
    fn zero_gamma_repeats_the_first_subspace_exactly() {
        let subs = gen_subspaces(40, 4, 3, 0.0, 11).unwrap();
        assert_eq!(subs.len(), 4);
        for p in &subs[1..] {
            assert_eq!(p.as_array(), subs[0].as_array());
            // Exact zero is unattainable: the angle formula itself carries
            // Gram-matrix roundoff of order n * eps even for identical input.
            assert!(sin_theta_max(&subs[0], p).unwrap() <= 1e-14);
        }
    }

    #[test]
    fn tiny_gamma_rotates_continuously_and_large_gamma_rotates_far() {
        let small = gen_subspaces(50, 5, 1, 1e-9, 21).unwrap();
        assert!(sin_theta_max(&small[0], &small[1]).unwrap() <= 1e-6);
        let large = gen_subspaces(50, 5, 1, 100.0, 21).unwrap();
        assert!(sin_theta_max(&large[0], &large[1]).unwrap() >= 0.5);
    }

    #[test]
    fn clean_columns_equal_basis_times_coefficients() {
        let spec = CoefficientSpec::new(3, 9.0).unwrap();
        let subs = gen_subspaces(30, 3, 2, 1.0, 5).unwrap();
        let coeff = gen_coefficients(&spec, 60, 5);
        let truth = GroundTruth::new(subs, vec![20, 40], coeff, 0.0).unwrap();
        for t in 0..60 {
            let expect = truth
                .subspace_at(t)
                .as_array()
                .dot(&truth.coefficients.column(t));
            for i in 0..30 {
                assert!((truth.clean[[i, t]] - expect[i]).abs() <= 1e-12);
            }
        }
        assert_eq!(truth.segment_index(19), 0);
        assert_eq!(truth.segment_index(20), 1);
        assert_eq!(truth.segment_index(59), 2);
    }

    #[test]
    fn truth_rejects_short_segments_and_bad_shapes() {
        let subs = gen_subspaces(20, 4, 1, 1.0, 2).unwrap();
        let coeff = Array2::zeros((4, 10));
        // Second segment [8, 10) has only 2 < r frames.
        assert!(GroundTruth::new(subs.clone(), vec![8], coeff.clone(), 0.0).is_err());
        // Wrong coefficient row count.
        let bad = Array2::zeros((3, 10));
        assert!(GroundTruth::new(subs, vec![5], bad, 0.0).is_err());
    }

    #[test]
    fn bernoulli_supports_hit_the_expected_fraction() {
        let n = 400;
        let d = 300;
        let rho = 0.9;
        let sets = gen_bernoulli_supports(n, d, rho, 13).unwrap();
        let total: usize = sets.iter().map(IndexSet::len).sum();
        let frac = total as f64 / (n * d) as f64;
        let p = 1.0 - rho;
        let sigma = (p * (1.0 - p) / (n * d) as f64).sqrt();
        assert!(
            (frac - p).abs() <= 3.0 * sigma,
            "fraction {frac} vs expected {p} (sigma {sigma})"
        );
        let full = gen_bernoulli_supports(10, 5, 1.0, 13).unwrap();
        assert!(full.iter().all(IndexSet::is_empty));
    }

    #[test]
    fn moving_object_blocks_are_contiguous_and_sized() {
        let (n, s, b0) = (20, 4, 0.5);
        let sets = gen_moving_object_supports(n, 50, s, b0, 3).unwrap();
        let step = (s as f64 * b0).ceil() as usize;
        assert_eq!(step, 2);
        for (t, set) in sets.iter().enumerate() {
            assert_eq!(set.len(), s);
            // Contiguous mod n: the complement of a contiguous block has at
            // most one "gap run" boundary; verify by membership of a shifted
            // window.
            let members: Vec<usize> = set.iter().copied().collect();
            let start = (0..n)
                .find(|&i| set.contains(i) && !set.contains((i + n - 1) % n))
                .expect("block has a start since s < n");
            for k in 0..s {
                assert!(set.contains((start + k) % n), "frame {t} not contiguous");
            }
            assert_eq!(members.len(), s);
        }
        // Consecutive starts advance by exactly `step`.
        let start_of = |set: &IndexSet| {
            (0..n)
                .find(|&i| set.contains(i) && !set.contains((i + n - 1) % n))
                .unwrap()
        };
        for t in 1..50 {
            let a = start_of(&sets[t - 1]);
            let b = start_of(&sets[t]);
            assert_eq!((a + step) % n, b);
        }
    }

    #[test]
    fn moving_object_row_occupancy_matches_geometry() {
        // With step = ceil(s*b0), each row stays missing for ceil(1/b0)
        // consecutive frames per pass when step divides s.
        let (n, s, b0) = (100, 20, 0.05); // step = 1, occupancy 20
        let sets = gen_moving_object_supports(n, 400, s, b0, 9).unwrap();
        let row = 50;
        let mut runs = Vec::new();
        let mut current = 0usize;
        for set in &sets {
            if set.contains(row) {
                current += 1;
            } else if current > 0 {
                runs.push(current);
                current = 0;
            }
        }
        // Interior runs must equal s / step = 20.
        assert!(!runs.is_empty());
        for &run in &runs[1..runs.len().saturating_sub(1)] {
            assert_eq!(run, 20);
        }
    }

    #[test]
    fn outliers_are_disjoint_from_missing_and_bounded() {
        let n = 60;
        let d = 80;
        let missing = gen_bernoulli_supports(n, d, 0.8, 17).unwrap();
        let spec = OutlierSpec::new(
            SupportModel::MovingObject {
                block: 6,
                motion: 0.5,
            },
            10.0,
            25.0,
            false,
        )
        .unwrap();
        let out = gen_outliers(n, d, &spec, &missing, 17).unwrap();
        for t in 0..d {
            assert_eq!(out.supports[t].len(), 6, "cardinality preserved");
            for &i in out.supports[t].iter() {
                assert!(!missing[t].contains(i), "collision at ({i}, {t})");
            }
            for &v in &out.values[t] {
                assert!((10.0..=25.0).contains(&v));
            }
        }
        let fixed = OutlierSpec::new(
            SupportModel::Bernoulli { observe_prob: 0.95 },
            10.0,
            10.0,
            false,
        )
        .unwrap();
        let eq = gen_outliers(n, d, &fixed, &missing, 3).unwrap();
        for t in 0..d {
            assert!(eq.values[t].iter().all(|&v| v == 10.0));
        }
    }

    #[test]
    fn assemble_masks_noise_and_outliers_correctly() {
        let truth = small_truth(25, 3, 40, 31);
        let missing = gen_bernoulli_supports(25, 40, 0.8, 31).unwrap();
        // No missing, no noise: y equals clean exactly.
        let empty: Vec<IndexSet> = (0..40).map(|_| IndexSet::empty()).collect();
        let plain = assemble_stream(&truth, empty, None, 0.0, 31).unwrap();
        assert_eq!(plain.y, truth.clean);
        // Missing coordinates are exactly zero, observed ones carry noise.
        let noisy = assemble_stream(&truth, missing.clone(), None, 1e-3, 31).unwrap();
        for t in 0..40 {
            for &i in missing[t].iter() {
                assert_eq!(noisy.y[[i, t]], 0.0);
            }
        }
        // Masking idempotence: re-zeroing missing coordinates changes nothing.
        let mut remasked = noisy.y.clone();
        for t in 0..40 {
            for &i in missing[t].iter() {
                remasked[[i, t]] = 0.0;
            }
        }
        assert_eq!(remasked, noisy.y);
    }

    #[test]
    fn miss_frac_stats_trivial_cases() {
        let n = 10;
        let empty: Vec<IndexSet> = (0..8).map(|_| IndexSet::empty()).collect();
        let stats = miss_frac_stats(&empty, n, 4);
        assert_eq!(stats.max_col_frac, 0.0);
        assert_eq!(stats.max_row_frac_alpha, 0.0);
        // One fully-missing frame among d = alpha frames.
        let mut sets: Vec<IndexSet> = (0..4).map(|_| IndexSet::empty()).collect();
        sets[2] = IndexSet::new((0..n).collect(), n).unwrap();
        let stats = miss_frac_stats(&sets, n, 4);
        assert_eq!(stats.max_col_frac, 1.0);
        assert_abs_diff_eq!(stats.max_row_frac_alpha, 0.25, epsilon = 1e-15);
    }

    #[test]
    fn csv_pair_round_trip_is_bit_exact() {
        let truth = small_truth(15, 2, 25, 41);
        let missing = gen_bernoulli_supports(15, 25, 0.7, 41).unwrap();
        let stream = assemble_stream(&truth, missing, None, 1e-4, 41).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let vp = dir.path().join("values.csv");
        let mp = dir.path().join("missing.csv");
        write_stream_pair(&stream, &vp, &mp).unwrap();
        let back = read_stream_pair(&vp, &mp).unwrap();
        assert_eq!(back.y, stream.y);
        assert_eq!(back.missing.len(), stream.missing.len());
        for t in 0..25 {
            assert_eq!(back.missing[t].as_slice(), stream.missing[t].as_slice());
        }
        // Re-export must produce identical bytes.
        let vp2 = dir.path().join("values2.csv");
        let mp2 = dir.path().join("missing2.csv");
        write_stream_pair(&back, &vp2, &mp2).unwrap();
        assert_eq!(fs::read(&vp).unwrap(), fs::read(&vp2).unwrap());
        assert_eq!(fs::read(&mp).unwrap(), fs::read(&mp2).unwrap());
    }

    #[test]
    fn nan_csv_round_trip_recovers_observations_and_supports() {
        let truth = small_truth(12, 2, 18, 43);
        let missing = gen_bernoulli_supports(12, 18, 0.75, 43).unwrap();
        let stream = assemble_stream(&truth, missing, None, 0.0, 43).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nan.csv");
        write_stream_nan_csv(&stream, &path).unwrap();
        let back = read_stream_nan_csv(&path).unwrap();
        assert_eq!(back.y, stream.y);
        for t in 0..18 {
            assert_eq!(back.missing[t].as_slice(), stream.missing[t].as_slice());
        }
    }

    #[test]
    fn malformed_csv_reports_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        fs::write(&path, "1.0,2.0\n3.0,oops\n").unwrap();
        match read_stream_nan_csv(&path) {
            Err(DatagenError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }
}
