//! Evaluation quantities for tracking runs: per-frame subspace error,
//! column and Frobenius reconstruction errors, detection-delay extraction,
//! samples-to-convergence, and run summaries.
//!
//! Conventions baked in here (and relied on by the experiment harness):
//!
//! - *Samples to threshold* requires the error to stay at or below the
//!   threshold for one full `alpha` window, so a lucky one-frame dip does
//!   not count as convergence. The returned count is the number of frames
//!   consumed when the window completes: a series that is already below
//!   the threshold from the start yields `alpha`.
//! - A detection is matched to the nearest preceding true change time; a
//!   detection with no true change in the trailing `4 * alpha` frames (twice
//!   the guaranteed detection delay) is a *false alarm*.

use crate::datagen::GroundTruth;
use crate::linalg::{sin_theta_max, LinalgError};
use crate::tracker::{TimedEvent, TrackRun, TrackerEvent};
use std::collections::HashMap;
use std::fmt::Write as _;
use std::sync::Arc;
use thiserror::Error;

/// Errors from the evaluation helpers.
#[derive(Debug, Error)]
pub enum MetricsError {
    /// Inputs are not time- or shape-aligned.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    /// The reference matrix has zero Frobenius norm, so a relative error
    /// is undefined.
    #[error("reference matrix is identically zero")]
    ZeroMatrix,
    /// An underlying dense kernel failed.
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    /// Writing a CSV file failed.
    #[error("CSV output: {0}")]
    Io(#[from] std::io::Error),
}

/// One frame of an [`ErrorSeries`].
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorRecord {
    /// Frame index.
    pub t: usize,
    /// Largest principal-angle sine between the tracked basis in effect
    /// after frame `t` and the true subspace active at `t`; 1 while the
    /// tracker still holds the zero basis.
    pub sin_theta: f64,
    /// Relative 2-norm column error of the online estimate (absolute norm
    /// if the true column is zero).
    pub rel_col_err: f64,
    /// Era index after the frame.
    pub j: usize,
    /// Completed updates within the era after the frame.
    pub k: usize,
}

/// Per-frame error trajectory of one run plus the events that shaped it.
#[derive(Debug, Clone)]
pub struct ErrorSeries {
    /// One record per frame, `t` strictly increasing.
    pub records: Vec<ErrorRecord>,
    /// The run's event log.
    pub events: Vec<TimedEvent>,
}

/// CSV column header shared by the series writer and downstream tooling.
pub const ERROR_SERIES_HEADER: &str = "t,sin_theta,rel_col_err,j,k,event";

fn event_kind(e: &TrackerEvent) -> &'static str {
    match e {
        TrackerEvent::SubspaceUpdated { .. } => "subspace_updated",
        TrackerEvent::UpdateComplete { .. } => "update_complete",
        TrackerEvent::ChangeDetected { .. } => "change_detected",
        TrackerEvent::BasisRefined { .. } => "basis_refined",
    }
}

impl ErrorSeries {
    /// Renders the series as CSV with the fixed header
    /// `t,sin_theta,rel_col_err,j,k,event`; the event column carries the
    /// event kind fired on that frame, or is empty.
    pub fn to_csv_string(&self) -> String {
        let by_t: HashMap<usize, &'static str> = self
            .events
            .iter()
            .map(|ev| (ev.t, event_kind(&ev.event)))
            .collect();
        let mut out = String::with_capacity(self.records.len() * 48);
        out.push_str(ERROR_SERIES_HEADER);
        out.push('\n');
        for rec in &self.records {
            let ev = by_t.get(&rec.t).copied().unwrap_or("");
            let _ = writeln!(
                out,
                "{},{},{},{},{},{ev}",
                rec.t, rec.sin_theta, rec.rel_col_err, rec.j, rec.k
            );
        }
        out
    }

    /// Writes [`ErrorSeries::to_csv_string`] to a file.
    pub fn write_csv<P: AsRef<std::path::Path>>(&self, path: P) -> Result<(), MetricsError> {
        std::fs::write(path, self.to_csv_string())?;
        Ok(())
    }
}

/// Per-frame subspace and column errors of a run against the generating
/// truth. The subspace error is cached per (basis, truth segment) pair, so
/// the cost is one small eigensolve per distinct basis rather than per
/// frame.
pub fn subspace_error_series(
    run: &TrackRun,
    truth: &GroundTruth,
) -> Result<ErrorSeries, MetricsError> {
    let d = truth.d;
    if run.fills.ncols() != d || run.bases.len() != d || run.epochs.len() != d {
        return Err(MetricsError::DimensionMismatch(format!(
            "run covers {} frames, truth has {d}",
            run.bases.len()
        )));
    }
    if run.fills.nrows() != truth.n {
        return Err(MetricsError::DimensionMismatch(format!(
            "run dimension {} vs truth {}",
            run.fills.nrows(),
            truth.n
        )));
    }
    let mut cache: HashMap<(usize, usize), f64> = HashMap::new();
    let mut records = Vec::with_capacity(d);
    for t in 0..d {
        let seg = truth.segment_index(t);
        let sin_theta = match &run.bases[t] {
            None => 1.0,
            Some(b) => {
                let key = (Arc::as_ptr(b) as usize, seg);
                match cache.get(&key) {
                    Some(&v) => v,
                    None => {
                        let v = sin_theta_max(truth.subspace_at(t), b)?.clamp(0.0, 1.0);
                        cache.insert(key, v);
                        v
                    }
                }
            }
        };
        let diff = &run.fills.column(t) - &truth.clean.column(t);
        let err = diff.dot(&diff).sqrt();
        let den = {
            let c = truth.clean.column(t);
            c.dot(&c).sqrt()
        };
        let rel_col_err = if den > 0.0 { err / den } else { err };
        let (j, k) = run.epochs[t];
        records.push(ErrorRecord {
            t,
            sin_theta,
            rel_col_err,
            j,
            k,
        });
    }
    Ok(ErrorSeries {
        records,
        events: run.events.clone(),
    })
}

/// Relative Frobenius error `||L_hat - L||_F / ||L||_F`.
pub fn rel_frobenius(
    l_hat: &ndarray::Array2<f64>,
    l: &ndarray::Array2<f64>,
) -> Result<f64, MetricsError> {
    if l_hat.dim() != l.dim() {
        return Err(MetricsError::DimensionMismatch(format!(
            "{:?} vs {:?}",
            l_hat.dim(),
            l.dim()
        )));
    }
    let den = l.iter().map(|v| v * v).sum::<f64>().sqrt();
    if den == 0.0 {
        return Err(MetricsError::ZeroMatrix);
    }
    let num = l_hat
        .iter()
        .zip(l.iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    Ok(num / den)
}

/// One matched detection.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DetectionDelay {
    /// Index into the truth change-time list (0-based).
    pub change_index: usize,
    /// Frame the detection fired on.
    pub t_detected: usize,
    /// The matched true change time.
    pub t_true: usize,
    /// `t_detected - t_true`, always >= 0.
    pub delay: usize,
}

/// Matched delays, unmatched true changes, and unmatched detections.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DetectionReport {
    /// Matched detections in detection order.
    pub delays: Vec<DetectionDelay>,
    /// True change times no detection claimed.
    pub missed: Vec<usize>,
    /// Detection frames with no true change in the trailing `4 * alpha`
    /// window.
    pub false_alarms: Vec<usize>,
}

/// Matches detection events against true change times.
///
/// Detections are processed in time order; each claims the nearest
/// preceding unclaimed true change within `4 * alpha` frames. Detections
/// that claim nothing are false alarms; truth times left unclaimed are
/// misses. The result depends only on the set of detection events, not on
/// the order they appear in `events`.
pub fn detection_report(
    events: &[TimedEvent],
    truth_changes: &[usize],
    alpha: usize,
) -> DetectionReport {
    let mut detections: Vec<usize> = events
        .iter()
        .filter(|e| matches!(e.event, TrackerEvent::ChangeDetected { .. }))
        .map(|e| e.t)
        .collect();
    detections.sort_unstable();
    let window = 4 * alpha;
    let mut claimed = vec![false; truth_changes.len()];
    let mut report = DetectionReport::default();
    for t_hat in detections {
        // Nearest preceding true change: last index with t_true <= t_hat.
        let upper = truth_changes.partition_point(|&c| c <= t_hat);
        let mut matched = None;
        for idx in (0..upper).rev() {
            if t_hat - truth_changes[idx] > window {
                break;
            }
            if !claimed[idx] {
                matched = Some(idx);
                break;
            }
        }
        match matched {
            Some(idx) => {
                claimed[idx] = true;
                report.delays.push(DetectionDelay {
                    change_index: idx,
                    t_detected: t_hat,
                    t_true: truth_changes[idx],
                    delay: t_hat - truth_changes[idx],
                });
            }
            None => report.false_alarms.push(t_hat),
        }
    }
    for (idx, &t) in truth_changes.iter().enumerate() {
        if !claimed[idx] {
            report.missed.push(t);
        }
    }
    report
}

/// First frame count at which `sin_theta` has stayed at or below
/// `threshold` for `alpha` consecutive frames; `None` if that never
/// happens. A series below the threshold from frame 0 yields `alpha`.
pub fn samples_to_threshold(
    series: &ErrorSeries,
    threshold: f64,
    alpha: usize,
) -> Option<usize> {
    let mut run = 0usize;
    for rec in &series.records {
        if rec.sin_theta <= threshold {
            run += 1;
            if run == alpha {
                return Some(rec.t + 1);
            }
        } else {
            run = 0;
        }
    }
    None
}

/// Summary of one run, ready for key-value serialization.
#[derive(Debug, Clone)]
pub struct RunReport {
    /// Relative Frobenius error of the completed matrix, when computed.
    pub final_rel_frobenius: Option<f64>,
    /// `(threshold, samples)` pairs; `None` samples means never attained.
    pub samples_to_threshold: Vec<(f64, Option<usize>)>,
    /// Detection bookkeeping against the truth change times.
    pub detection: DetectionReport,
    /// Mean wall-clock milliseconds per processed frame.
    pub ms_per_frame: f64,
}

impl RunReport {
    /// Renders the report as CSV `key,value` lines.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        out.push_str("key,value\n");
        if let Some(v) = self.final_rel_frobenius {
            let _ = writeln!(out, "rel_frobenius,{v}");
        }
        for (thr, samples) in &self.samples_to_threshold {
            match samples {
                Some(s) => {
                    let _ = writeln!(out, "samples_to_{thr},{s}");
                }
                None => {
                    let _ = writeln!(out, "samples_to_{thr},never");
                }
            }
        }
        for d in &self.detection.delays {
            let _ = writeln!(
                out,
                "detection_delay_{},{}",
                d.change_index, d.delay
            );
        }
        let _ = writeln!(out, "missed_changes,{}", self.detection.missed.len());
        let _ = writeln!(out, "false_alarms,{}", self.detection.false_alarms.len());
        let _ = writeln!(out, "ms_per_frame,{}", self.ms_per_frame);
        out
    }

    /// Writes [`RunReport::to_csv_string`] to a file.
    pub fn write_csv<P: AsRef<std::path::Path>>(&self, path: P) -> Result<(), MetricsError> {
        std::fs::write(path, self.to_csv_string())?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{gen_coefficients, gen_subspaces, CoefficientSpec};
    use crate::linalg::BasisMatrix;
    use approx::assert_abs_diff_eq;
    use ndarray::{Array1, Array2};

    fn toy_truth(n: usize, r: usize, d: usize, seed: u64) -> GroundTruth {
        let subspaces = gen_subspaces(n, r, 0, 0.0, seed).unwrap();
        let coeffs = gen_coefficients(&CoefficientSpec::new(r, 10.0).unwrap(), d, seed);
        GroundTruth::new(subspaces, vec![], coeffs, 0.0).unwrap()
    }

    fn run_with_bases(
        truth: &GroundTruth,
        bases: Vec<Option<Arc<BasisMatrix>>>,
        fills: Array2<f64>,
    ) -> TrackRun {
        let d = truth.d;
        TrackRun {
            fills,
            bases,
            epochs: vec![(0, 0); d],
            degraded: vec![false; d],
            events: vec![],
            eras: vec![],
        }
    }

    #[test]
    fn exact_basis_history_gives_zero_error() {
        let truth = toy_truth(14, 2, 9, 1);
        let arc = Arc::new(truth.subspaces[0].clone());
        let bases = vec![Some(Arc::clone(&arc)); truth.d];
        let run = run_with_bases(&truth, bases, truth.clean.clone());
        let series = subspace_error_series(&run, &truth).unwrap();
        assert_eq!(series.records.len(), truth.d);
        for rec in &series.records {
            assert!(rec.sin_theta <= 1e-12);
            assert!(rec.rel_col_err <= 1e-14);
        }
    }

    #[test]
    fn zero_basis_frames_report_error_one() {
        let truth = toy_truth(10, 2, 6, 2);
        let bases = vec![None; truth.d];
        let run = run_with_bases(&truth, bases, truth.clean.clone());
        let series = subspace_error_series(&run, &truth).unwrap();
        for rec in &series.records {
            assert_eq!(rec.sin_theta, 1.0);
        }
    }

    #[test]
    fn rel_frobenius_trivial_cases() {
        let truth = toy_truth(8, 2, 5, 3);
        let l = &truth.clean;
        assert_eq!(rel_frobenius(l, l).unwrap(), 0.0);
        let zero = Array2::zeros(l.dim());
        assert_abs_diff_eq!(rel_frobenius(&zero, l).unwrap(), 1.0, epsilon = 1e-15);
        // L_hat = L + E with ||E||_F = 0.1 ||L||_F.
        let norm = l.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut e = Array2::zeros(l.dim());
        e[[0, 0]] = 0.1 * norm;
        let lhat = l + &e;
        assert_abs_diff_eq!(rel_frobenius(&lhat, l).unwrap(), 0.1, epsilon = 1e-12);
        // Zero reference is an error, mismatched shapes are an error.
        assert!(matches!(
            rel_frobenius(&zero, &zero),
            Err(MetricsError::ZeroMatrix)
        ));
        let skinny = Array2::zeros((l.nrows(), l.ncols() + 1));
        assert!(matches!(
            rel_frobenius(&skinny, l),
            Err(MetricsError::DimensionMismatch(_))
        ));
    }

    #[test]
    fn rel_frobenius_is_bounded_by_worst_column_error() {
        // The squared Frobenius ratio is a weighted mean of squared column
        // ratios, so it can never exceed the worst column. Checked against
        // a column-sum evaluation on random instances.
        for seed in 0..20 {
            let truth = toy_truth(12, 3, 15, 100 + seed);
            let mut rng = crate::seeds::rng_for(seed, 91);
            use rand_distr::{Distribution, StandardNormal};
            let noise =
                Array2::from_shape_fn(truth.clean.dim(), |_| {
                    let v: f64 = StandardNormal.sample(&mut rng);
                    0.05 * v
                });
            let lhat = &truth.clean + &noise;
            let total = rel_frobenius(&lhat, &truth.clean).unwrap();
            let mut worst: f64 = 0.0;
            let mut num_sum = 0.0;
            let mut den_sum = 0.0;
            for t in 0..truth.d {
                let diff = &lhat.column(t) - &truth.clean.column(t);
                let num = diff.dot(&diff);
                let den = truth.clean.column(t).dot(&truth.clean.column(t));
                num_sum += num;
                den_sum += den;
                worst = worst.max((num / den).sqrt());
            }
            assert!(total <= worst + 1e-12, "{total} > {worst}");
            // Column-sum oracle for the ratio itself.
            assert_abs_diff_eq!(total, (num_sum / den_sum).sqrt(), epsilon = 1e-12);
        }
    }

    fn detection_at(t: usize) -> TimedEvent {
        TimedEvent {
            t,
            event: TrackerEvent::ChangeDetected {
                j: 1,
                statistic: 1.0,
            },
        }
    }

    #[test]
    fn detection_report_matches_single_change() {
        let events = vec![detection_at(1030)];
        let report = detection_report(&events, &[1000], 60);
        assert_eq!(report.delays.len(), 1);
        assert_eq!(report.delays[0].delay, 30);
        assert!(report.delays[0].delay <= 2 * 60);
        assert!(report.missed.is_empty());
        assert!(report.false_alarms.is_empty());
    }

    #[test]
    fn detection_report_empty_inputs_give_empty_report() {
        let report = detection_report(&[], &[], 60);
        assert_eq!(report, DetectionReport::default());
    }

    #[test]
    fn spurious_detection_is_a_false_alarm() {
        // Second detection has no unclaimed change in its trailing window.
        let events = vec![detection_at(1030), detection_at(1090)];
        let report = detection_report(&events, &[1000], 60);
        assert_eq!(report.delays.len(), 1);
        assert_eq!(report.false_alarms, vec![1090]);
        // A detection before any change is also a false alarm.
        let early = vec![detection_at(500)];
        let report = detection_report(&early, &[1000], 60);
        assert!(report.delays.is_empty());
        assert_eq!(report.missed, vec![1000]);
        assert_eq!(report.false_alarms, vec![500]);
    }

    #[test]
    fn undetected_change_is_missed_and_order_does_not_matter() {
        let events = vec![detection_at(2050), detection_at(1010)];
        let shuffled = vec![detection_at(1010), detection_at(2050)];
        let changes = [1000, 2000, 3000];
        let a = detection_report(&events, &changes, 50);
        let b = detection_report(&shuffled, &changes, 50);
        assert_eq!(a, b);
        assert_eq!(a.delays.len(), 2);
        assert_eq!(a.missed, vec![3000]);
    }

    #[test]
    fn detection_outside_window_does_not_match() {
        // Detection 4*alpha + 1 frames after the change: false alarm + miss.
        let events = vec![detection_at(1241)];
        let report = detection_report(&events, &[1000], 60);
        assert!(report.delays.is_empty());
        assert_eq!(report.missed, vec![1000]);
        assert_eq!(report.false_alarms, vec![1241]);
        // Exactly at the window edge it still matches.
        let events = vec![detection_at(1240)];
        let report = detection_report(&events, &[1000], 60);
        assert_eq!(report.delays.len(), 1);
    }

    fn series_from(sines: &[f64]) -> ErrorSeries {
        ErrorSeries {
            records: sines
                .iter()
                .enumerate()
                .map(|(t, &s)| ErrorRecord {
                    t,
                    sin_theta: s,
                    rel_col_err: 0.0,
                    j: 0,
                    k: 0,
                })
                .collect(),
            events: vec![],
        }
    }

    #[test]
    fn samples_to_threshold_examples() {
        // Already below from the start: the sustain window alone.
        let below = series_from(&vec![1e-6; 200]);
        assert_eq!(samples_to_threshold(&below, 1e-3, 60), Some(60));
        // Monotone series dropping below at frame 100 with alpha = 60.
        let mut s = vec![1.0; 100];
        s.extend(vec![1e-6; 200]);
        assert_eq!(samples_to_threshold(&series_from(&s), 1e-3, 60), Some(160));
        // Never below.
        let never = series_from(&vec![0.5; 300]);
        assert_eq!(samples_to_threshold(&never, 1e-3, 60), None);
        // A dip shorter than the window does not count.
        let mut dip = vec![1.0; 50];
        dip.extend(vec![1e-6; 59]);
        dip.extend(vec![1.0; 30]);
        dip.extend(vec![1e-6; 60]);
        assert_eq!(samples_to_threshold(&series_from(&dip), 1e-3, 60), Some(199));
    }

    #[test]
    fn csv_output_has_the_fixed_header_and_event_labels() {
        let truth = toy_truth(6, 1, 4, 5);
        let arc = Arc::new(truth.subspaces[0].clone());
        let bases = vec![None, Some(Arc::clone(&arc)), Some(Arc::clone(&arc)), Some(arc)];
        let mut run = run_with_bases(&truth, bases, truth.clean.clone());
        run.events.push(TimedEvent {
            t: 1,
            event: TrackerEvent::SubspaceUpdated { j: 0, k: 1 },
        });
        let series = subspace_error_series(&run, &truth).unwrap();
        let csv = series.to_csv_string();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some(ERROR_SERIES_HEADER));
        let rows: Vec<&str> = lines.collect();
        assert_eq!(rows.len(), 4);
        assert!(rows[0].starts_with("0,1,"));
        assert!(rows[0].ends_with(",0,0,"));
        assert!(rows[1].ends_with(",subspace_updated"));
        assert!(rows[2].ends_with(",0,0,"));
        // Every field count is fixed at 6.
        for row in rows {
            assert_eq!(row.split(',').count(), 6, "row {row:?}");
        }
    }

    #[test]
    fn run_report_serializes_key_values() {
        let report = RunReport {
            final_rel_frobenius: Some(1.5e-5),
            samples_to_threshold: vec![(1e-13, Some(3540)), (1e-15, None)],
            detection: DetectionReport {
                delays: vec![DetectionDelay {
                    change_index: 0,
                    t_detected: 1030,
                    t_true: 1000,
                    delay: 30,
                }],
                missed: vec![],
                false_alarms: vec![],
            },
            ms_per_frame: 0.42,
        };
        let csv = report.to_csv_string();
        assert!(csv.starts_with("key,value\n"));
        assert!(csv.contains("rel_frobenius,0.000015\n"));
        assert!(csv.contains("samples_to_0.0000000000001,3540\n"));
        assert!(csv.contains("samples_to_0.000000000000001,never\n"));
        assert!(csv.contains("detection_delay_0,30\n"));
        assert!(csv.contains("false_alarms,0\n"));
        assert!(csv.contains("ms_per_frame,0.42\n"));
    }

    #[test]
    fn series_time_misalignment_is_rejected() {
        let truth = toy_truth(6, 1, 4, 6);
        let bases = vec![None; 3];
        let run = TrackRun {
            fills: Array2::zeros((6, 3)),
            bases,
            epochs: vec![(0, 0); 3],
            degraded: vec![false; 3],
            events: vec![],
            eras: vec![],
        };
        assert!(matches!(
            subspace_error_series(&run, &truth),
            Err(MetricsError::DimensionMismatch(_))
        ));
    }

    #[test]
    fn zero_truth_column_reports_absolute_error() {
        // Hand-built truth with an all-zero column via zero coefficients.
        let subspaces = gen_subspaces(6, 1, 0, 0.0, 7).unwrap();
        let mut coeffs = Array2::zeros((1, 3));
        coeffs[[0, 0]] = 1.0;
        coeffs[[0, 2]] = 2.0;
        let truth = GroundTruth::new(subspaces, vec![], coeffs, 0.0).unwrap();
        let mut fills = truth.clean.clone();
        fills
            .column_mut(1)
            .assign(&Array1::from_elem(6, 0.5));
        let run = run_with_bases(&truth, vec![None; 3], fills);
        let series = subspace_error_series(&run, &truth).unwrap();
        // Column 1 of the truth is zero: error is the absolute norm.
        assert_abs_diff_eq!(
            series.records[1].rel_col_err,
            (6.0_f64 * 0.25).sqrt(),
            epsilon = 1e-14
        );
    }
}
