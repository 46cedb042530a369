//! Scratch probe: sample counts to reach sin-theta <= 1e-13 for the three
//! schedule variants at desk scale (n = 1000, d = 4000, r = 30, 70%
//! observed). Not part of the test suite.

use std::time::Instant;
use subtrack_core::datagen::{
    assemble_stream, gen_bernoulli_supports, gen_coefficients, gen_subspaces, CoefficientSpec,
    GroundTruth,
};
use subtrack_core::metrics::{samples_to_threshold, subspace_error_series};
use subtrack_core::tracker::{track_stream, TrackerParams};
use subtrack_core::variants::{VariantMode, VariantParams};

fn main() {
    let n = 1000;
    let d = 4000;
    let r = 30;
    let alpha = 60;
    let seeds: Vec<u64> = std::env::args()
        .skip(1)
        .map(|a| a.parse().expect("seed"))
        .collect();
    let seeds = if seeds.is_empty() { vec![11, 12, 13] } else { seeds };

    let mut med: Vec<Vec<usize>> = vec![vec![], vec![], vec![]];
    let mut total_ms = 0u128;
    for &seed in &seeds {
        let subspaces = gen_subspaces(n, r, 0, 0.0, seed).unwrap();
        let coeffs = gen_coefficients(&CoefficientSpec::new(r, 100.0).unwrap(), d, seed);
        let truth = GroundTruth::new(subspaces, vec![], coeffs, 0.0).unwrap();
        let missing = gen_bernoulli_supports(n, d, 0.7, seed).unwrap();
        let stream = assemble_stream(&truth, missing, None, 0.0, seed).unwrap();

        for (vi, (label, mode)) in [
            ("basic      ", VariantMode::Basic),
            ("reuse R=4  ", VariantMode::BufferReuse { reuse: 4 }),
            (
                "slide b=10 ",
                VariantMode::SlidingPlusReuse { beta: 10, reuse: 1 },
            ),
        ]
        .into_iter()
        .enumerate()
        {
            let params = TrackerParams::new(r, 33);
            assert_eq!(params.alpha, alpha);
            let t0 = Instant::now();
            let run = track_stream(&stream, &params, &VariantParams::new(mode)).unwrap();
            let track_ms = t0.elapsed().as_millis();
            total_ms += track_ms;
            let series = subspace_error_series(&run, &truth).unwrap();
            let samples = samples_to_threshold(&series, 1e-13, alpha);
            if let Some(s) = samples {
                med[vi].push(s);
            }
            let final_sin = series.records.last().unwrap().sin_theta;
            let n_events = run.events.len();
            // Dormancy onset: time of the last subspace-changing event, the
            // error there, and the worst error afterwards (frozen level).
            let last_ev = run.events.last().map(|e| e.t).unwrap_or(0);
            let sin_at_last = series
                .records
                .iter()
                .find(|rec| rec.t == last_ev)
                .map(|rec| rec.sin_theta)
                .unwrap_or(f64::NAN);
            let frozen_max = series
                .records
                .iter()
                .filter(|rec| rec.t > last_ev)
                .map(|rec| rec.sin_theta)
                .fold(0.0_f64, f64::max);
            println!(
                "seed {seed} {label} samples={samples:?} final={final_sin:.2e} events={n_events} \
                 last_ev_t={last_ev} sin_there={sin_at_last:.2e} frozen_max={frozen_max:.2e} {track_ms} ms"
            );
        }
    }
    for (vi, label) in ["basic", "reuse", "slide"].iter().enumerate() {
        med[vi].sort_unstable();
        let m = &med[vi];
        let median = if m.is_empty() {
            None
        } else if m.len() % 2 == 1 {
            Some(m[m.len() / 2] as f64)
        } else {
            Some((m[m.len() / 2 - 1] + m[m.len() / 2]) as f64 / 2.0)
        };
        println!("{label}: median_samples={median:?} (of {} runs)", m.len());
    }
    println!("total tracking time {:.1} s", total_ms as f64 / 1000.0);
}
