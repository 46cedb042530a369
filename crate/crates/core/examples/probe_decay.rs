//! Scratch probe: per-update error-decay statistics for the basic schedule
//! at desk scale. Not part of the test suite.

use subtrack_core::datagen::{
    assemble_stream, gen_bernoulli_supports, gen_coefficients, gen_subspaces, CoefficientSpec,
    GroundTruth,
};
use subtrack_core::linalg::sin_theta_max;
use subtrack_core::tracker::{Tracker, TrackerParams};
use subtrack_core::variants::{VariantMode, VariantParams};

fn main() {
    let n = 1000;
    let d = 4000;
    let r = 30;
    let seeds: Vec<u64> = std::env::args()
        .skip(1)
        .map(|a| a.parse().unwrap())
        .collect();
    let seeds = if seeds.is_empty() {
        (1..=10).collect()
    } else {
        seeds
    };
    let floor = 100.0 * f64::EPSILON;

    let mut medians = Vec::new();
    let mut fracs = Vec::new();
    for &seed in &seeds {
        let subspaces = gen_subspaces(n, r, 0, 0.0, seed).unwrap();
        let coeffs = gen_coefficients(&CoefficientSpec::new(r, 100.0).unwrap(), d, seed);
        let truth = GroundTruth::new(subspaces, vec![], coeffs, 0.0).unwrap();
        let missing = gen_bernoulli_supports(n, d, 0.7, seed).unwrap();
        let stream = assemble_stream(&truth, missing, None, 0.0, seed).unwrap();

        let params = TrackerParams::new(r, 33);
        let mut tracker = Tracker::new(params, VariantParams::new(VariantMode::Basic)).unwrap();
        let mut errs: Vec<f64> = Vec::new();
        for t in 0..d {
            let out = tracker.step(stream.column(t), stream.missing_at(t)).unwrap();
            if out.event.is_some() {
                let b = out.basis.as_ref().unwrap();
                errs.push(sin_theta_max(truth.subspace_at(t), b).unwrap());
            }
        }
        // Truncate at the first value under the floor (inclusive).
        let cut = errs.iter().position(|&e| e <= floor).map(|i| i + 1);
        let seq = &errs[..cut.unwrap_or(errs.len())];
        let mut ratios: Vec<f64> = seq.windows(2).map(|w| w[1] / w[0]).collect();
        let noninc = ratios.iter().filter(|&&x| x <= 1.0).count() as f64 / ratios.len() as f64;
        ratios.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let med = if ratios.len() % 2 == 1 {
            ratios[ratios.len() / 2]
        } else {
            0.5 * (ratios[ratios.len() / 2 - 1] + ratios[ratios.len() / 2])
        };
        println!(
            "seed {seed:2}: updates_used={:3} median_ratio={med:.4} noninc_frac={noninc:.4} reached_floor={} final={:.2e}",
            seq.len(),
            cut.is_some(),
            seq.last().unwrap()
        );
        medians.push(med);
        fracs.push(noninc);
    }
    medians.sort_by(|a, b| a.partial_cmp(b).unwrap());
    fracs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    println!(
        "across seeds: median-of-medians {:.4}, worst median {:.4}, worst noninc {:.4}",
        medians[medians.len() / 2],
        medians.last().unwrap(),
        fracs[0]
    );
}
