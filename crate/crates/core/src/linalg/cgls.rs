//! Conjugate-gradient least squares (CGLS) over operator closures.
//!
//! Solves `min_x ||A x - b||_2` given only the actions `x -> A x` and
//! `w -> A' w`, never materializing `A`. This is the textbook CGLS
//! recurrence (CG applied to the normal equations without forming them),
//! which keeps the conditioning of `A` rather than `A'A`.

use ndarray::Array1;

/// Result of a CGLS solve.
#[derive(Debug, Clone)]
pub struct CglsOutcome {
    /// The minimizer estimate.
    pub x: Array1<f64>,
    /// Iterations actually performed.
    pub iterations: usize,
    /// Whether the normal-equation residual dropped below the tolerance
    /// (relative to its starting value) before the iteration cap.
    pub converged: bool,
}

/// Runs CGLS from a zero start.
///
/// # Arguments
/// * `apply_a` - action of `A` (maps solution space to data space)
/// * `apply_at` - action of `A'`
/// * `b` - data vector
/// * `tol` - relative tolerance on `||A'(b - A x)||`; values below machine
///   epsilon are clamped to machine epsilon
/// * `max_iter` - iteration cap
pub fn cgls_solve<A, At>(
    apply_a: A,
    apply_at: At,
    b: &Array1<f64>,
    tol: f64,
    max_iter: usize,
) -> CglsOutcome
where
    A: Fn(&Array1<f64>) -> Array1<f64>,
    At: Fn(&Array1<f64>) -> Array1<f64>,
{
    let tol = tol.max(f64::EPSILON);
    let mut s = apply_at(b);
    let n = s.len();
    let mut x = Array1::zeros(n);
    let gamma0 = s.dot(&s);
    if gamma0 == 0.0 {
        // b is orthogonal to range(A): x = 0 is already optimal.
        return CglsOutcome {
            x,
            iterations: 0,
            converged: true,
        };
    }
    let mut r = b.clone();
    let mut p = s.clone();
    let mut gamma = gamma0;
    // Iterating past machine-precision stagnation amplifies rounding noise
    // exponentially (the step size gamma/delta divides by a noise-level
    // quantity), so we keep the iterate with the smallest gradient norm and
    // abort once the gradient rebounds far above that minimum.
    let mut best_x = x.clone();
    let mut best_gamma = gamma0;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        let q = apply_a(&p);
        let delta = q.dot(&q);
        if delta == 0.0 {
            // Search direction in the null space: nothing further to gain.
            converged = true;
            break;
        }
        let eta = gamma / delta;
        x.scaled_add(eta, &p);
        r.scaled_add(-eta, &q);
        s = apply_at(&r);
        let gamma_new = s.dot(&s);
        iterations += 1;
        if gamma_new < best_gamma {
            best_gamma = gamma_new;
            best_x.assign(&x);
        }
        if gamma_new.sqrt() <= tol * gamma0.sqrt() {
            converged = true;
            break;
        }
        if !gamma_new.is_finite() || gamma_new > 1e6 * best_gamma {
            break;
        }
        let beta = gamma_new / gamma;
        gamma = gamma_new;
        p = &s + &(&p * beta);
    }
    if converged {
        // The final iterate met the tolerance; prefer it outright.
        best_x = x;
    }
    CglsOutcome {
        x: best_x,
        iterations,
        converged,
    }
}
