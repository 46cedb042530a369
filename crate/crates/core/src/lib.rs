//! Online subspace tracking and matrix completion from incomplete data.
//!
//! The crate implements a recursive projected-least-squares tracker for data
//! vectors `y_t` that lie close to a slowly switching low-dimensional
//! subspace and arrive with per-frame missing entries (and, in the robust
//! variant, additive sparse corruptions). Sub-modules:
//!
//! - [`linalg`]: the small dense kernels everything else is built from
//!   (orthonormalization, truncated SVD by block power iteration, CGLS,
//!   principal angles, skew-symmetric matrix exponential).
//! - [`datagen`]: synthetic piecewise-constant subspace streams with
//!   Bernoulli or moving-object missing patterns, optional noise/outliers.
//! - [`tracker`]: the online tracker (projected LS fill, mini-batch SVD
//!   updates, change detection, offline smoothing, matrix completion).
//! - [`variants`]: sample-efficient, sliding-window and buffer-reuse
//!   schedule variants of the same state machine.
//! - [`robust`]: tracking when frames also carry sparse outliers
//!   (support-aware l1 demixing per frame, batch robust-PCA init).
//! - [`metrics`]: error series, detection reports, run summaries.

// Link the system BLAS backend for ndarray's matrix products.
use blas_src as _;
use openblas_src as _;

pub mod datagen;
pub mod linalg;
pub mod metrics;
pub mod robust;
pub mod seeds;
pub mod tracker;
pub mod variants;

pub use linalg::{BasisMatrix, IndexSet};
