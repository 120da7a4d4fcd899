//! Numerical laboratory for the two-dimensional parabolic Anderson model
//! with mollified white-noise potential and quadratic absorption, and for
//! the branching random walks in random environment whose scaling limit
//! that equation describes.
//!
//! The crate is organized around the analytic toolchain:
//!
//! * [`mollifier`]: the self-similar kernel family Psi^delta used by all
//!   scale-resolved norms;
//! * [`environment`]: lattice white noise, its smoothed realizations, the
//!   low-frequency-cut antiderivative I(xi), the renormalization constant
//!   C_alpha, and the two-point enhancements;
//! * [`lp`]: dyadic frequency blocks, Besov norms, paraproducts;
//! * [`norms`]: local distributional and Hoelder-type norms;
//! * [`solver`]: the semilinear equation dt u = (Laplace + xi_alpha -
//!   C_alpha) u - (kappa/2) u^2 + phi by splitting and by fixed-point
//!   iteration;
//! * [`estimates`]: barrier, interior-localization, and gradient bounds;
//! * [`brwre`]: the branching random walk, its exact lattice dual, and the
//!   Laplace-functional and compact-support experiments;
//! * [`cutoff`]: the box cutoff families used by the localization
//!   machinery.

pub mod archive;
pub mod cutoff;
pub mod environment;
pub mod error;
pub mod estimates;
pub mod grid;
pub mod fft;
pub mod heat;
pub mod lp;
pub mod mollifier;
pub mod norms;
pub mod solver;
pub mod weights;

pub use error::{LabError, Result};

/// C^2 quintic step: 0 for t <= 0, 1 for t >= 1, monotone in between.
/// All smooth transition profiles in the crate (frequency cutoffs, box
/// cutoff functions, dyadic partitions) are built from this one ramp.
pub fn quintic_step(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        t * t * t * (10.0 - 15.0 * t + 6.0 * t * t)
    }
}
