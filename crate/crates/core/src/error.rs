//! Error type shared by every numerical component.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LabError {
    /// Two fields or operators live on incompatible grids.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// A requested scale cannot be represented on the grid.
    #[error("unresolvable scale: {0}")]
    Resolution(String),

    /// An argument is outside the domain an operation is defined on.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A constructed object failed one of its own certificates.
    #[error("construction failed: {0}")]
    Construction(String),

    /// The explicit time stepper left its stability region.
    #[error("step size {dt:.3e} exceeds the stability bound {dt_max:.3e}; retry with dt <= {dt_max:.3e}")]
    StepSize { dt: f64, dt_max: f64 },

    /// A trajectory blew up before the final time.
    #[error("solution diverged at t = {t:.6}: sup-norm {sup:.3e}")]
    Diverged { t: f64, sup: f64 },

    /// A fixed-point iteration stopped contracting.
    #[error("fixed-point iteration stalled: {0}")]
    NonContraction(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    /// A binary archive is malformed or belongs to a different layout.
    #[error("archive format: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, LabError>;
