use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An input violated one of a type's invariants.
    #[error("validation failed: {0}")]
    Validation(String),

    /// An operation was called with an argument of the wrong kind,
    /// e.g. a single-measurement setting where a joint one is required.
    #[error("usage error: {0}")]
    Usage(String),

    /// Inputs that must describe the same run disagree.
    #[error("inconsistent inputs: {0}")]
    Consistency(String),

    #[error("value outside domain: {0}")]
    Domain(String),

    #[error("no root found after {starts} starts (best residual norm {best_residual:.3e} at theta=({best_theta1:.6}, {best_theta2:.6}))")]
    Convergence {
        starts: usize,
        best_residual: f64,
        best_theta1: f64,
        best_theta2: f64,
    },

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("calibration matrix is ill-conditioned (condition number {condition:.3e}); use constrained mode or recalibrate")]
    IllConditioned { condition: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
