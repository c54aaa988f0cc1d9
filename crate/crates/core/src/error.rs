use thiserror::Error;

/// Errors raised by the profile, eigenvalue and time-stepping routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum NskError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("vacuum: density reaches {min:.6e} at y = {y:.6}")]
    Vacuum { min: f64, y: f64 },

    #[error("profile file error: {0}")]
    ProfileFile(String),

    #[error(
        "degenerate threshold: rho' vanishes or changes sign (min |rho'| = {min_abs_d1:.3e}); \
         the capillary form is not positive definite and the threshold may be infinite"
    )]
    DegenerateThreshold { min_abs_d1: f64 },

    #[error("threshold not decreasing in k: kappa_c({k}) = {value:.12e} >= kappa_c({prev_k}) = {prev:.12e}")]
    Monotonicity { k: usize, value: f64, prev_k: usize, prev: f64 },

    #[error("threshold bound violated: kappa_c = {kappa_c:.12e} > {bound:.12e}")]
    BoundViolation { kappa_c: f64, bound: f64 },

    #[error("eigensolver did not converge: {0}")]
    NoConvergence(String),

    #[error("growth-rate bracket failure: {0}")]
    Bracket(String),

    #[error("time step unstable at t = {t:.6}: {reason}")]
    Cfl { t: f64, reason: String },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("fit error: {0}")]
    Fit(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for NskError {
    fn from(e: std::io::Error) -> Self {
        NskError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, NskError>;
