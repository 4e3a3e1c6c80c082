use thiserror::Error;

/// Every failure the library can report.
///
/// Variants split into two groups for the command-line front end: input
/// problems (bad family name, parameter outside the domain, malformed
/// configuration) and numerical problems (quadrature did not converge, a
/// singular matrix, a step-size check failed). See [`WimError::is_input_error`].
#[derive(Debug, Error, Clone, PartialEq)]
pub enum WimError {
    #[error("parameter {theta:?} outside the domain of `{family}`: {reason}")]
    Domain {
        family: String,
        theta: Vec<f64>,
        reason: String,
    },

    #[error("unknown family `{0}`")]
    UnknownFamily(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("`{family}` is not smooth; {what} is undefined (use the distance-based estimate)")]
    NotSmooth { family: String, what: String },

    #[error("Fisher {what} of `{family}` is not well-defined (component `{component}`)")]
    NotWellDefined {
        family: String,
        component: String,
        what: String,
    },

    #[error("quadrature failed: {0}")]
    QuadratureFailure(String),

    #[error("division by zero: {0}")]
    DivisionByZero(String),

    #[error("information matrix is singular or not positive definite")]
    SingularWim,

    #[error("finite-difference step check failed: relative error estimate {rel_err:.3e} exceeds {limit:.0e}")]
    StepTooSmall { rel_err: f64, limit: f64 },

    #[error("statistic gradient is not square-integrable: {0}")]
    NotIntegrable(String),

    #[error("input is not a cumulative distribution function: {0}")]
    NonCdfInput(String),

    #[error("not enough data points for a fit: need {need}, got {got}")]
    InsufficientData { need: usize, got: usize },

    #[error("parameter left the domain at step {t}: {theta:?}")]
    DomainEscape { t: u64, theta: Vec<f64> },

    #[error("metric is not differentiable at {theta:?}")]
    NonDifferentiableMetric { theta: Vec<f64> },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl WimError {
    /// True for errors caused by the caller's input rather than by numerics.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            WimError::Domain { .. }
                | WimError::UnknownFamily(_)
                | WimError::DimensionMismatch { .. }
                | WimError::Config(_)
                | WimError::NotWellDefined { .. }
                | WimError::NotSmooth { .. }
                | WimError::NotIntegrable(_)
                | WimError::Io(_)
        )
    }
}

impl From<std::io::Error> for WimError {
    fn from(e: std::io::Error) -> Self {
        WimError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, WimError>;
