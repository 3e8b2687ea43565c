use thiserror::Error;

/// Errors raised by the certification and verification routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A parameter is outside the domain the operation is defined on.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A hypothesis needed by a construction does not hold for the input.
    #[error("premise violated: {0}")]
    PremiseViolated(String),

    /// A function sample came back NaN or infinite.
    #[error("non-finite integrand sample at {point:?} (mode {mode})")]
    NonFinite { mode: usize, point: Vec<f64> },

    /// Operation needs pointwise eigenfunctions but the basis is diagonal data only.
    #[error("basis has no eigenfunction evaluator: {0}")]
    NoEvaluator(String),

    #[error("basis mismatch: {0}")]
    BasisMismatch(String),

    /// Damping block has an eigenvalue below the dissipativity tolerance.
    #[error("damping is not dissipative (smallest eigenvalue {min_eigenvalue:e})")]
    NonDissipative { min_eigenvalue: f64 },

    /// `is - A` is numerically singular.
    #[error("is - A is singular at s = {s} (unstable input)")]
    Singular { s: f64 },

    /// An input is not smooth enough for the bound being applied.
    #[error("regularity requirement not met: {0}")]
    Regularity(String),

    #[error("integrator failed: {0}")]
    Integrator(String),

    #[error("numerical failure: {0}")]
    Numeric(String),
}

impl Error {
    /// Short machine-readable reason tag.
    pub fn reason(&self) -> &'static str {
        match self {
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::PremiseViolated(_) => "premise_violated",
            Error::NonFinite { .. } => "non_finite",
            Error::NoEvaluator(_) => "no_evaluator",
            Error::BasisMismatch(_) => "basis_mismatch",
            Error::NonDissipative { .. } => "non_dissipative",
            Error::Singular { .. } => "singular",
            Error::Regularity(_) => "regularity",
            Error::Integrator(_) => "integrator",
            Error::Numeric(_) => "numeric",
        }
    }

    /// True for errors caused by the input rather than by the numerics.
    pub fn is_input_error(&self) -> bool {
        !matches!(self, Error::Integrator(_) | Error::Numeric(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
