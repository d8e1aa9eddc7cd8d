use thiserror::Error;

/// Errors raised by the solver and its diagnostics.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("component mismatch: expected {expected} components, found {found}")]
    ComponentMismatch { expected: usize, found: usize },

    #[error("requested {requested} Galerkin modes but the grid retains only {capacity}")]
    ModeCapacity { requested: usize, capacity: usize },

    #[error("positivity breach: density {value:e} at grid index {index}")]
    PositivityBreach { index: usize, value: f64 },

    #[error("mass operator not positive definite (smallest eigenvalue {min_eigenvalue:e}, density floor {floor:e})")]
    MassNotPositive { min_eigenvalue: f64, floor: f64 },

    #[error("non-finite value produced by {0}")]
    NonFinite(&'static str),

    #[error("insufficient ensemble: {found} paths, at least {required} required")]
    InsufficientEnsemble { found: usize, required: usize },

    #[error("renormalization `{0}` was not tracked during the run")]
    UntrackedRenormalization(String),

    #[error("step {step} (t = {time}) failed: {cause}")]
    StepFailure { step: usize, time: f64, cause: Box<Error> },

    #[error("{path}: {message}")]
    Io { path: String, message: String },

    #[error("{0}")]
    Invalid(String),
}

impl Error {
    /// Configuration problems (rejected before any computation).
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter { .. }
                | Error::GridMismatch(_)
                | Error::ComponentMismatch { .. }
                | Error::ModeCapacity { .. }
                | Error::InsufficientEnsemble { .. }
                | Error::UntrackedRenormalization(_)
                | Error::Invalid(_)
        )
    }

    /// Breaches detected while stepping.
    pub fn is_runtime_breach(&self) -> bool {
        matches!(
            self,
            Error::StepFailure { .. }
                | Error::PositivityBreach { .. }
                | Error::MassNotPositive { .. }
                | Error::NonFinite(_)
        )
    }

    pub(crate) fn io(path: &std::path::Path, e: impl std::fmt::Display) -> Self {
        Error::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
