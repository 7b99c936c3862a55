use thiserror::Error;

/// Errors raised by the model, the solvers and the analysis helpers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("non-finite input: {0}")]
    NonFinite(&'static str),

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("state is not normalized (norm^2 = {norm2})")]
    NotNormalized { norm2: f64 },

    #[error("imbalance needs two distinct observables, got {0} twice")]
    SameObservable(String),

    #[error("unknown observable {0:?} (expected 1..4, L or R)")]
    UnknownObservable(String),

    /// The requested exact engine does not apply to these parameters.
    #[error("exact engine unavailable: {0}")]
    BranchViolation(String),

    #[error("singular linear system in {0}")]
    Singular(&'static str),

    #[error("integrator step size underflow at t = {t}")]
    StepUnderflow { t: f64 },

    #[error("integrator produced a non-finite state at t = {t}")]
    NonFiniteState { t: f64 },

    #[error("sample grid invalid: {0}")]
    InvalidGrid(String),

    #[error("window [{lo}, {hi}] lies outside the series domain")]
    WindowOutOfRange { lo: f64, hi: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
