use thiserror::Error;

/// Errors raised by the engine.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum KamError {
    #[error("relator {relator} position {position}: letter index {letter} outside [1, {max}]")]
    InvalidLetter {
        relator: usize,
        position: usize,
        letter: i64,
        max: usize,
    },

    #[error("relator {relator} is empty")]
    EmptyRelator { relator: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("displacement too large: derivative majorant {deriv:.3e} exceeds gate {gate:.3e}")]
    DisplacementTooLarge { deriv: f64, gate: f64 },

    #[error("sampling grid of {have} points per axis cannot resolve the input; need at least {required}")]
    GridTooSmall { have: usize, required: usize },

    #[error("fixed-point iteration for the inverse map failed to contract (step {iteration}, increment {increment:.3e})")]
    NonContraction { iteration: usize, increment: f64 },

    #[error("effective resonance at mode {mode:?} (smallest nonzero eigenvalue {mu_min:.3e})")]
    Resonance { mode: Vec<i64>, mu_min: f64 },

    #[error("action is trivial on all scanned modes")]
    TrivialAction,

    #[error("reality constraint violated: imaginary part {imag:.3e} at evaluation point")]
    RealityViolation { imag: f64 },

    #[error("serialization: {0}")]
    Serialization(String),
}

pub type Result<T> = std::result::Result<T, KamError>;
