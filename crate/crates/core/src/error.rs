use std::io;

use thiserror::Error;

/// Errors raised while building instances, evaluating the oracle or running experiments.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension: k = {0} (must be at least 1)")]
    InvalidDimension(usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite input encountered in {0}")]
    NonFinite(&'static str),

    #[error("unsupported variant: {0}")]
    UnsupportedVariant(String),

    #[error("constant C(sigma/zeta) is undefined for sigma = {sigma}, zeta = {zeta} (requires sigma < 2 zeta)")]
    UndefinedConstant { sigma: f64, zeta: f64 },

    #[error("unknown method: {0}")]
    UnknownMethod(String),

    #[error("iteration count must be at least 1")]
    ZeroIterations,

    #[error("adversary step budget exceeded: step {step} > budget {budget}")]
    StepBudgetExceeded { step: usize, budget: usize },

    #[error("initial iterate must lie in span(e_k); residual {0:e}")]
    InitialIterate(f64),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
