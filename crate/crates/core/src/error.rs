use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RarmaError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("insufficient data: {rows}x{cols} grid cannot hold a model with w = {w}")]
    InsufficientData { rows: usize, cols: usize, w: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("parameter vector has {got} entries, order ({p},{q}) needs {expected}")]
    ParamLength {
        p: usize,
        q: usize,
        expected: usize,
        got: usize,
    },

    #[error("non-finite value during evaluation: {0}")]
    Evaluation(String),

    #[error("inference error: {0}")]
    Inference(String),
}

pub type Result<T> = std::result::Result<T, RarmaError>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(RarmaError::Domain(msg.into()))
}
