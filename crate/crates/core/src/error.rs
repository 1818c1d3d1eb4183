use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("{func}({arg}) is outside its domain: {reason}")]
    Domain {
        func: &'static str,
        arg: f64,
        reason: &'static str,
    },

    #[error("division by zero: {0}")]
    Division(&'static str),

    #[error("no root found: {0}")]
    NoRoot(String),

    #[error("singular {what}: {detail}")]
    Singular { what: &'static str, detail: String },

    #[error("degenerate: {0}")]
    Degenerate(String),

    #[error("hypothesis not satisfied: {0}")]
    Hypothesis(String),

    #[error("configuration: {0}")]
    Config(String),
}
