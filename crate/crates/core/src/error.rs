use thiserror::Error;

use crate::trace::Violation;

#[derive(Debug, Error)]
pub enum Error {
    #[error("config parse error at `{path}`: {msg}")]
    ConfigParse { path: String, msg: String },

    #[error("invalid config: {0}")]
    Invariant(String),

    #[error("undefined ratio: {0} has zero memory bytes")]
    UndefinedRatio(String),

    #[error("stream failed validation with {} violation(s); first: {}", .0.len(), .0.first().map(|v| v.to_string()).unwrap_or_default())]
    Validation(Vec<Violation>),

    #[error("simulation error at command {index}: {msg}")]
    Simulation { index: usize, msg: String },

    #[error("stream has multi-bank compute without parity tags (command {0} is all-bank)")]
    MissingParityTags(usize),

    #[error("trace parse error on line {line}: {msg}")]
    TraceParse { line: usize, msg: String },

    #[error("graph error: {0}")]
    Graph(String),

    #[error("experiment error: {0}")]
    Experiment(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
