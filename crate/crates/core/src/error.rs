use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("syntax error at {line}:{col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },

    #[error("arity mismatch for {what}: expected {expected}, found {found}")]
    Arity {
        what: String,
        expected: usize,
        found: usize,
    },

    #[error("duplicate primitive {name}/{arity}")]
    DuplicatePrim { name: String, arity: usize },

    #[error("invalid problem: {0}")]
    Problem(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("internal invariant violated: {0}")]
    Invariant(String),

    #[error("smt encoding: {0}")]
    Smt(String),
}
