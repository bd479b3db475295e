use crate::rule::State;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum Error {
    #[error("state {state} out of range for {n} states")]
    InvalidState { state: State, n: usize },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("table has {found} entries, expected {expected}")]
    Shape { expected: usize, found: usize },
    #[error("too large: {0}")]
    TooLarge(String),
    #[error("invalid family spec: {0}")]
    InvalidSpec(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("invalid argument: {0}")]
    InvalidArg(String),
    #[error("invalid state map: {0}")]
    InvalidMap(String),
    #[error("inconclusive: search budget of {budget} nodes exhausted")]
    Inconclusive { budget: u64 },
    #[error("configuration is not legal: {0}")]
    NotLegal(String),
    #[error("parameters outside hypothesis: {0}")]
    OutOfHypothesis(String),
    #[error("infeasible constraint: {0}")]
    InfeasibleConstraint(String),
    #[error("construction error at cell {cell}: {msg}")]
    Construction { cell: usize, msg: String },
}
