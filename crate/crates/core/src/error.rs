use thiserror::Error;

/// Errors raised by the exact engine, the checkers and the model builders.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("atom has non-positive probability {0}")]
    ZeroOrNegativeProbability(String),
    #[error("probabilities sum to {0}, not 1")]
    ProbabilitiesDoNotSumToOne(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("empty distribution")]
    EmptyDistribution,
    #[error("atom budget of {budget} exceeded")]
    AtomBudgetExceeded { budget: usize },
    #[error("search budget exceeded: {what} needs {needed}, budget is {budget}")]
    SearchBudgetExceeded {
        what: &'static str,
        needed: String,
        budget: usize,
    },
    #[error("value table does not cover {0}")]
    TableIncomplete(String),
    #[error("table is not monotone: {0}")]
    NotMonotone(String),
    #[error("coordinate subset is empty")]
    EmptySubset,
    #[error("coordinate {index} out of range for dimension {n}")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("subsets overlap at coordinate {0}")]
    OverlappingSubsets(usize),
    #[error("invalid probability: {0}")]
    InvalidProbability(String),
    #[error("round {round} is not negatively associated; pass a waiver to build anyway")]
    PreconditionNAFailed { round: usize },
    #[error("invalid model: {0}")]
    InvalidSpec(String),
    #[error("cannot parse rational {0:?}")]
    ParseRational(String),
}

pub type Result<T> = std::result::Result<T, Error>;
