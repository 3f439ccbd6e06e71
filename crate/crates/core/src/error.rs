use thiserror::Error;

/// Errors produced by the tests, solvers and simulation engine.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A quantity is mathematically undefined for the given arguments.
    #[error("domain error: {0}")]
    Domain(String),

    #[error(
        "support enumeration needs C({p},{s}) = {subsets} subsets, over the budget of {budget}; \
         use the SDP relaxation (adaptive-sdp variant) instead"
    )]
    BudgetExceeded {
        p: usize,
        s: usize,
        subsets: u128,
        budget: u64,
    },

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    /// No grid cell could be evaluated, so the test cannot decide.
    #[error("undecidable input: {0}")]
    Undecidable(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
