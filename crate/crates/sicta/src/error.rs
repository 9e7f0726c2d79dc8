//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by policy validation, tree generation, the exact DP and
/// the Monte Carlo driver.
#[derive(Debug, Error)]
pub enum Error {
    /// A splitting policy failed validation (d < 2, bad probabilities, ...).
    #[error("invalid policy: {0}")]
    InvalidPolicy(String),

    /// A flag or parameter is out of range.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// An operation was called with inputs violating its contract
    /// (e.g. an occupancy vector that does not sum to n).
    #[error("contract violation: {0}")]
    ContractViolation(String),

    /// The splitting recursion reached `max_depth` without resolving.
    /// Signals a pathological random excursion or a near-degenerate policy.
    #[error("splitting tree exceeded max depth {max_depth}")]
    DepthExceeded { max_depth: usize },

    /// One or more Monte Carlo runs failed; the gated protocol has no
    /// recovery story for truncated trees, so the experiment is aborted.
    #[error("{failed} of {runs} runs exceeded max depth {max_depth}")]
    RunsFailed {
        failed: u64,
        runs: u64,
        max_depth: usize,
    },

    /// The exact table would require enumerating more compositions than the
    /// configured budget allows.
    #[error(
        "composition budget exceeded for n_max={n_max}, d={d}: {required} compositions > budget {budget}"
    )]
    BudgetExceeded {
        n_max: usize,
        d: usize,
        required: u128,
        budget: u128,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code class: 1 for usage/validation, 2 for runtime failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidPolicy(_) | Error::InvalidArgument(_) => 1,
            Error::ContractViolation(_)
            | Error::DepthExceeded { .. }
            | Error::RunsFailed { .. }
            | Error::BudgetExceeded { .. }
            | Error::Io(_) => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
