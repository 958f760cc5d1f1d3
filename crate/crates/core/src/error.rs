use thiserror::Error;

/// Errors raised anywhere in the solver and simulator.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid value for `{key}`: {constraint}")]
    Validation { key: String, constraint: String },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("relative value iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("policy evaluation failed: {0}")]
    Evaluation(String),

    #[error("no feasible multiplier found: {0}")]
    Infeasible(String),

    #[error("corrupted policy: {0}")]
    CorruptedPolicy(String),

    #[error("state diverged at slot {slot}")]
    Divergence { slot: u64 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn validation(key: impl Into<String>, constraint: impl Into<String>) -> Self {
        Error::Validation { key: key.into(), constraint: constraint.into() }
    }
}
