use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("infeasible action: transmit {tx} mW exceeds available {avail} mW")]
    InfeasibleAction { tx: f64, avail: f64 },

    #[error("infeasible instance: {users} users cannot fit {channels} channels of capacity {capacity}")]
    InfeasibleInstance {
        users: usize,
        channels: usize,
        capacity: usize,
    },

    #[error("utility undefined: {0}")]
    UndefinedUtility(String),

    #[error("invalid swap: {0}")]
    InvalidSwap(String),

    #[error("swap phase did not converge within {0} iterations")]
    NonConvergence(usize),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("instance too large: {0}")]
    TooLarge(String),

    #[error("chain has no unique stationary distribution")]
    NoUniqueStationary,

    #[error("invalid config at `{path}`: {reason}")]
    InvalidConfig { path: String, reason: String },
}

impl Error {
    pub(crate) fn config(path: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidConfig {
            path: path.into(),
            reason: reason.into(),
        }
    }
}
