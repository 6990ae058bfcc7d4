use std::path::PathBuf;

use serde_json::json;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid config at `{path}`: {reason}")]
    Config { path: String, reason: String },

    #[error("cannot access {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("self-test failed: {0}")]
    Selftest(String),

    #[error(transparent)]
    Core(wpiot::Error),
}

impl From<wpiot::Error> for CliError {
    fn from(e: wpiot::Error) -> Self {
        match e {
            wpiot::Error::InvalidConfig { path, reason } => CliError::Config { path, reason },
            other => CliError::Core(other),
        }
    }
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config { .. } => 2,
            _ => 1,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Config { .. } => "invalid_config",
            CliError::Io { .. } => "io",
            CliError::Selftest(_) => "selftest_failed",
            CliError::Core(e) => match e {
                wpiot::Error::InvalidArgument(_) => "invalid_argument",
                wpiot::Error::InfeasibleAction { .. } => "infeasible_action",
                wpiot::Error::InfeasibleInstance { .. } => "infeasible_instance",
                wpiot::Error::UndefinedUtility(_) => "undefined_utility",
                wpiot::Error::InvalidSwap(_) => "invalid_swap",
                wpiot::Error::NonConvergence(_) => "non_convergence",
                wpiot::Error::InvalidModel(_) => "invalid_model",
                wpiot::Error::TooLarge(_) => "too_large",
                wpiot::Error::NoUniqueStationary => "no_unique_stationary",
                wpiot::Error::InvalidConfig { .. } => "invalid_config",
            },
        }
    }

    /// Machine-readable form printed on stderr.
    pub fn to_json(&self) -> serde_json::Value {
        let mut body = json!({
            "kind": self.kind(),
            "message": self.to_string(),
        });
        if let CliError::Config { path, .. } = self {
            body["path"] = json!(path);
        }
        json!({ "error": body })
    }
}
