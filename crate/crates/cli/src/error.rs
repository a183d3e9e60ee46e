use factoid_core::corpus::{CorpusError, StatsError};
use factoid_core::embedding::EmbeddingError;
use factoid_core::eval::EvalError;
use factoid_core::forge::ForgeError;
use factoid_core::gate::GateError;
use factoid_core::hvi::HviError;
use factoid_core::oracle::OracleError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Provider(String),
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Input(_) => 2,
            CliError::Provider(_) => 3,
            CliError::Internal(_) => 4,
        }
    }

    pub fn input(what: impl std::fmt::Display, e: impl std::fmt::Display) -> Self {
        CliError::Input(format!("{what}: {e}"))
    }
}

impl From<OracleError> for CliError {
    fn from(e: OracleError) -> Self {
        match e {
            OracleError::Fixture(_) => CliError::Input(e.to_string()),
            _ => CliError::Provider(e.to_string()),
        }
    }
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<StatsError> for CliError {
    fn from(e: StatsError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<EmbeddingError> for CliError {
    fn from(e: EmbeddingError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<GateError> for CliError {
    fn from(e: GateError) -> Self {
        match e {
            GateError::Oracle(o) => o.into(),
            other => CliError::Input(other.to_string()),
        }
    }
}

impl From<ForgeError> for CliError {
    fn from(e: ForgeError) -> Self {
        match e {
            ForgeError::Oracle(o) => o.into(),
            ForgeError::Gate(g) => g.into(),
            ForgeError::Embedding(x) => x.into(),
            ForgeError::Config(m) => CliError::Usage(format!("invalid forge config: {m}")),
            ForgeError::Invariant { .. } => CliError::Internal(e.to_string()),
            other => CliError::Input(other.to_string()),
        }
    }
}

impl From<HviError> for CliError {
    fn from(e: HviError) -> Self {
        match e {
            HviError::Config(m) => CliError::Usage(m),
            other => CliError::Input(other.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        CliError::Input(e.to_string())
    }
}
