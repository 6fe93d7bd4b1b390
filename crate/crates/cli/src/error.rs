//! Command failures, bucketed by process exit status: configuration
//! problems exit 2, oracle failures 3, data errors 4.

use std::process::ExitCode;

use conserva_core::learn::LearnError;
use conserva_core::pipeline::PipelineError;

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, unusable configuration, missing referenced files.
    Config(String),
    /// The malice oracle could not produce a verdict.
    Oracle(String),
    /// Corpus documents or derived artifacts that cannot be processed.
    Data(String),
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub fn data(msg: impl Into<String>) -> Self {
        CliError::Data(msg.into())
    }

    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Config(_) => ExitCode::from(2),
            CliError::Oracle(_) => ExitCode::from(3),
            CliError::Data(_) => ExitCode::from(4),
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration: {m}"),
            CliError::Oracle(m) => write!(f, "oracle: {m}"),
            CliError::Data(m) => write!(f, "data: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Oracle { .. } => CliError::Oracle(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<LearnError> for CliError {
    fn from(e: LearnError) -> Self {
        match e {
            // A feature name that does not exist in the space can only come
            // from configuration (a frozen list).
            LearnError::UnknownFeature(_) => CliError::Config(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}
