use icewatch_core::gate::GateError;
use icewatch_core::learners::LearnerError;
use icewatch_core::pipeline::PipelineError;
use icewatch_core::synth::SynthError;
use thiserror::Error;

use crate::formats::DataError;

/// Top-level failure, split by the exit code it maps to.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
        }
    }

    pub fn config(msg: impl std::fmt::Display) -> Self {
        CliError::Config(msg.to_string())
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        CliError::config(e)
    }
}

impl From<GateError> for CliError {
    fn from(e: GateError) -> Self {
        CliError::config(e)
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Config(_)
            | PipelineError::Gate(_)
            | PipelineError::Learner(LearnerError::Config(_)) => CliError::config(e),
            _ => CliError::Data(e.to_string()),
        }
    }
}
