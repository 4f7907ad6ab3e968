//! Configuration-driven experiments: the logic behind the `ttsa` binary.
//!
//! Every output file is derived deterministically from the config and the
//! seeds; only the manifests carry a wall-clock timestamp, and it is kept
//! out of their digests.

pub mod artifacts;
pub mod commands;
pub mod config;

use std::path::PathBuf;

pub use commands::{
    build_system, cmd_chain, cmd_diagnose, cmd_simulate, print_defaults, simulate_seed, BuiltSystem, Outcome,
};
pub use config::ExperimentConfig;

/// Process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Pass = 0,
    Fail = 1,
    ConfigError = 2,
    MissingArtifact = 3,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        self as i32
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("missing artifact: {}", .0.display())]
    MissingArtifact(PathBuf),
    #[error("unreadable artifact: {0}")]
    Artifact(String),
    #[error(transparent)]
    Run(#[from] crate::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_status(&self) -> ExitStatus {
        match self {
            Self::Config(_) => ExitStatus::ConfigError,
            Self::MissingArtifact(_) | Self::Artifact(_) => ExitStatus::MissingArtifact,
            Self::Run(_) | Self::Io(_) => ExitStatus::Fail,
        }
    }
}
