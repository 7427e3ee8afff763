//! Command-line front end: configs in, CSV/JSON and a manifest out.

pub mod commands;
pub mod config;
pub mod manifest;

use thiserror::Error;

/// Process exit codes.
pub mod exit {
    pub const PASS: i32 = 0;
    pub const OTHER: i32 = 1;
    pub const CONFIG: i32 = 2;
    pub const NO_BOUND_STATE: i32 = 3;
    pub const GATE: i32 = 4;
    pub const RESOLUTION: i32 = 5;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] degenspec::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use degenspec::Error as E;
        match self {
            CliError::Usage(_) | CliError::Config(_) => exit::CONFIG,
            CliError::Core(e) => match e {
                E::InvalidParameter(_) | E::LevelOutOfRange { .. } | E::OutOfRange { .. } | E::Unsupported(_) => {
                    exit::CONFIG
                }
                E::NoBoundState { .. } => exit::NO_BOUND_STATE,
                E::Resolution(_) | E::NeumannDivergence { .. } => exit::RESOLUTION,
                _ => exit::OTHER,
            },
            CliError::Io(_) | CliError::Json(_) => exit::OTHER,
        }
    }
}
