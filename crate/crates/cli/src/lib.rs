//! Library side of the `ising-pca` command-line tool: configuration
//! handling and the subcommands, callable without spawning a process.

pub mod commands;
pub mod config;
pub mod fuzzing;

use thiserror::Error;

pub use commands::{execute, execute_with, Subcommand, VerifyHooks};
pub use config::RunConfig;

/// Environment variable naming a directory for relative or default output paths.
pub const OUT_DIR_ENV: &str = "ISING_PCA_OUT_DIR";

pub const EXIT_OK: u8 = 0;
pub const EXIT_CHECK_FAILED: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),

    #[error("{0}")]
    Io(String),

    #[error(transparent)]
    Library(#[from] ising_pca::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        use ising_pca::Error as E;
        match self {
            CliError::Config(_) | CliError::Io(_) => EXIT_CONFIG,
            CliError::Library(e) => match e {
                E::InvalidSide { .. }
                | E::SideTooLarge { .. }
                | E::KindMismatch { .. }
                | E::TooLarge { .. }
                | E::DimensionMismatch { .. }
                | E::Domain(_)
                | E::Parse(_) => EXIT_CONFIG,
                E::UnknownBond(_) | E::Overflow(_) => EXIT_CHECK_FAILED,
            },
        }
    }
}
