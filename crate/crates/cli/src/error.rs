use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Parse or validation failure; `line` is absent for values that came
    /// from a preset or a command-line override.
    #[error("config error{}: {message}", line.map(|l| format!(" (line {l})")).unwrap_or_default())]
    Config { line: Option<usize>, message: String },

    #[error("grid construction failed: {0}")]
    Grid(tubeot_core::Error),

    #[error("solver setup failed: {0}")]
    Solver(tubeot_core::Error),

    #[error("post-processing failed: {0}")]
    Validate(tubeot_core::Error),

    #[error("cannot write {}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn config(line: Option<usize>, message: impl Into<String>) -> Self {
        CliError::Config { line, message: message.into() }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => exit::CONFIG,
            CliError::Grid(_) => exit::GRID,
            CliError::Solver(_) | CliError::Validate(_) => exit::SOLVER,
            CliError::Io { .. } => exit::IO,
        }
    }
}

/// Process exit statuses.
pub mod exit {
    pub const OK: i32 = 0;
    /// The iteration stopped at `max_iters` without meeting the tolerance.
    pub const NOT_CONVERGED: i32 = 1;
    pub const DIVERGED: i32 = 2;
    pub const CONFIG: i32 = 3;
    pub const GRID: i32 = 4;
    pub const SOLVER: i32 = 5;
    pub const IO: i32 = 6;
}
