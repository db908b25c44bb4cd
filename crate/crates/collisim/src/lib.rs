//! Reproducible experiment runner on top of `collisim-core`: configuration,
//! CSV and binary outputs, a Kraus-family cache, ordered parallel execution
//! and the validation suite.

pub mod cache;
pub mod checks;
pub mod commands;
pub mod config;
pub mod grid;
pub mod io;
pub mod runner;

pub use config::{Command, Manifest, RunConfig};
pub use grid::Grid;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("{0}")]
    Usage(String),

    #[error("malformed file: {0}")]
    Format(String),

    #[error("validation failed: {}", .0.join(", "))]
    Validation(Vec<String>),

    #[error("{0} grid points did not converge")]
    Convergence(usize),

    #[error(transparent)]
    Core(#[from] collisim_core::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Usage(_) => 2,
            RunError::Validation(_) => 3,
            RunError::Convergence(_) => 4,
            _ => 1,
        }
    }
}
