use alloc::string::String;

use crate::trajectory::RecordMode;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("system size L = {sites} exceeds the cap of {cap} sites")]
    SizeCap { sites: usize, cap: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("no convergence after {iterations} iterations (last increment {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("numerical inconsistency: {0}")]
    Numerical(String),

    #[error("operator is not positive definite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },

    #[error("expected a {expected:?} record, found {found:?}")]
    WrongMode {
        expected: RecordMode,
        found: RecordMode,
    },

    #[error("time offset {dt_steps} must be smaller than the record length {steps}")]
    OffsetTooLong { dt_steps: usize, steps: usize },
}
