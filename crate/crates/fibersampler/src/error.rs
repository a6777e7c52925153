use std::fmt;

use fibersampler_core::Error as CoreError;

/// Process exit status classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitKind {
    Validation,
    Numeric,
    Capacity,
}

impl ExitKind {
    pub fn code(self) -> i32 {
        match self {
            ExitKind::Validation => 2,
            ExitKind::Numeric => 3,
            ExitKind::Capacity => 4,
        }
    }
}

/// An error tagged with the pipeline stage it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct RunError {
    pub kind: ExitKind,
    pub stage: String,
    pub message: String,
}

impl RunError {
    pub fn validation(stage: &str, message: impl Into<String>) -> Self {
        Self { kind: ExitKind::Validation, stage: stage.into(), message: message.into() }
    }

    pub fn from_core(stage: &str, err: CoreError) -> Self {
        let kind = match err {
            CoreError::Numeric(_) | CoreError::Fit { .. } | CoreError::Degenerate(_) | CoreError::Overflow => {
                ExitKind::Numeric
            }
            CoreError::Sizing { .. } | CoreError::OracleTooLarge { .. } => ExitKind::Capacity,
            _ => ExitKind::Validation,
        };
        Self { kind, stage: stage.into(), message: err.to_string() }
    }

    pub fn io(stage: &str, path: &std::path::Path, err: std::io::Error) -> Self {
        Self::validation(stage, format!("{}: {err}", path.display()))
    }
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {}", self.stage, self.message)
    }
}

impl std::error::Error for RunError {}

pub type RunResult<T> = Result<T, RunError>;

/// Attaches a stage label to core results.
pub trait Stage<T> {
    fn stage(self, stage: &str) -> RunResult<T>;
}

impl<T> Stage<T> for Result<T, CoreError> {
    fn stage(self, stage: &str) -> RunResult<T> {
        self.map_err(|e| RunError::from_core(stage, e))
    }
}
