use alloc::string::String;

/// Failure classes surfaced by the core library.
///
/// Variants map onto the CLI exit-code classes: `Validation`/`Contract`
/// are validation failures, `Numeric`/`Fit` numeric ones and the
/// capacity-style errors (`Sizing`, `OracleTooLarge`, `Overflow`) are
/// capacity failures.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Validation(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("model size {requested} exceeds the configured maximum {max}")]
    Sizing { requested: usize, max: usize },
    #[error("integer overflow during exact elimination; retry with wide integers")]
    Overflow,
    #[error("fit did not converge after {iterations} iterations (margin gap {gap:e})")]
    Fit { iterations: usize, gap: f64 },
    #[error("degenerate data: {0}")]
    Degenerate(String),
    #[error("non-finite value in {0}")]
    Numeric(String),
    #[error("fiber has more than {cap} points")]
    OracleTooLarge { cap: usize },
    #[error("decomposition produced no usable subproblem: {0}")]
    Decomposition(String),
    #[error("cannot lift move: {0}")]
    Lifting(String),
    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T> = core::result::Result<T, Error>;
