//! Error taxonomy shared across the crate.

use thiserror::Error;

/// Errors produced by mesh construction, space configuration, assembly and
/// solves. Usage/validation/configuration errors indicate a bad input;
/// numeric errors indicate a breakdown during an otherwise valid run.
#[derive(Debug, Error)]
pub enum Error {
    /// Mismatched ambient dimension, degree or shape between operands.
    #[error("usage error: {0}")]
    Usage(String),

    /// Invalid mesh or space data; names the first offending entity.
    #[error("validation error: {0}")]
    Validation(String),

    /// Method/space/penalty combination that violates a structural
    /// hypothesis of the requested method family.
    #[error("configuration error: {0}")]
    Config(String),

    /// Solver breakdown (non-convergence, hopeless conditioning).
    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
