//! Error types shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration or parameter value violated a stated invariant.
    /// `field` names the offending key so callers can report it precisely.
    #[error("invalid {field}: {message}")]
    Validation { field: String, message: String },

    /// A text input (trace, cache list, plan file) could not be parsed.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("{what} index {index} out of range (max {bound})")]
    IndexOutOfBounds {
        what: &'static str,
        index: u64,
        bound: u64,
    },

    /// MRAM reads must be 8-byte aligned and within [8, 2048] bytes.
    #[error("MRAM read of {bytes} bytes violates alignment/size rules (8-byte aligned, 8..=2048)")]
    MramAlignment { bytes: u64 },

    /// No placement satisfies the capacity constraints.
    #[error("infeasible: {message} (minimum DPUs required: {min_dpus})")]
    Infeasible { message: String, min_dpus: u64 },

    #[error("capacity exhausted: {0}")]
    CapacityExhausted(String),

    /// A batch references an item the plan does not cover.
    #[error("plan does not cover item {index} (plan holds {bound} items)")]
    PlanCoverage { index: u64, bound: u64 },

    #[error("empty trace: {0}")]
    EmptyTrace(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            message: message.into(),
        }
    }

    pub fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
