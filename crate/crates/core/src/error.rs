use std::fmt;

use thiserror::Error;

/// A single violated parameter invariant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamViolation {
    pub field: &'static str,
    pub message: String,
}

impl fmt::Display for ParamViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {}", join_violations(.0))]
    InvalidParams(Vec<ParamViolation>),

    /// Input outside the domain where an operation is defined (negative
    /// densities, axis points for closed-form Jacobians, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// Mathematical precondition of an operation does not hold.
    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("invalid integrator options: {0}")]
    Options(String),

    #[error("integration failed at t = {time}: {reason}")]
    Integration { time: f64, reason: String },

    /// A search or iteration ran out of room without producing an answer.
    #[error("{0}")]
    NotFound(String),
}

fn join_violations(v: &[ParamViolation]) -> String {
    v.iter()
        .map(|e| e.message.as_str())
        .collect::<Vec<_>>()
        .join("; ")
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
