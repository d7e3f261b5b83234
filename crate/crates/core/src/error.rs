//! Crate-wide error type.
//!
//! Variants are grouped by how the CLI maps them to exit codes: structural
//! misuse and exceeded budgets are refusals, while `*Violation` variants mean
//! a claimed property was checked and found false.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Inputs do not satisfy an operation's contract (wrong arity, alphabet
    /// mismatch, index out of range, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    /// The request is well-formed but exceeds a configured size budget.
    #[error("budget exceeded: {0}")]
    Budget(String),

    /// A certificate or solution is structurally incomplete (missing
    /// distribution, wrong domain); distinct from a numeric violation.
    #[error("structural error: {0}")]
    Structure(String),

    /// An exact equality or inequality claimed by a certificate fails.
    #[error("verification violation: {0}")]
    Violation(String),

    /// A Gram matrix had an eigenvalue below the PSD tolerance.
    #[error("set not embeddable: min eigenvalue {min_eigenvalue}")]
    NotEmbeddable { min_eigenvalue: f64 },

    /// The closure of a cluster is not a hypertree; carries a description of
    /// the offending cycle.
    #[error("closure is not a tree: {0}")]
    NonTree(String),

    #[error("linear program infeasible")]
    Infeasible,

    #[error("linear program unbounded")]
    Unbounded,

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub fn budget(msg: impl Into<String>) -> Self {
        Error::Budget(msg.into())
    }

    pub fn structure(msg: impl Into<String>) -> Self {
        Error::Structure(msg.into())
    }

    pub fn violation(msg: impl Into<String>) -> Self {
        Error::Violation(msg.into())
    }
}
