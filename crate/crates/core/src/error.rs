//! Crate-wide error type.
//!
//! Variants map one-to-one onto the failure classes the operations can hit:
//! out-of-domain parameters, malformed or inconsistent configuration,
//! degenerate geometry, matrices over the dense limit, too few realizations
//! for a statistic, and eigensolver non-convergence.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A numeric parameter lies outside its mathematical domain
    /// (probability outside [0,1], non-positive Laplace time, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// Structurally invalid or mutually inconsistent configuration
    /// (non-increasing exhaustion schedule, mismatched ensemble specs, ...).
    #[error("config error: {0}")]
    Config(String),

    /// Degenerate geometry: duplicate points, zero-volume windows,
    /// collinear input where a triangulation was requested.
    #[error("degeneracy error: {0}")]
    Degeneracy(String),

    /// A matrix dimension exceeds the dense eigensolver limit.
    #[error("size error: {0}")]
    Size(String),

    /// Too few realizations to form the requested statistic.
    #[error("statistics error: {0}")]
    Statistics(String),

    /// Numerical failure (eigensolver did not converge within its sweep
    /// budget). The message names the dump file when one could be written.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// Artifact or file I/O failed.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// A serialized artifact did not parse or failed validation; the
    /// message names the offending field.
    #[error("format error: {0}")]
    Format(String),
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
    pub fn degeneracy(msg: impl Into<String>) -> Self {
        Error::Degeneracy(msg.into())
    }
    pub fn size(msg: impl Into<String>) -> Self {
        Error::Size(msg.into())
    }
    pub fn statistics(msg: impl Into<String>) -> Self {
        Error::Statistics(msg.into())
    }
    pub fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }
    pub fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }
}
