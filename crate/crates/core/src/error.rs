//! Error type shared across the crate.

use thiserror::Error;

/// Unified error for all library operations.
#[derive(Debug, Error)]
pub enum Error {
    /// Operand shapes are incompatible.
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    /// A value lies outside the operation's domain.
    #[error("domain error: {0}")]
    Domain(String),
    /// Invalid or inconsistent configuration.
    #[error("config error: {0}")]
    Config(String),
    /// A party observed a message or state violating the protocol.
    #[error("protocol error: {0}")]
    Protocol(String),
    /// Input data could not be ingested.
    #[error("ingestion error: {0}")]
    Ingestion(String),
    /// A serialized artifact could not be parsed.
    #[error("parse error: {0}")]
    Parse(String),
    /// A real value does not fit the fixed-point ring.
    #[error("encoding overflow: {0}")]
    Overflow(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn dimension(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
    pub fn protocol(msg: impl Into<String>) -> Self {
        Error::Protocol(msg.into())
    }
    pub fn ingestion(msg: impl Into<String>) -> Self {
        Error::Ingestion(msg.into())
    }
    pub fn parse(msg: impl Into<String>) -> Self {
        Error::Parse(msg.into())
    }
    pub fn overflow(msg: impl Into<String>) -> Self {
        Error::Overflow(msg.into())
    }
}
