use std::io;

use thiserror::Error;

use crate::group::Violation;
use crate::sigma::ProofTranscript;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid group parameters: {0}")]
    InvalidParams(Violation),

    #[error("randomness source failed: {0}")]
    Entropy(String),

    #[error("salt must be at least {min} bytes, got {got}")]
    Salt { min: usize, got: usize },

    #[error("invalid contract content: {0}")]
    Content(String),

    #[error("value is not a member of the prime-order subgroup")]
    NotInSubgroup,

    #[error("scalar out of range [0, q)")]
    ScalarRange,

    #[error("protocol order violation: {0}")]
    OutOfOrder(String),

    #[error("malformed message: {0}")]
    Malformed(String),

    #[error("unknown term label `{0}`")]
    UnknownLabel(String),

    #[error("contract `{0}` is already registered")]
    Duplicate(String),

    #[error("contract `{0}` not found")]
    NotFound(String),

    #[error("ledger integrity failure at block {block}: {reason}")]
    Integrity { block: usize, reason: String },

    #[error("frame error: {0}")]
    Frame(String),

    #[error("decode error: {0}")]
    Decode(String),

    #[error("timed out waiting for peer")]
    Timeout,

    #[error("transport error: {0}")]
    Transport(io::Error),

    #[error("session aborted: {reason}")]
    Aborted { reason: String, partial: Option<Box<ProofTranscript>> },

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    /// The partially completed transcript carried by an aborted session.
    pub fn partial_transcript(&self) -> Option<&ProofTranscript> {
        match self {
            Error::Aborted { partial, .. } => partial.as_deref(),
            _ => None,
        }
    }
}
