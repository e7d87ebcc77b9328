// SPDX-License-Identifier: MIT OR Apache-2.0

//! Error type shared by every module of the crate.

use std::io;

/// Errors produced by `langdim`.
#[derive(Debug, thiserror::Error)]
#[non_exhaustive]
pub enum Error {
    /// The byte stream is not a well-formed LDIM file.
    #[error("format error at byte {offset}: {message}")]
    Format { offset: u64, message: String },

    /// The byte stream ended early.
    #[error("truncated stream at byte {offset}{}", sentence_suffix(*.sentence_id))]
    Truncated { offset: u64, sentence_id: Option<u32> },

    /// A non-finite value was found in activation data.
    #[error("data integrity error: {0}")]
    DataIntegrity(String),

    /// Two vectors or tensors disagree on a dimension.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// A requested layer is not stored in the corpus.
    #[error("layer {0} is not present")]
    MissingLayer(u32),

    /// Token filtering removed every position of a sentence.
    #[error("sentence {0} has no tokens left after filtering")]
    EmptySentence(u32),

    /// No sentence vectors were supplied to a corpus mean.
    #[error("empty corpus")]
    EmptyCorpus,

    /// Inconsistent or invalid configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// A count or index is outside its permitted range.
    #[error("range error: {0}")]
    Range(String),

    /// A line of a text file could not be parsed.
    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    /// Structurally valid input that violates a semantic rule.
    #[error("validation error: {0}")]
    Validation(String),

    /// A token or word is not in the model vocabulary.
    #[error("vocabulary error: {0}")]
    Vocabulary(String),

    /// Invalid input to a metric or classifier.
    #[error("input error: {0}")]
    Input(String),

    /// Not enough sentences to draw the requested sample.
    #[error("sample error: {0}")]
    Sample(String),

    /// An external resource the operation needs is missing.
    #[error("dependency error: {0}")]
    Dependency(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

fn sentence_suffix(id: Option<u32>) -> String {
    match id {
        Some(id) => format!(" inside record for sentence {id}"),
        None => String::new(),
    }
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Self::Config(msg.into())
    }

    pub(crate) fn format(offset: u64, msg: impl Into<String>) -> Self {
        Self::Format {
            offset,
            message: msg.into(),
        }
    }

    /// Process exit code for command-line use: 2 for configuration
    /// problems, 3 for data problems.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) | Self::Range(_) => 2,
            _ => 3,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
