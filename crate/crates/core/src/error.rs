use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("{}:{line}: {message}", path.display())]
    Malformed {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("duplicate document id {id:?} (line {line})")]
    DuplicateId { id: String, line: usize },

    #[error("document {0:?} has no sentences")]
    EmptyDocument(String),

    #[error("document {doc_id:?}: sentence {index} is empty")]
    EmptySentence { doc_id: String, index: usize },

    #[error("not a permutation of 0..{len}: {detail}")]
    InvalidPermutation { len: usize, detail: String },

    #[error("probability {0} is outside [0, 1]")]
    ProbabilityOutOfRange(f64),

    #[error("pair ({i}, {j}) is invalid for a document of {v} sentences")]
    IndexOutOfRange { i: usize, j: usize, v: usize },

    #[error("no prediction for pair ({doc_id}, {i}, {j})")]
    MissingPair { doc_id: String, i: usize, j: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("empty corpus")]
    EmptyCorpus,

    #[error("{v} sentences exceeds the exhaustive search limit of {max}")]
    TooLarge { v: usize, max: usize },

    #[error("unknown document id {0:?}")]
    UnknownDocument(String),

    #[error("document {0:?} has no entry in the shuffle manifest")]
    MissingManifestEntry(String),

    #[error("duplicate annotation for story {story_id:?} by judge {judge_id:?}")]
    DuplicateAnnotation { story_id: String, judge_id: String },

    #[error("unknown story id {0:?}")]
    UnknownStory(String),

    #[error("invalid configuration: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn malformed(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Malformed {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    /// Process exit code: 2 for I/O failures, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } => 2,
            _ => 1,
        }
    }
}
