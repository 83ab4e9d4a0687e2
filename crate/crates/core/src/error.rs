use std::io;
use std::path::PathBuf;

use thiserror::Error;

/// Errors produced while building, persisting or querying an index.
#[derive(Debug, Error)]
pub enum Error {
    #[error("row {row}: {message}")]
    MalformedRow { row: usize, message: String },

    #[error("duplicate document id {0:?}")]
    DuplicateId(String),

    #[error("corpus has {0} document(s); at least two are required")]
    CorpusTooSmall(usize),

    #[error("lexicon is empty: relax min_df/max_df_ratio or check embedding coverage for the corpus languages")]
    EmptyLexicon,

    #[error("line {line}: {message}")]
    EmbeddingParse { line: usize, message: String },

    #[error("embedding dimension mismatch: registry has p={expected}, {lang:?} vectors have p={found}")]
    DimensionMismatch {
        lang: String,
        expected: usize,
        found: usize,
    },

    #[error("no embeddings loaded for language {0:?}")]
    MissingEmbedding(String),

    #[error("term {0:?} has no vector")]
    MissingVector(String),

    #[error("document {0:?} has an empty query row")]
    EmptyQuery(String),

    #[error("unknown document {0:?}")]
    UnknownDocument(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("requested {requested} neighbors but the cache holds {cached}; rebuild with a larger cache size")]
    ExceedsCache { requested: usize, cached: usize },

    #[error("bundle {path}: {message}")]
    Bundle { path: PathBuf, message: String },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True when the error stems from user input rather than an internal fault.
    pub fn is_user_error(&self) -> bool {
        !matches!(self, Error::Bundle { .. })
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
