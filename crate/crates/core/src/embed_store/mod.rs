//! Image/caption embedding datastore and exact cosine retrieval.
//!
//! A [`Datastore`] is loaded once from two vector files (images, captions),
//! a JSON Lines metadata file and an optional translations file, validated,
//! and then only read. All retrieval is an exact scan; results are ordered by
//! descending cosine with ties broken by ascending id.

mod datastore;
pub mod format;
mod retrieval;
mod vector;

use std::path::{Path, PathBuf};

use thiserror::Error;

pub use datastore::{
    build_datastore, write_datastore, CaptionRecord, Datastore, DatastoreFiles, ImageRecord, Split, SplitFilter,
    StoreSummary, TranslationTable,
};
pub use retrieval::{rank_captions_of_image, retrieve_captions, retrieve_images, RetrievalHit};
pub use vector::{cosine_similarity, EmbeddingVector, VectorTable};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StoreError {
    #[error("{path}: {source}")]
    InFile {
        path: PathBuf,
        #[source]
        source: Box<StoreError>,
    },
    #[error("cannot open {path}: {message}")]
    Open { path: PathBuf, message: String },
    #[error("i/o error: {0}")]
    Io(String),
    #[error("bad magic (expected \"EVEC\")")]
    BadMagic,
    #[error("unsupported vector format version {0}")]
    UnsupportedVersion(u32),
    #[error("unsupported dtype code {0} (only 1 = float32)")]
    UnsupportedDtype(u8),
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("truncated vector payload: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("empty embedding vector")]
    EmptyVector,
    #[error("non-finite value at position {index}")]
    NonFinite { index: usize },
    #[error("degenerate embedding")]
    DegenerateEmbedding,
    #[error("degenerate embedding: {table} row {row} has zero norm")]
    DegenerateRow { table: &'static str, row: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("dangling embedding_row {row} for {kind} {id:?} ({count} vectors available)")]
    DanglingRow {
        kind: &'static str,
        id: String,
        row: u64,
        count: usize,
    },
    #[error("duplicate {kind} id {id:?}")]
    DuplicateId { kind: &'static str, id: String },
    #[error("empty datastore")]
    EmptyDatastore,
    #[error("malformed metadata at line {line}: {message}")]
    Metadata { line: usize, message: String },
    #[error("image {image_id:?}: conflicting values for {field}")]
    InconsistentImage { image_id: String, field: &'static str },
    #[error("image {0:?} has no row carrying image_row/image_ref")]
    MissingImageFields(String),
    #[error("empty text for caption {0:?}")]
    EmptyText(String),
    #[error("malformed translation at line {line}: {message}")]
    Translation { line: usize, message: String },
    #[error("unknown image id {0:?}")]
    UnknownImage(String),
    #[error("unknown caption id {0:?}")]
    UnknownCaption(String),
}

impl StoreError {
    pub(crate) fn open(path: &Path, err: std::io::Error) -> Self {
        StoreError::Open {
            path: path.to_path_buf(),
            message: err.to_string(),
        }
    }

    pub(crate) fn at(self, path: &Path) -> Self {
        match self {
            e @ (StoreError::Open { .. } | StoreError::InFile { .. }) => e,
            e => StoreError::InFile {
                path: path.to_path_buf(),
                source: Box::new(e),
            },
        }
    }

    /// The innermost error, skipping file-location wrappers.
    pub fn root(&self) -> &StoreError {
        match self {
            StoreError::InFile { source, .. } => source.root(),
            e => e,
        }
    }
}
