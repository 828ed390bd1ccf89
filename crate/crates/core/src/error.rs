use std::path::PathBuf;

use thiserror::Error;

/// Every failure the library can report. Each variant renders as a distinct
/// one-line diagnostic, which the CLI prints verbatim.
#[derive(Debug, Error)]
pub enum Error {
    // taxonomy
    #[error("empty label path (record {index})")]
    EmptyPath { index: usize },
    #[error("inconsistent hierarchy: {0}")]
    InconsistentHierarchy(String),
    #[error("same class: dissimilarity is undefined for a node paired with itself (node {0})")]
    SameClass(usize),
    #[error("unknown node handle {0}")]
    InvalidNode(usize),

    // embedder
    #[error("bad layer dimensions {0:?}: need at least two positive sizes")]
    BadDims(Vec<usize>),
    #[error("pre-normalization vector collapsed to zero (norm {norm:e}){}", sample.as_ref().map(|s| format!(" for sample {s}")).unwrap_or_default())]
    ZeroPreNormVector { norm: f64, sample: Option<String> },
    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    // margins
    #[error("empty class: visual similarity needs at least one embedding per class")]
    EmptyClass,
    #[error("missing embeddings: epoch {epoch} margin table needs current embeddings{}", class.as_ref().map(|c| format!(" (class {c})")).unwrap_or_default())]
    MissingEmbeddings { epoch: usize, class: Option<String> },
    #[error("invalid margin config: {0}")]
    BadMarginConfig(String),

    // pairloss
    #[error("unknown class: leaf node {0} is not in the margin table")]
    UnknownClass(usize),
    #[error("batch too small: {0} samples, need at least 2")]
    BatchTooSmall(usize),

    // sampler
    #[error("too few classes: {available} leaf classes available, need {needed}")]
    TooFewClasses { available: usize, needed: usize },
    #[error("empty leaf: class {0} has no samples")]
    EmptyLeaf(String),
    #[error("invalid sampler config: {0}")]
    BadSamplerConfig(String),

    // trainer
    #[error("diverged: non-finite loss at epoch {epoch}, step {step}")]
    DivergedLoss { epoch: usize, step: usize },
    #[error("invalid train config: {0}")]
    BadTrainConfig(String),
    #[error("empty dataset")]
    EmptyDataset,

    // retrieval
    #[error("k too large: k = {k} but only {available} gallery items are usable")]
    KTooLarge { k: usize, available: usize },
    #[error("bad level: depth {depth} does not exist above leaf {leaf}")]
    BadLevel { depth: usize, leaf: String },
    #[error("empty gallery")]
    EmptyGallery,

    // toolkit
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("dimension mismatch at line {line} (record {id}): expected {expected} features, got {got}")]
    DimMismatch {
        line: usize,
        id: String,
        expected: usize,
        got: usize,
    },
    #[error("duplicate id {id} at line {line}")]
    DuplicateId { line: usize, id: String },
    #[error("unknown sample id {0}")]
    UnknownSample(String),
    #[error("invalid synthetic spec: {0}")]
    BadSyntheticSpec(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
