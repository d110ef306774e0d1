use std::path::PathBuf;

/// Errors produced anywhere in the adaptation pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("schema error: {0}")]
    Schema(String),

    #[error("parse error at row {row}: {msg}")]
    Parse { row: usize, msg: String },

    #[error("ordering error at row {row}: frame {frame} does not increase past {prev}")]
    Ordering { row: usize, frame: i64, prev: i64 },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("empty dataset: {0}")]
    Empty(String),

    #[error("labels required: {0}")]
    LabelsRequired(String),

    #[error("degenerate scale on channel {channel}: percentiles coincide at {value}")]
    DegenerateScale { channel: usize, value: f64 },

    #[error("bvh parse error at line {line}, column {col}: {msg}")]
    BvhSyntax { line: usize, col: usize, msg: String },

    #[error("bvh structure error: {0}")]
    BvhStructure(String),

    #[error("index {index} out of range (len {len})")]
    Index { index: usize, len: usize },

    #[error("degenerate segment: {0}")]
    DegenerateSegment(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("degenerate support: total length {0:e}")]
    DegenerateSupport(f64),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("shape error: expected {expected}, got {got}")]
    Shape { expected: String, got: String },

    #[error("non-finite input: {0}")]
    NonFiniteInput(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("coverage error: {0}")]
    Coverage(String),

    #[error("model format error: {0}")]
    Format(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Stable short identifier, used for machine-readable CLI error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Schema(_) => "schema",
            Error::Parse { .. } => "parse",
            Error::Ordering { .. } => "ordering",
            Error::Argument(_) => "argument",
            Error::Empty(_) => "empty",
            Error::LabelsRequired(_) => "labels-required",
            Error::DegenerateScale { .. } => "degenerate-scale",
            Error::BvhSyntax { .. } => "bvh-syntax",
            Error::BvhStructure(_) => "bvh-structure",
            Error::Index { .. } => "index",
            Error::DegenerateSegment(_) => "degenerate-segment",
            Error::Config(_) => "config",
            Error::DegenerateSupport(_) => "degenerate-support",
            Error::InsufficientData(_) => "insufficient-data",
            Error::Shape { .. } => "shape",
            Error::NonFiniteInput(_) => "non-finite-input",
            Error::Numerical(_) => "numerical",
            Error::Coverage(_) => "coverage",
            Error::Format(_) => "format",
            Error::Io { .. } => "io",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
