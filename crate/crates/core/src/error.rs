use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("unsupported dimension {0} (supported: 1, 2, 3)")]
    UnsupportedDimension(usize),

    #[error("matrix is singular")]
    SingularMatrix,

    #[error("invalid number literal `{0}`")]
    ParseNumber(String),

    #[error("unknown builtin map `{0}`")]
    UnknownBuiltin(String),

    #[error("unknown preset `{0}`")]
    UnknownPreset(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid map: {0}")]
    InvalidMap(String),

    #[error("code {0:?} has an empty cell")]
    EmptyCell(Vec<usize>),

    #[error("refinement produced no cells")]
    EmptyRefinement,

    #[error("no admissible parameter point: {0}")]
    NoAdmissiblePoint(String),

    #[error("orbit left the fundamental box at step {step}")]
    EscapedBox { step: usize },

    #[error("point lies in no branch domain at step {step}")]
    NoBranch { step: usize },

    #[error("matrix is not unimodular (det = {0})")]
    NotUnimodular(i64),

    #[error("budget exceeded: {0}")]
    Budget(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
