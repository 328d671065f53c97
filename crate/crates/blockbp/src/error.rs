use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// Model or experiment parameters violate a precondition.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A cavity message normalizer collapsed to zero on the given directed edge.
    #[error("degenerate message on edge {src} -> {dst}: normalizer is zero")]
    DegenerateMessage { src: usize, dst: usize },

    /// A node marginal normalizer collapsed to zero.
    #[error("degenerate marginal at node {node}: normalizer is zero")]
    DegenerateMarginal { node: usize },

    /// The exact oracle was asked for an instance beyond the enumeration cap.
    #[error("instance too large for exact enumeration: q^n = {states:e} exceeds {cap:e}")]
    InstanceTooLarge { states: f64, cap: f64 },

    /// Every assignment has zero weight (e.g. an uncolorable graph under a
    /// zero-diagonal affinity).
    #[error("zero total evidence: no assignment has positive weight")]
    ZeroEvidence,

    /// A network or records file could not be parsed.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// Diagnosis was requested on records missing a required initialization mode.
    #[error("missing records for init mode {0}")]
    MissingInit(&'static str),

    /// Grid too sparse for the requested scan.
    #[error("insufficient grid density: {0}")]
    InsufficientGrid(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
