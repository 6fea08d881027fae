use thiserror::Error;

/// Crate-level error type. Method deferrals (fall back from the iterative
/// path to a relaxation, rank failures of the nuclear relaxation, ...) are
/// not errors; they are ordinary enum returns on the respective operations.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("index ({i}, {j}, {k}) out of range for dims {dims:?}")]
    IndexOutOfRange {
        i: usize,
        j: usize,
        k: usize,
        dims: (usize, usize, usize),
    },

    #[error("duplicate index ({i}, {j}, {k}) with conflicting values {a} and {b}")]
    ConflictingEntry {
        i: usize,
        j: usize,
        k: usize,
        a: f64,
        b: f64,
    },

    #[error("symmetric tensor requires equal dimensions, got {dims:?}")]
    NotCubic { dims: (usize, usize, usize) },

    #[error("symmetry violation: entries at permutations of ({i}, {j}, {k}) differ ({a} vs {b})")]
    SymmetryViolation {
        i: usize,
        j: usize,
        k: usize,
        a: f64,
        b: f64,
    },

    #[error("operation requires a symmetric tensor")]
    NotSymmetric,

    #[error("no observed entries")]
    EmptyObservations,

    #[error("anchor override ({i}, {j}, {k}) must be an observed nonzero entry")]
    InvalidAnchor { i: usize, j: usize, k: usize },

    #[error("vector length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("semidefinite problem is malformed: {0}")]
    SdpShape(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
