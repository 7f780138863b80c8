use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("index {index} out of range for {what} (len {len})")]
    OutOfRange {
        what: &'static str,
        index: usize,
        len: usize,
    },

    #[error("level set is not finite at vertex {vertex} ({value})")]
    NonFiniteLevelSet { vertex: usize, value: f64 },

    #[error("edge {edge} of cell {cell} is crossed twice by the interface; refine the mesh")]
    DoubleCut { cell: usize, edge: usize },

    #[error("unknown geometry '{name}', expected one of: {valid}")]
    UnknownGeometry { name: String, valid: String },

    #[error("degenerate cut configuration in cell {cell}: {reason}")]
    DegenerateCut { cell: usize, reason: String },

    #[error("quadrature degree {degree} unsupported (max {max})")]
    UnsupportedDegree { degree: usize, max: usize },

    #[error("cut cell {cell} cannot reach any internal cell through wetted facets")]
    UnreachableCutCell { cell: usize },

    #[error("internal invariant violated: {0}")]
    Internal(String),

    #[error("size mismatch for {what}: expected {expected}, got {got}")]
    SizeMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("matrix is singular to working precision (pivot {pivot})")]
    Singular { pivot: usize },

    #[error("linear solver failure: {0}")]
    Solver(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
