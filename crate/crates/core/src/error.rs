use crate::solvers::SolveResult;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors across model construction, dictionary assembly, solving and I/O.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("pole {re}{im:+}i has modulus {modulus} outside the open annulus (0, 1)")]
    InvalidPole { re: f64, im: f64, modulus: f64 },

    #[error("atom scale must be finite and nonzero, got {0}")]
    InvalidScale(f64),

    #[error("memory length must be at least 1")]
    ZeroMemory,

    #[error("input sequence must contain at least one sample")]
    EmptyInput,

    #[error("invalid grid configuration: {0}")]
    GridConfig(String),

    #[error("invalid solver configuration: {0}")]
    SolverConfig(String),

    #[error("requested {requested} sampled pole pairs but only {available} exist")]
    TooManyPairs { requested: usize, available: usize },

    #[error("coefficient vector length {got} does not match dictionary ({expected})")]
    CoeffLength { expected: usize, got: usize },

    #[error("model uses an atom whose pole tuple is not in the catalog")]
    AtomNotInCatalog,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("noise level is undefined for an all-zero clean sequence")]
    ZeroSignalNoise,

    #[error("observation mask leaves no observed samples")]
    EmptyObservationSet,

    #[error(
        "problem is infeasible: minimum achievable residual {min_residual_sq:.6e} exceeds epsilon {epsilon:.6e}"
    )]
    Infeasible { min_residual_sq: f64, epsilon: f64 },

    #[error("branch-and-bound node budget exhausted before proving optimality")]
    NodeBudgetExceeded { best: Box<SolveResult> },

    #[error("line {line}: {message}")]
    Csv { line: usize, message: String },

    #[error("invalid report: {0}")]
    Report(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
