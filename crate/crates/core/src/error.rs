use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix side {side} exceeds the dense-representation cap of {cap}")]
    DimensionCap { side: usize, cap: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid system shape: {0}")]
    InvalidShape(String),

    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("partial trace needs at least one kept subsystem; use the trace accessor for the scalar trace")]
    EmptyKeep,

    #[error("Hermitian invariant violated: max |m - m†| = {deviation:e} exceeds {tol:e}")]
    NotHermitian { deviation: f64, tol: f64 },

    #[error("positive-semidefinite invariant violated: smallest eigenvalue {min_eigenvalue:e} below -{tol:e}")]
    NotPositive { min_eigenvalue: f64, tol: f64 },

    #[error("unit-trace invariant violated: trace = {trace}")]
    TraceNotOne { trace: f64 },

    #[error("unit-norm invariant violated: norm = {norm}")]
    NotNormalized { norm: f64 },

    #[error("parameter `{name}` = {value} outside {range}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        range: &'static str,
    },

    #[error("invalid tolerance: {0}")]
    InvalidTolerance(String),

    #[error("outcome never occurs: trace of the conditioned state is {trace:e}")]
    OutcomeNeverOccurs { trace: f64 },

    #[error("operator is zero")]
    ZeroOperator,

    #[error("vectors are not orthonormal: {0}")]
    NotOrthonormal(String),

    #[error("local factor for party {party} has spectral norm {norm} > 1")]
    NotContraction { party: String, norm: f64 },

    #[error("matrix is not unitary: max |U†U - I| = {deviation:e}")]
    NotUnitary { deviation: f64 },

    #[error("{count} candidate subspaces exceed the cap of {cap}; restrict the per-party bases")]
    CandidateOverflow { count: u128, cap: u128 },

    #[error("unsupported shape: {0}")]
    UnsupportedShape(String),

    #[error("cannot access {path}: {message}")]
    Io { path: String, message: String },

    #[error("document schema violation: {0}")]
    Schema(String),

    #[error("protocol step {step}: {message}")]
    Protocol { step: usize, message: String },

    #[error("every protocol branch has zero probability")]
    AllBranchesZero,
}
