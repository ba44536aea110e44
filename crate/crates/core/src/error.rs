use thiserror::Error;

/// Errors raised by the optimization library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("non-finite entry in input {0}")]
    NonFinite(&'static str),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid spectral bounds: gamma = {gamma}, rho = {rho} (need 0 < gamma <= rho)")]
    InvalidBounds { gamma: f64, rho: f64 },
    #[error("invalid constants: {0}")]
    InvalidConstants(String),
    #[error("invalid index set size: k = {k}, n = {n}")]
    InvalidSize { k: usize, n: usize },
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("dimension {d} exceeds the dense eigendecomposition limit {limit}")]
    TooLarge { d: usize, limit: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("spectral bounds are not set on this inverse Hessian")]
    BoundsUnset,
    #[error("step-size precondition violated: eta = {eta} must satisfy 0 < eta < mu'/(2 L'^2) = {limit}")]
    StepPrecondition { eta: f64, limit: f64 },
    #[error("infeasible contraction target {target}: the m-independent term is already {floor}")]
    Infeasible { target: f64, floor: f64 },
    #[error("enumeration refused: n = {n} exceeds {limit}")]
    EnumerationTooLarge { n: usize, limit: usize },
    #[error("certificate refused: {0}")]
    CertificateRefused(String),
}

pub type Result<T> = std::result::Result<T, Error>;
