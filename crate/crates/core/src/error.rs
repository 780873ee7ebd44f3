use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("grid too coarse: J = {0}, need at least 8 subintervals for fourth-order stencils")]
    GridTooCoarse(usize),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("grid mismatch between {0}")]
    GridMismatch(&'static str),

    #[error("unsupported derivative order {0}; only 1 and 2 are available")]
    UnsupportedOrder(usize),

    #[error("non-finite force field evaluation at node {node}")]
    NonFiniteField { node: usize },

    #[error("non-finite value in {context}")]
    NonFinite { context: String },

    #[error("chain diverged at tau = {tau}, mode {mode}")]
    ChainDiverged { tau: f64, mode: usize },

    #[error("eigenvalue {index} = {value} is not positive; operator assembly is broken")]
    NonPositiveEigenvalue { index: usize, value: f64 },

    #[error("no sign change of the boundary determinant around k = {k}")]
    NoBracket { k: usize },

    #[error("singular linear system: {0}")]
    Singular(&'static str),

    #[error("covariance factorization failed: {0}")]
    Factorization(&'static str),

    #[error("rejection oracle accepted no paths out of {attempts}; increase epsilon")]
    NoAcceptance { attempts: usize },

    #[error("functional sets do not match: {0}")]
    MismatchedFunctionals(String),

    #[error("{0}")]
    Diagnostics(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
