use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("unknown catalog kind `{0}`")]
    UnknownCatalogKind(String),
    #[error("Q is not symmetric (max asymmetry {0:e})")]
    AsymmetricQ(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("spectral decomposition failed")]
    SpectralDecompositionFailure,
    #[error("point is outside dom g (violation {0:e})")]
    DomainViolation(f64),
    #[error("multiplier is not a subgradient of g at the given point")]
    NotASubgradient,
    #[error("singular values have l1 norm {0} <= 1")]
    NotCaseThree(f64),
    #[error("(x, u) is not a KKT pair: residual {0:e}")]
    NotKKT(f64),
    #[error("semismooth Newton hit the iteration limit (residual {residual:e})")]
    MaxIterExceeded { residual: f64 },
    #[error("Newton system could not be solved after regularization")]
    LinearSolveFailure,
    #[error("no multiplier found (residual {0:e})")]
    NoMultiplierFound(f64),
    #[error("{failed} of {total} perturbed systems could not be solved")]
    SolveFailuresExceeded { failed: usize, total: usize },
}
