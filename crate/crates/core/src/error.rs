use thiserror::Error;

/// Errors raised by model validation, assembly and the numerical kernels.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid basis: {0}")]
    InvalidBasis(String),

    #[error("invalid perturbation: {0}")]
    InvalidPerturbation(String),

    #[error("invalid quadrature: {0}")]
    InvalidQuadrature(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("numerical failure at lambda = {lambda}: {source}")]
    FailureAtLambda {
        lambda: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("no crossing found: {0}")]
    NoCrossing(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for errors that originate in the numerics rather than in the input.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::NumericalFailure(_) => true,
            Error::FailureAtLambda { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}
