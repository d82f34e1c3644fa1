use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("quadrature did not converge: estimated error {achieved:e} exceeds tolerance {requested:e}")]
    Quadrature { achieved: f64, requested: f64 },

    #[error("state space of {required} lattice points exceeds the cap of {cap}")]
    CapExceeded { required: u128, cap: u128 },

    #[error("Newton inversion diverged after {iterations} iterations (residual {residual:e})")]
    Divergence { iterations: usize, residual: f64 },

    #[error("Hessian is singular or not positive definite")]
    SingularHessian,

    #[error("matrix is not symmetric positive definite")]
    NotSpd,

    #[error("degenerate score histogram: every subject scored 0 or m")]
    Degenerate,

    #[error("budget exceeded: {0}")]
    Budget(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
