use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("prediction target is degenerate at t = {t}: |φσ - ψα| = {denominator:e}")]
    DegenerateTarget { t: f64, denominator: f64 },

    #[error("integrand is not finite at quadrature node t = {t}")]
    QuadratureDivergence { t: f64 },

    #[error("equilibrium is singular: {0}")]
    SingularEquilibrium(&'static str),

    #[error("dimension mismatch: {0}")]
    Dim(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("gradient flow diverged at step {step}")]
    Divergence { step: usize },

    #[error("loss is not finite at step {step}")]
    NonFiniteLoss { step: usize },

    #[error("sampler state is not finite at t = {t}")]
    NonFiniteState { t: f64 },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dim(msg.into())
    }
}
