use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// No saddle point exists for `r >= 2`: the free energy surface is flat.
    #[error("free energy surface becomes flat at r = {r} (r >= 2 has no order-parameter solution)")]
    FlatLandscape { r: f64 },

    #[error("saddle-point solver did not converge: {message} (last residuals {residuals:?})")]
    NonConvergence { message: String, residuals: Vec<f64> },

    /// The riskless-asset analysis is restricted to the region below the zero modes.
    #[error("zero-mode region: riskless-asset analysis requires r < 1, got r = {r}")]
    ZeroModeRegion { r: f64 },

    #[error("quadratic program failed: {0}")]
    Qp(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
