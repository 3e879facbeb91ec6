use thiserror::Error;

/// Everything that can go wrong while evaluating a kernel, a density or a
/// simulation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("argument outside the domain: {0}")]
    Domain(String),

    #[error("quadrature did not converge: best value {value:e}, error estimate {abs_error:e}")]
    NonConvergence { value: f64, abs_error: f64 },

    #[error("t = {t} is below the smallest admissible time {t_min} for the oscillatory integral")]
    RangeTooOscillatory { t: f64, t_min: f64 },

    #[error("oscillation period {spacing:e} is too fine to resolve near {at:e}")]
    OscillationTooFine { spacing: f64, at: f64 },

    #[error("kernel evaluated on the diagonal (cosh(rho) - 1 = {cosh_minus_one:e})")]
    DiagonalSingularity { cosh_minus_one: f64 },

    #[error("point does not lie on the requested wall: {0}")]
    WallMismatch(String),

    #[error("finite-difference stencil leaves the domain: {0}")]
    StencilOutsideDomain(String),

    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),

    #[error("overflow while evaluating {0}")]
    Overflow(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
