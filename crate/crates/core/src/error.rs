use thiserror::Error;

/// Errors raised by the solvers and grid utilities.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{solver} did not converge after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence {
        solver: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("target {target} is outside the range [{min}, {max}] of the profile")]
    NoCrossing { target: f64, min: f64, max: f64 },

    #[error("formula is singular at r = {0}")]
    Singularity(f64),

    #[error("could not bracket the constraint after {0} doublings")]
    BracketFailure(usize),

    #[error("time step {dt:.3e} exceeds the advective limit {limit:.3e}")]
    TimeStep { dt: f64, limit: f64 },

    #[error("cell density became non-positive at node {node} (t = {t})")]
    Positivity { node: usize, t: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
