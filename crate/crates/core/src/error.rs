use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Invalid arguments: violated preconditions, mixed groups, bad parameters.
    #[error("usage error: {0}")]
    Usage(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    /// A finite resource (a Følner index list, a search budget) ran out.
    #[error("resource exhausted: {0}")]
    Resource(String),

    /// `M - E*I` hit a (near) zero pivot; retry with a shifted energy.
    #[error(
        "inertia breakdown at E = {energy}: pivot {pivot:e} below guard; \
         retry with E shifted by {suggested_shift:e}"
    )]
    InertiaBreakdown {
        energy: f64,
        pivot: f64,
        suggested_shift: f64,
    },

    /// A greedy quasi-tiling could not reach the coverage target of a shape.
    #[error("partial tiling: shape {shape} reached {achieved:.6} of target {target:.6}")]
    PartialTiling {
        shape: usize,
        target: f64,
        achieved: f64,
        densities: Vec<f64>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn usage<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Usage(msg.into()))
}
