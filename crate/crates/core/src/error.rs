use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("point {x} lies within the exclusion radius of pole {pole}")]
    PoleProximity { x: f64, pole: f64 },
    #[error("point {x} is outside the domain of the {map} map")]
    Domain { map: &'static str, x: f64 },
    #[error("root solve failed near y = {y}: residual {residual:e}")]
    RootSolveFailure { y: f64, residual: f64 },
    #[error("fixed-point polynomial is identically zero")]
    DegenerateEquation,
    #[error("the {0} map has no implemented branch inverses")]
    UnsupportedMap(&'static str),
    #[error("preimage enumeration produced {count} intervals (limit {limit})")]
    BranchExplosion { count: usize, limit: usize },
    #[error("power iteration stalled after {iterations} iterations (increment {increment:e})")]
    NonConvergence { iterations: usize, increment: f64 },
    #[error("({u}, {v}) is outside the image of the map")]
    OutsideImage { u: f64, v: f64 },
    #[error("orbit hit a pole at step {step}")]
    PoleHit { step: u64 },
    #[error("orbit diverged at step {step}")]
    Divergence { step: u64 },
    #[error("{hits} of {samples} samples in cell {cell} hit a pole")]
    Sampling { cell: usize, hits: usize, samples: usize },
    #[error("eigenvalue iteration failed to converge")]
    EigenFailure,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
