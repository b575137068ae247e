use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("step-size underflow for point {index} at t={time:.6} (distance {distance:.3e})")]
    StepUnderflow { index: usize, time: f64, distance: f64 },

    #[error("singular vector field at z = u")]
    Singular,

    #[error("time {0} outside chain horizon")]
    OutsideHorizon(f64),

    #[error("point {0} lies in the hull at the requested time")]
    InHull(usize),

    #[error("inversion did not converge (best residual {residual:.3e})")]
    InversionFailed { residual: f64 },

    #[error("covariance factorization failed: {0}")]
    Factorization(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("Seiberg bound violated: alpha = {alpha} >= Q = {q}")]
    Seiberg { alpha: f64, q: f64 },

    #[error("eps = {0} is not representable on the grid")]
    UnrepresentableEps(f64),

    #[error("rejection budget of {0} proposals exhausted")]
    RejectionBudget(u64),

    #[error("horizon {0} exceeded before stopping")]
    HorizonExceeded(f64),

    #[error("diagnostic: {0}")]
    Diagnostic(String),

    #[error("point {0} outside the interpolable region")]
    OutsideGrid(String),

    #[error("decode error: {0}")]
    Decode(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidParameter(msg.into()))
}
