use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("circular driving with n = {0} is resonant (need n >= 2)")]
    ResonantDriving(i64),

    #[error("driving Fourier mode k = {k} is resonant with the trap frequency (coefficient {coefficient:e})")]
    ResonantMode { k: u64, coefficient: f64 },

    #[error("no closed-form response for {0} drivings")]
    UnsupportedProfile(&'static str),

    #[error("ODE residual {residual:e} exceeds tolerance {tol:e} at dt = {dt}")]
    StepTooLarge { dt: f64, residual: f64, tol: f64 },

    #[error("trajectory is not cyclic (scaled endpoint mismatch {mismatch:e})")]
    NonCyclicTrajectory { mismatch: f64 },

    #[error("vector is not normalised (norm {0})")]
    NonUnitVector(f64),

    #[error("grid too small: boundary amplitude ratio {ratio:e}")]
    GridTooSmall { ratio: f64 },

    #[error("norm drifted by {drift:e}")]
    NormDrift { drift: f64 },

    #[error("grids differ")]
    GridMismatch,

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
