//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("{0}")]
    InvalidArgument(String),

    #[error("non-finite values in {0}")]
    NonFinite(&'static str),

    #[error("drift is not divergence-free: max |div v| = {residual:.3e}")]
    NotDivergenceFree { residual: f64 },

    #[error("CFL violation: dt = {dt:.3e} exceeds {dt_max:.3e} (max |u| = {umax:.3e})")]
    CflViolation { dt: f64, dt_max: f64, umax: f64 },

    #[error("solution blew up at t = {time:.6} (step {step})")]
    BlowUp { time: f64, step: usize },

    #[error("iterative solver did not converge: residual {residual:.3e} after {iterations} sweeps")]
    SolverDiverged { residual: f64, iterations: usize },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("bad file format: {0}")]
    Format(String),
}
