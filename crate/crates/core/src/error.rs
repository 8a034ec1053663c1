use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = NschError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum NschError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("grid mismatch: expected {expected}, found {found}")]
    GridMismatch { expected: String, found: String },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("potential evaluated outside (-1, 1): r = {0}")]
    PotentialDomain(f64),

    #[error("potential argument too close to the pure phase: |r| = {0} > 1 - 1e-14")]
    PotentialOverflow(f64),

    #[error("velocity is not discretely divergence-free: max |div v| = {norm:e} > {tol:e}")]
    NotDivergenceFree { norm: f64, tol: f64 },

    #[error("incompatible pure-Neumann right-hand side: mean = {mean:e}")]
    Incompatible { mean: f64 },

    #[error(
        "{solver} did not converge in {iterations} iterations (relative residual {residual:e})"
    )]
    NotConverged {
        solver: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error(
        "Newton iteration did not converge in {iterations} iterations (residual {residual:e})"
    )]
    NewtonNotConverged { iterations: usize, residual: f64 },

    #[error(
        "barrier failure: Newton iterate pinned to the clip bound for {consecutive} consecutive \
         iterations (residual {residual:e}); reduce the time step"
    )]
    BarrierFailure { consecutive: usize, residual: f64 },

    #[error("line search failed after {halvings} halvings (residual {residual:e})")]
    LineSearch { halvings: usize, residual: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{hypothesis}: {message}")]
    Hypothesis {
        hypothesis: &'static str,
        message: String,
    },

    #[error("degenerate pair: the two states coincide")]
    DegeneratePair,

    #[error("empty window: {0}")]
    EmptyWindow(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("config error in {path}: {message}")]
    Config { path: PathBuf, message: String },

    #[error("corrupt snapshot {path}: {message}")]
    Snapshot { path: PathBuf, message: String },

    #[error("ledger error: {0}")]
    Ledger(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
