use thiserror::Error;

/// Errors produced by grid construction, body validation, the PDE solvers and
/// the flow engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("solver error: {0} (last residual {1:.3e})")]
    Solver(String, f64),

    #[error("family parameter out of range: {0}")]
    Range(String),

    #[error("flow stiffness: dt underflow at t = {t:.6e} (dt = {dt:.3e})")]
    Stiffness { t: f64, dt: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
