use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("arc length {x} m lies outside the rod [0, {length}] m")]
    OutOfRange { x: f64, length: f64 },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    Dimension { what: &'static str, expected: usize, found: usize },

    #[error("cable {cable} tangent is undefined at X = {x} m (strain collapses the cable path)")]
    SingularTangent { cable: usize, x: f64 },

    #[error("{what} is singular (condition estimate {condition:e})")]
    Singular { what: &'static str, condition: f64 },

    #[error("zero viscosity makes the tip condition algebraic; the stacked dynamic form needs a positive viscosity")]
    DifferentialAlgebraic,

    #[error("no convergence after {iterations} iterations (scaled residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64, history: Vec<f64> },

    #[error("acceleration norm {norm:e} exceeded the blow-up bound at t = {t} s")]
    BlowUp { t: f64, norm: f64 },

    #[error("identification failed: {0}")]
    Identification(String),
}

pub type Result<T> = std::result::Result<T, Error>;
