use thiserror::Error;

use crate::dynamics::Trajectory;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter {name} = {value}: {reason}")]
    Domain {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("singular configuration: {0}")]
    Singular(String),

    #[error("no convergence after {iterations} iterations (last residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("unstable configuration: lambda^2 roots {roots:?}")]
    Unstable { roots: [(f64, f64); 2] },

    #[error("resonance: {0}")]
    Resonance(String),

    #[error("invalid series term: {0}")]
    InvalidTerm(String),

    #[error("critical terms present: {keys:?}")]
    CriticalTerms { keys: Vec<String> },

    #[error("small divisor {value:e} for {what}")]
    SmallDivisor { what: String, value: f64 },

    #[error("integration failed at t = {t}: {reason}")]
    Integration {
        t: f64,
        reason: String,
        partial: Box<Trajectory>,
    },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("parse error on line {line}: {reason}")]
    Parse { line: usize, reason: String },
}
