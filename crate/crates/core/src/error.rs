//! Crate-wide error type.

use thiserror::Error;

/// Failure modes across the model, spectral, variational, path-cost and
/// simulation layers. The CLI maps each group to a distinct exit code.
#[derive(Debug, Error)]
pub enum Error {
    #[error("negative coordinate {value} at position {index}")]
    NegativeCoordinate { index: usize, value: f64 },

    #[error("source and target states coincide")]
    SameState,

    #[error("jump {atom:?} exceeds the declared range {range}")]
    RangeViolation { atom: Vec<i64>, range: i64 },

    #[error(
        "jump {atom:?} of the measure on face {face} cannot be taken from any state of that face"
    )]
    InfeasibleAtom { face: String, atom: Vec<i64> },

    #[error("state-space size {size} exceeds the cap {cap}")]
    SizeOverflow { size: u128, cap: u128 },

    #[error("truncation is not irreducible: origin component has {component} of {total} states")]
    NotIrreducible { component: usize, total: usize },

    #[error(
        "eigenvalue iteration did not converge after {iters} iterations (residual {residual:e})"
    )]
    NoConvergence { iters: usize, residual: f64 },

    #[error("rate evaluator failed")]
    OracleFailure(#[source] Box<Error>),

    #[error("path sampler failed at t = {t}: {message}")]
    SamplerFailure { t: f64, message: String },

    #[error("event count exceeded the cap {cap}; rates may be too large for the horizon")]
    RateExplosion { cap: u64 },

    #[error("tube needs {needed} lattice units of Markovian headroom but the truncation radius is {radius}")]
    TubeExceedsTruncation { needed: i64, radius: i64 },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("{0}")]
    Invalid(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
