//! Local large-deviation rate functions, path-cost functionals, and
//! rare-event Monte Carlo for lattice Markov jump processes on the
//! nonnegative orthant whose transition law is constant on each face —
//! the class of models that describes open queueing networks.
//!
//! The pieces fit together like this:
//!
//! - [`model`] ingests and validates a network model (dimension, one jump
//!   measure per face) and answers transition-intensity queries.
//! - [`localproc`] splits jumps into additive and Markovian parts for a face
//!   and enumerates finite truncations of the Markovian state space.
//! - [`spectral`] assembles the tilted killed generator on a truncation,
//!   solves its Perron–Frobenius eigenpair, and estimates the face exponent
//!   `λ_Λ(α)` along growing truncations.
//! - [`variational`] computes the convex conjugate `λ*_Λ(v)` and the local
//!   rate functions `L_Λ(v)` and `L(x, v)`.
//! - [`pathcost`] integrates rates along piecewise-linear paths and solves
//!   the time-dilated variant within a budget.
//! - [`simulate`] runs exact event simulations and estimates tube and
//!   endpoint probabilities, directly or under the exponentially twisted
//!   kernel, with reproducible per-replication RNG streams.
//! - [`uniformization`] provides independent transient-probability and
//!   tilted-semigroup reference values for cross-checking.
//!
//! All numerics are generic over the [`Scalar`] floating-point type; the
//! aliases below pin the common `f64` and `f32` instantiations.

pub mod error;
mod linalg;
pub mod localproc;
pub mod model;
pub mod pathcost;
pub mod report;
mod scalar;
pub mod simulate;
pub mod spectral;
pub mod uniformization;
pub mod variational;

pub use error::{Error, Result};
pub use linalg::DMat;
pub use scalar::Scalar;

pub type Model64 = model::NetworkModel<f64>;
pub type Model32 = model::NetworkModel<f32>;
pub type Measure64 = model::JumpMeasure<f64>;
pub type Path64 = pathcost::PiecewisePath<f64>;
pub type Path32 = pathcost::PiecewisePath<f32>;
pub type LambdaEstimate64 = spectral::LambdaEstimate<f64>;
pub type RateResult64 = variational::RateResult<f64>;
pub type TubeEstimate64 = simulate::TubeEstimate<f64>;

/// Sizes the global worker pool used for Monte Carlo replications. May be
/// called once, before any parallel work; later calls fail.
pub fn configure_threads(threads: usize) -> Result<()> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Error::Invalid(format!("thread pool already configured: {e}")))
}
