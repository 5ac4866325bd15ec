//! Large-deviation rate predictions and simulators for infinite swapping (INS)
//! and parallel tempering (PT) on one-dimensional periodic multi-well
//! potentials.
//!
//! The analytic side ([`potential`], [`ensemble`], [`graphcalc`], [`rates`]) is
//! generic over the scalar type, so the graph calculus can run in exact
//! rational arithmetic as well as `f32`/`f64`. The stochastic side
//! ([`sampler`], [`harness`]) works in `f64`.

pub mod ensemble;
pub mod error;
pub mod graphcalc;
pub mod harness;
pub mod potential;
pub mod rates;
pub mod sampler;
pub mod scalar;

pub use error::{ConditionBullet, Error, Result};
pub use scalar::{Real, Scalar};

/// Exact rational scalar used for graph-calculus checks.
pub type Exact = num_rational::Ratio<i64>;

pub type Landscape = potential::LandscapeGraph<f64>;
pub type ExactLandscape = potential::LandscapeGraph<Exact>;
pub type Ladder = ensemble::TemperatureLadder<f64>;
pub type ExactLadder = ensemble::TemperatureLadder<Exact>;
pub type Target = rates::TargetSet<f64>;
pub type ExactTarget = rates::TargetSet<Exact>;
pub type Report = rates::RateReport<f64>;
pub type Franz = potential::FranzPotential<f64>;
