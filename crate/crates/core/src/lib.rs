//! Sample design for audit populations.
//!
//! Given the known claim amounts of an audit population, this crate estimates
//! the variance of the unknown disallowed amounts, turns it into sample sizes,
//! quantifies whether ratio estimation beats simple expansion, finds exact
//! optimal two-strata designs, and provides the simulation and enumeration
//! machinery that checks all of it.
//!
//! Formulas are generic over [`Real`]; the aliases below fix the scalar to
//! `f64`, which is what the CLI and the simulation lab use.

// `!(x > 0)` is used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::too_many_arguments)]

pub mod error;
pub mod planner;
pub mod population;
pub mod scalar;
pub mod selector;
pub mod sim;
pub mod stratify;
pub mod variance;

pub use error::{Error, Result};
pub use planner::{EstimatorKind, PlanRequest, SamplePlan, VarianceSource};
pub use population::{Cents, ClaimPopulation, InputFormat, PopulationMoments, Run};
pub use scalar::Real;
pub use variance::{ErrorRate, PartialErrorSpec, VarianceEstimate, VarianceMethod};

pub type Moments = PopulationMoments<f64>;
pub type Rate = ErrorRate<f64>;
pub type PartialSpec = PartialErrorSpec<f64>;
pub type Variance = VarianceEstimate<f64>;
pub type Plan = SamplePlan<f64>;
