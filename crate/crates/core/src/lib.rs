//! Hybrid local/global numerical optimization.
//!
//! The crate pairs a gradient-based local optimizer (Adam) with a global
//! step, doubly stochastic coordinate descent (DSCD), which resamples one
//! random coordinate from a Beta-annealed proposal and accepts the move only
//! when it beats the best loss seen within a sliding window. An alternation
//! scheduler switches between the two step types.
//!
//! Modules:
//!
//! - [`objective`]: objective abstraction and the Styblinski-Tang / Schwefel
//!   benchmark functions.
//! - [`proposal`]: Beta-annealing proposal distribution.
//! - [`global`]: loss window and the DSCD step.
//! - [`local`]: Adam and learning-rate schedules.
//! - [`hybrid`]: alternation state machine, hybrid runs and baselines.
//! - [`bilevel`]: toy differentiable architecture search problem.
//! - [`harness`]: replicated benchmark runner, bootstrap aggregation and
//!   CSV/JSON output.
//!
//! All numerical code is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix the common `f64` instantiations.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bilevel;
pub mod error;
pub mod global;
pub mod harness;
pub mod hybrid;
pub mod local;
pub mod objective;
pub mod proposal;
pub mod scalar;
pub mod stats;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Seeded random source used by every run.
pub type Rng = rand_chacha::ChaCha8Rng;

/// Builds the run rng for a seed.
pub fn rng_from_seed(seed: u64) -> Rng {
    use rand::SeedableRng;
    Rng::seed_from_u64(seed)
}

pub type Position64 = objective::Position<f64>;
pub type Position32 = objective::Position<f32>;
pub type ObjectiveSpec64 = objective::ObjectiveSpec<f64>;
pub type Benchmark64 = objective::Benchmark<f64>;
pub type Benchmark32 = objective::Benchmark<f32>;
pub type ProposalDomain64 = proposal::ProposalDomain<f64>;
pub type LossWindow64 = global::LossWindow<f64>;
pub type Dscd64 = global::Dscd<f64>;
pub type AdamState64 = local::AdamState<f64>;
pub type LrSchedule64 = local::LrSchedule<f64>;
pub type HybridConfig64 = hybrid::HybridConfig<f64>;
pub type RunTrace64 = hybrid::RunTrace<f64>;
pub type RunTrace32 = hybrid::RunTrace<f32>;
pub type ToyCell64 = bilevel::ToyCell<f64>;
