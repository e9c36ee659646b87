//! The ball-recycling game and the tools around it.
//!
//! `m` balls sit in `n` bins. Every round a strategy picks a non-empty bin,
//! empties it, and rethrows its balls i.i.d. according to a fixed bin-weight
//! distribution. The number of balls rethrown is the round's reward, and the
//! long-run average reward is the strategy's *recycling rate*. The game models
//! the batch size achieved by a database insertion or update buffer.
//!
//! Modules:
//!
//! * [`game`] and [`rng`]: game state, multinomial throws, one recycling step.
//! * [`distribution`]: bin-weight distributions (uniform, skyscraper,
//!   power law, weights files) and the half quasi-norm.
//! * [`strategy`]: Fullest Bin, Golden Gate, Random Ball, Least-Full and
//!   Aggressive-Empty.
//! * [`montecarlo`]: long-run simulation with batch-means confidence intervals.
//! * [`exact`]: full state-space enumeration, exact stationary distributions
//!   and the optimal policy by average-reward policy iteration.
//! * [`bounds`]: closed-form rate bounds and identities.
//! * [`btree`]: a splitting B-tree leaf set behind a bounded insertion buffer.
//! * [`par`]: data-parallel helpers (rayon when the `parallel` feature is on).

pub mod bounds;
pub mod btree;
pub mod distribution;
mod error;
pub mod exact;
pub mod game;
pub mod montecarlo;
pub mod par;
pub mod rng;
pub mod strategy;

pub use distribution::{half_quasi_norm, NamedDistribution, ProbabilityDistribution};
pub use error::{Error, Result};
pub use game::{BinConfiguration, RecycleOutcome};
pub use rng::Rng;
pub use strategy::{BaseStrategy, LRule, Strategy, StrategyKind};

/// Upper limit on the number of balls. Keeps `Z` and `R^2` sums exact in `f64`.
pub const MAX_BALLS: u64 = 1 << 48;
