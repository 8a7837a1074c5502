//! Maximum likelihood and sampling oracles over finite families.

mod dataset;
mod mle;
mod rate;

pub use dataset::{collect_level, Transition, TransitionDataset};
pub use mle::{log_likelihood, mle, samp, MleResult};
pub use rate::{mle_rate_experiment, rate_bound, RateReport, RateRow};
