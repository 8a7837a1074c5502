//! Factored MDPs and the exact probabilistic machinery over them.

pub mod dp;
pub mod latent;
pub mod level;
pub mod model;
pub mod policy;
pub mod rollout;

pub use dp::{
    bellman_backup_theta, best_policy_for_reward, max_level_expectation, occupancies, occupancy, optimize_reward,
    policy_value, state_distribution, tv_distance, Reward,
};
pub use latent::LatentRepresentation;
pub use level::{clip_renormalize, FactoredLevel, FeatureTable, LevelReport};
pub use model::LowRankMDP;
pub use policy::{MarkovView, Policy, TabularPolicy};
pub use rollout::{rollout, rollout_with_latents, Trajectory};
