//! Exploration planners: elliptical (exact and sampled covariances), simplex,
//! and the environment-facing fitted-Q planner.

mod elliptical;
mod fqi;
mod simplex;

pub use elliptical::{
    elliptical_cap, elliptical_planner, feature_covariance, max_quadratic_objective, post_condition,
    sampled_elliptical_planner, EllipticalOutput, EllipticalState, TraceRow, SAMPLED_CAP_FACTOR,
};
pub use fqi::{linear_fqi, real_world_planner, FqiConfig, FqiOutput, FQI_RIDGE};
pub use simplex::{simplex_planner, SimplexOutput};
