//! Exact finite-state laboratory for low-rank MDPs: simulation, maximum
//! likelihood feature learning, exploration planners and guarantee checkers.

pub mod error;
pub mod io;
pub mod linalg;
pub mod analysis;
pub mod envgen;
pub mod flambe;
pub mod mdp;
pub mod oracles;
pub mod planners;
pub mod rng;

pub use error::{Error, Result};
pub use mdp::{FactoredLevel, FeatureTable, LatentRepresentation, LowRankMDP, Policy, Reward, TabularPolicy};
