//! Episode sampling.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::latent::LatentRepresentation;
use super::level::sample_index;
use super::model::LowRankMDP;
use super::policy::Policy;
use crate::error::{Error, Result};

/// States `x_0..x_H`, actions `a_0..a_{H-1}`, and optionally the latents
/// `z_1..z_H` that generated each next state.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trajectory {
    pub states: Vec<usize>,
    pub actions: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latents: Option<Vec<usize>>,
}

impl Trajectory {
    pub fn horizon(&self) -> usize {
        self.actions.len()
    }
}

/// Samples one episode from the Markov law of `model` under `policy`.
pub fn rollout<R: Rng + ?Sized>(model: &LowRankMDP, policy: &Policy, rng: &mut R) -> Result<Trajectory> {
    sample_episode(model, policy, None, rng)
}

/// Samples one episode, generating each next state through a latent draw
/// `z ~ psi(x, a)`, `x' ~ nu(z)`.
pub fn rollout_with_latents<R: Rng + ?Sized>(
    model: &LowRankMDP,
    policy: &Policy,
    reps: &[LatentRepresentation],
    rng: &mut R,
) -> Result<Trajectory> {
    if reps.len() < model.horizon() {
        return Err(Error::MissingLatentRep { level: reps.len() });
    }
    for rep in &reps[..model.horizon()] {
        if rep.n_states() != model.n_states() || rep.n_actions() != model.n_actions() {
            return Err(Error::DimensionMismatch("latent representation shape differs from model".into()));
        }
    }
    sample_episode(model, policy, Some(reps), rng)
}

fn sample_episode<R: Rng + ?Sized>(
    model: &LowRankMDP,
    policy: &Policy,
    reps: Option<&[LatentRepresentation]>,
    rng: &mut R,
) -> Result<Trajectory> {
    let horizon = model.horizon();
    let k = model.n_actions();
    policy.validate(model.n_states(), k, horizon)?;
    let markov = policy.sample_markov(rng);
    let mut states = Vec::with_capacity(horizon + 1);
    let mut actions = Vec::with_capacity(horizon);
    let mut latents = reps.map(|_| Vec::with_capacity(horizon));
    let mut s = model.start_state();
    states.push(s);
    for h in 0..horizon {
        let a = markov.sample(h, s, k, rng);
        s = match (reps, latents.as_mut()) {
            (Some(reps), Some(zs)) => {
                let z = sample_index(reps[h].psi(s, a), rng);
                zs.push(z);
                sample_index(reps[h].nu(z), rng)
            }
            _ => sample_index(model.row(h, s, a), rng),
        };
        actions.push(a);
        states.push(s);
    }
    Ok(Trajectory { states, actions, latents })
}
