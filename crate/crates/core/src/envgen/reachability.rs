//! Latent reachability and the latent-dimension audit.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{max_level_expectation, LatentRepresentation, LowRankMDP};

/// `table[h][z] = max_pi P[z_{h+1} = z]` and its minimum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Reachability {
    pub eta_min: f64,
    pub table: Vec<Vec<f64>>,
}

fn check_reps(model: &LowRankMDP, reps: &[LatentRepresentation]) -> Result<()> {
    if reps.len() < model.horizon() {
        return Err(Error::MissingLatentRep { level: reps.len() });
    }
    Ok(())
}

/// Exact `max_pi P[z_{h+1} = z]` for every level and latent, by dynamic
/// programming on the reward `psi_h(x_h, a_h)[z]`.
pub fn compute_reachability(model: &LowRankMDP, reps: &[LatentRepresentation]) -> Result<Reachability> {
    check_reps(model, reps)?;
    let nk = model.n_states() * model.n_actions();
    let mut table = Vec::with_capacity(model.horizon());
    for (h, rep) in reps.iter().take(model.horizon()).enumerate() {
        if rep.n_states() != model.n_states() || rep.n_actions() != model.n_actions() {
            return Err(Error::DimensionMismatch(format!("latent representation of level {h} has the wrong shape")));
        }
        let row = (0..rep.n_latent())
            .map(|z| {
                let reward: Vec<f64> = (0..nk).map(|i| rep.psi_table().row(i)[z]).collect();
                max_level_expectation(model, h, reward).map(|(v, _)| v)
            })
            .collect::<Result<Vec<_>>>()?;
        table.push(row);
    }
    let eta_min = table.iter().flatten().copied().fold(f64::INFINITY, f64::min);
    Ok(Reachability { eta_min, table })
}

/// `Z <= d K^2 / eta^2`.
pub fn dlv_bound_holds(z: usize, d: usize, k: usize, eta_min: f64) -> bool {
    z as f64 <= d as f64 * (k * k) as f64 / (eta_min * eta_min)
}

/// Whether every level's latent alphabet respects the reachability bound on
/// the latent-variable dimension, using the model's global `eta_min`.
pub fn check_dlv_bound(model: &LowRankMDP, reps: &[LatentRepresentation]) -> Result<bool> {
    let reach = compute_reachability(model, reps)?;
    if !(reach.eta_min > 0.0) {
        return Err(Error::InvalidArgument("eta_min must be positive".into()));
    }
    Ok(reps
        .iter()
        .take(model.horizon())
        .all(|r| dlv_bound_holds(r.n_latent(), model.dim(), model.n_actions(), reach.eta_min)))
}
