use serde::{Deserialize, Serialize};

use crate::envgen::compute_reachability;
use crate::error::{Error, Result};
use crate::linalg::dot;
use crate::mdp::{occupancy, LatentRepresentation, LowRankMDP, Policy};

/// Per latent `z`: `max_pi P[z_h = z]`, `P[z_h = z | rho]` and their ratio.
/// Latents with zero numerator are skipped; an infinite ratio sets `infinite`
/// and `kappa = f64::INFINITY`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub kappa: f64,
    pub infinite: bool,
    pub numerators: Vec<f64>,
    pub denominators: Vec<f64>,
}

/// Realized coverage of `rho` for the latents `z_h`, which are emitted by the
/// level-`h-1` latent channel.
pub fn coverage_ratio(env: &LowRankMDP, reps: &[LatentRepresentation], rho: &Policy, h: usize) -> Result<CoverageReport> {
    if h == 0 || h > env.horizon() {
        return Err(Error::InvalidArgument(format!("coverage level {h} outside 1..={}", env.horizon())));
    }
    let reach = compute_reachability(env, reps)?;
    let numerators = reach.table[h - 1].clone();
    let occ = occupancy(env, rho, h - 1)?;
    let rep = &reps[h - 1];
    let nk = env.n_states() * env.n_actions();
    let denominators: Vec<f64> = (0..rep.n_latent())
        .map(|z| {
            let col: Vec<f64> = (0..nk).map(|i| rep.psi_table().row(i)[z]).collect();
            dot(&occ, &col)
        })
        .collect();
    let mut kappa = 0.0_f64;
    let mut infinite = false;
    for (&num, &den) in numerators.iter().zip(&denominators) {
        if num <= 0.0 {
            continue;
        }
        if den <= 0.0 {
            infinite = true;
            kappa = f64::INFINITY;
        } else {
            kappa = kappa.max(num / den);
        }
    }
    Ok(CoverageReport { kappa, infinite, numerators, denominators })
}

/// Largest realized coverage ratio of `rhos[h]` at level `h` over `h = 1..=H`.
pub fn max_coverage_ratio(env: &LowRankMDP, reps: &[LatentRepresentation], rhos: &[Policy]) -> Result<f64> {
    let mut kappa = 0.0_f64;
    for h in 1..=env.horizon().min(rhos.len().saturating_sub(1)) {
        kappa = kappa.max(coverage_ratio(env, reps, &rhos[h], h)?.kappa);
    }
    Ok(kappa)
}
