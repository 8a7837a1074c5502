//! Synthetic environments, the appendix constructions, hypothesis families
//! and reachability.

mod constructions;
pub(crate) mod family;
mod reachability;
mod synthetic;

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

pub use constructions::{
    gen_lowerbound_mdp, gen_matching_slack_mdp, gen_rank2_separation, perfect_matchings, random_bits,
    MatchingSlack,
};
pub use family::{gen_hypothesis_family, HypothesisFamily};
pub use reachability::{check_dlv_bound, compute_reachability, dlv_bound_holds, Reachability};
pub use synthetic::{gen_block_mdp, gen_rotated_lowrank, gen_simplex_mdp, haar_orthogonal, MAX_RESAMPLES};

use crate::error::{Error, Result};
use crate::mdp::{LatentRepresentation, LevelReport, LowRankMDP};

/// A draw from the flat Dirichlet on the `n`-simplex.
pub fn dirichlet_ones<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    dirichlet(&vec![1.0; n], rng)
}

/// A draw from `Dirichlet(alpha)` via normalized Gamma variates.
pub fn dirichlet<R: Rng + ?Sized>(alpha: &[f64], rng: &mut R) -> Vec<f64> {
    loop {
        let g: Vec<f64> = alpha
            .iter()
            .map(|&a| Gamma::new(a, 1.0).expect("positive shape").sample(rng))
            .collect();
        let sum: f64 = g.iter().sum();
        if sum > 0.0 {
            return g.into_iter().map(|x| x / sum).collect();
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GenKind {
    Block,
    Simplex,
    Rotated,
    Rank2sep,
    Matchingslack,
    Lowerbound,
}

/// Generator parameters. `dim` is the latent alphabet size for the latent
/// kinds; `m` and `n_match` size the appendix constructions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenSpec {
    pub kind: GenKind,
    pub n_states: usize,
    pub n_actions: usize,
    pub dim: usize,
    pub horizon: usize,
    pub eta_target: f64,
    pub m: usize,
    pub n_match: usize,
}

impl Default for GenSpec {
    fn default() -> Self {
        Self { kind: GenKind::Simplex, n_states: 20, n_actions: 2, dim: 3, horizon: 3, eta_target: 0.2, m: 3, n_match: 4 }
    }
}

impl GenSpec {
    pub fn latent(kind: GenKind, n_states: usize, n_actions: usize, dim: usize, horizon: usize, eta_target: f64) -> Self {
        Self { kind, n_states, n_actions, dim, horizon, eta_target, ..Self::default() }
    }

    pub fn check(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidArgument(msg.to_string()));
        match self.kind {
            GenKind::Block | GenKind::Simplex | GenKind::Rotated => {
                if self.n_states == 0 || self.n_actions == 0 || self.dim == 0 || self.horizon == 0 {
                    return bad("N, K, Z and H must be positive");
                }
                if !(self.eta_target >= 0.0 && self.eta_target <= 1.0 / self.dim as f64) {
                    return bad("eta must lie in [0, 1/Z]");
                }
                if self.kind == GenKind::Block && self.dim > self.n_states {
                    return bad("a block MDP needs Z <= N");
                }
            }
            GenKind::Rank2sep | GenKind::Lowerbound => {
                if self.m < 2 {
                    return bad("M must be at least 2");
                }
            }
            GenKind::Matchingslack => {
                if self.n_match % 2 != 0 || !(4..=6).contains(&self.n_match) {
                    return bad("n must be 4 or 6");
                }
            }
        }
        Ok(())
    }
}

/// A generated environment with its latent representation when it has one.
#[derive(Clone, Debug)]
pub struct Generated {
    pub model: LowRankMDP,
    pub latents: Option<Vec<LatentRepresentation>>,
    /// Set for constructions that deliberately fall outside the norm bounds.
    pub norm_exempt: bool,
}

/// Dispatches on `spec.kind`.
pub fn generate<R: Rng + ?Sized>(spec: &GenSpec, rng: &mut R) -> Result<Generated> {
    spec.check()?;
    let (model, latents, norm_exempt) = match spec.kind {
        GenKind::Block => {
            let (m, l) = gen_block_mdp(spec, rng)?;
            (m, Some(l), false)
        }
        GenKind::Simplex => {
            let (m, l) = gen_simplex_mdp(spec, rng)?;
            (m, Some(l), false)
        }
        GenKind::Rotated => {
            let m = gen_rotated_lowrank(spec, rng)?;
            let l = m.latents().ok().map(<[_]>::to_vec);
            (m, l, false)
        }
        GenKind::Rank2sep => (gen_rank2_separation(spec.m)?, None, false),
        GenKind::Matchingslack => (gen_matching_slack_mdp(spec.n_match)?.model, None, true),
        GenKind::Lowerbound => {
            let bits = random_bits(spec.m, rng);
            (gen_lowerbound_mdp(spec.m, &bits)?, None, false)
        }
    };
    Ok(Generated { model, latents, norm_exempt })
}

/// Per-level normalization and pmf report.
pub fn validity_report<R: Rng + ?Sized>(model: &LowRankMDP, rng: &mut R) -> Vec<LevelReport> {
    model.levels().iter().map(|l| l.validate(rng)).collect()
}
