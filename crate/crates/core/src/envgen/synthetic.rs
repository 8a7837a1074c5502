//! Random latent-variable environments and their rotations.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use super::{dirichlet_ones, GenSpec};
use crate::error::{Error, Result};
use crate::mdp::{max_level_expectation, FactoredLevel, FeatureTable, LatentRepresentation, LowRankMDP};

/// Resampling attempts per level before giving up on the reachability target.
pub const MAX_RESAMPLES: usize = 1000;

fn random_rep<R: Rng + ?Sized>(spec: &GenSpec, block: bool, rng: &mut R) -> Result<LatentRepresentation> {
    let (n, k, z) = (spec.n_states, spec.n_actions, spec.dim);
    let psi: Vec<Vec<f64>> = (0..n * k).map(|_| dirichlet_ones(z, rng)).collect();
    let nu: Vec<Vec<f64>> = if block {
        let mut states: Vec<usize> = (0..n).collect();
        states.shuffle(rng);
        let mut groups = vec![Vec::new(); z];
        for (i, &s) in states.iter().enumerate() {
            groups[i % z].push(s);
        }
        groups
            .iter()
            .map(|g| {
                let w = dirichlet_ones(g.len(), rng);
                let mut row = vec![0.0; n];
                for (&s, &p) in g.iter().zip(&w) {
                    row[s] = p;
                }
                row
            })
            .collect()
    } else {
        (0..z).map(|_| dirichlet_ones(n, rng)).collect()
    };
    LatentRepresentation::new(k, FeatureTable::from_rows(psi)?, FeatureTable::from_rows(nu)?)
}

/// Minimum over latents of `max_pi P[z_{h+1} = z]` for the last level of `model`.
fn last_level_reach(model: &LowRankMDP, rep: &LatentRepresentation) -> Result<f64> {
    let h = model.horizon() - 1;
    let nk = model.n_states() * model.n_actions();
    let mut worst = f64::INFINITY;
    for z in 0..rep.n_latent() {
        let table: Vec<f64> = (0..nk).map(|i| rep.psi_table().row(i)[z]).collect();
        worst = worst.min(max_level_expectation(model, h, table)?.0);
    }
    Ok(worst)
}

fn gen_latent<R: Rng + ?Sized>(spec: &GenSpec, block: bool, rng: &mut R) -> Result<(LowRankMDP, Vec<LatentRepresentation>)> {
    let mut levels: Vec<FactoredLevel> = Vec::with_capacity(spec.horizon);
    let mut reps = Vec::with_capacity(spec.horizon);
    for h in 0..spec.horizon {
        let mut accepted = None;
        for _ in 0..MAX_RESAMPLES {
            let rep = random_rep(spec, block, rng)?;
            let mut candidate = levels.clone();
            candidate.push(rep.to_level()?);
            let model = LowRankMDP::new(candidate, 0)?;
            if last_level_reach(&model, &rep)? >= spec.eta_target {
                accepted = Some(rep);
                break;
            }
        }
        let rep = accepted.ok_or_else(|| {
            Error::GenerationFailed(format!(
                "level {h} missed reachability {} after {MAX_RESAMPLES} draws",
                spec.eta_target
            ))
        })?;
        levels.push(rep.to_level()?);
        reps.push(rep);
    }
    let model = LowRankMDP::new(levels, 0)?.with_latents(reps.clone())?;
    Ok((model, reps))
}

/// Latent-variable MDP whose emissions `nu(z)` have disjoint supports.
pub fn gen_block_mdp<R: Rng + ?Sized>(spec: &GenSpec, rng: &mut R) -> Result<(LowRankMDP, Vec<LatentRepresentation>)> {
    if spec.dim > spec.n_states {
        return Err(Error::InvalidArgument("a block MDP needs Z <= N".into()));
    }
    gen_latent(spec, true, rng)
}

/// Latent-variable MDP with dense random emissions.
pub fn gen_simplex_mdp<R: Rng + ?Sized>(spec: &GenSpec, rng: &mut R) -> Result<(LowRankMDP, Vec<LatentRepresentation>)> {
    gen_latent(spec, false, rng)
}

/// Haar-distributed orthogonal matrix: QR of a Gaussian matrix with the
/// signs of `R`'s diagonal folded into `Q`.
pub fn haar_orthogonal<R: Rng + ?Sized>(d: usize, rng: &mut R) -> DMatrix<f64> {
    let g = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..d {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

fn rotate_rows(table: &FeatureTable, q: &DMatrix<f64>) -> FeatureTable {
    let mut out = FeatureTable::zeros(table.rows(), table.dim());
    for i in 0..table.rows() {
        let x = table.row(i);
        for (r, o) in out.row_mut(i).iter_mut().enumerate() {
            *o = (0..x.len()).map(|c| q[(r, c)] * x[c]).sum();
        }
    }
    out
}

/// A simplex MDP with every level rotated by its own random orthogonal
/// matrix. Transition laws and feature norms are unchanged; the latent
/// representation stays attached.
pub fn gen_rotated_lowrank<R: Rng + ?Sized>(spec: &GenSpec, rng: &mut R) -> Result<LowRankMDP> {
    let (base, reps) = gen_simplex_mdp(spec, rng)?;
    let levels = base
        .levels()
        .iter()
        .map(|l| {
            let q = haar_orthogonal(l.dim(), rng);
            FactoredLevel::new(l.n_states(), l.n_actions(), rotate_rows(l.phi_table(), &q), rotate_rows(l.mu_table(), &q))
        })
        .collect::<Result<Vec<_>>>()?;
    LowRankMDP::new(levels, base.start_state())?.with_latents(reps)
}
