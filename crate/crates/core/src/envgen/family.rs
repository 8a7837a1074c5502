//! Finite candidate families for the feature maps and next-state embeddings.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::dirichlet_ones;
use crate::error::{Error, Result};
use crate::linalg::norm2;
use crate::mdp::dp::tv_unchecked;
use crate::mdp::{FactoredLevel, FeatureTable, LowRankMDP};

const MIN_DECOY_TV: f64 = 0.01;
const MAX_DECOY_TRIES: usize = 1000;

/// Candidate `phi` tables (`N*K x d`) and `mu` tables (`N x d`), shared by
/// every level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HypothesisFamily {
    n_states: usize,
    n_actions: usize,
    dim: usize,
    phis: Vec<FeatureTable>,
    mus: Vec<FeatureTable>,
}

fn same_table(a: &FeatureTable, b: &FeatureTable) -> bool {
    a.rows() == b.rows() && a.dim() == b.dim() && a.max_abs_diff(b) <= 1e-12
}

impl HypothesisFamily {
    pub fn new(n_states: usize, n_actions: usize, phis: Vec<FeatureTable>, mus: Vec<FeatureTable>) -> Result<Self> {
        let dim = phis
            .first()
            .map(FeatureTable::dim)
            .ok_or_else(|| Error::InvalidArgument("empty phi family".into()))?;
        if mus.is_empty() {
            return Err(Error::InvalidArgument("empty mu family".into()));
        }
        if phis.iter().any(|p| p.rows() != n_states * n_actions || p.dim() != dim)
            || mus.iter().any(|m| m.rows() != n_states || m.dim() != dim)
        {
            return Err(Error::DimensionMismatch("family tables disagree in shape".into()));
        }
        Ok(Self { n_states, n_actions, dim, phis, mus })
    }

    /// The distinct true tables of `model`, nothing else.
    pub fn from_model(model: &LowRankMDP) -> Result<Self> {
        let (phis, mus) = distinct_truths(model);
        Self::new(model.n_states(), model.n_actions(), phis, mus)
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn phis(&self) -> &[FeatureTable] {
        &self.phis
    }

    pub fn mus(&self) -> &[FeatureTable] {
        &self.mus
    }

    /// `|Phi| * |Upsilon|`.
    pub fn size(&self) -> usize {
        self.phis.len() * self.mus.len()
    }

    pub fn pair(&self, i: usize, j: usize) -> Result<FactoredLevel> {
        FactoredLevel::new(self.n_states, self.n_actions, self.phis[i].clone(), self.mus[j].clone())
    }

    /// Indices of a level's true tables, if both are present.
    pub fn locate(&self, level: &FactoredLevel) -> Option<(usize, usize)> {
        let i = self.phis.iter().position(|p| same_table(p, level.phi_table()))?;
        let j = self.mus.iter().position(|m| same_table(m, level.mu_table()))?;
        Some((i, j))
    }

    /// Per-level indices of the true tables, or the first level missing.
    pub fn check_realizable(&self, model: &LowRankMDP) -> Result<Vec<(usize, usize)>> {
        model
            .levels()
            .iter()
            .enumerate()
            .map(|(h, l)| {
                self.locate(l)
                    .ok_or_else(|| Error::RealizabilityViolation(format!("level {h} tables are not in the family")))
            })
            .collect()
    }

    /// Errors with `NotSimplex` unless every `phi` row is a probability vector.
    pub fn check_simplex(&self) -> Result<()> {
        for p in &self.phis {
            check_simplex_table(p)?;
        }
        Ok(())
    }
}

/// `NotSimplex` on the first row with an entry below `-1e-12` or a sum off by
/// more than `1e-9`.
pub(crate) fn check_simplex_table(table: &FeatureTable) -> Result<()> {
    for (r, row) in table.iter_rows().enumerate() {
        if let Some(&v) = row.iter().find(|&&v| v < -1e-12) {
            return Err(Error::NotSimplex { row: r, value: v });
        }
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::NotSimplex { row: r, value: sum });
        }
    }
    Ok(())
}

fn distinct_truths(model: &LowRankMDP) -> (Vec<FeatureTable>, Vec<FeatureTable>) {
    let mut phis: Vec<FeatureTable> = Vec::new();
    let mut mus: Vec<FeatureTable> = Vec::new();
    for l in model.levels() {
        if !phis.iter().any(|p| same_table(p, l.phi_table())) {
            phis.push(l.phi_table().clone());
        }
        if !mus.iter().any(|m| same_table(m, l.mu_table())) {
            mus.push(l.mu_table().clone());
        }
    }
    (phis, mus)
}

/// Largest row-wise TV between a candidate level and the true one, or `None`
/// if the candidate has an invalid row.
fn decoy_gap(candidate: &FactoredLevel, truth: &LowRankMDP, h: usize) -> Option<f64> {
    let (n, k) = (truth.n_states(), truth.n_actions());
    let mut gap = 0.0_f64;
    for s in 0..n {
        for a in 0..k {
            let p = candidate.pmf(s, a).ok()?;
            gap = gap.max(tv_unchecked(&p, truth.transition_pmf(h, s, a).ok()?));
        }
    }
    Some(gap)
}

fn permutation<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(rng);
    p
}

fn phi_decoy<R: Rng + ?Sized>(base: &FeatureTable, n: usize, k: usize, rng: &mut R) -> FeatureTable {
    let mut out = FeatureTable::zeros(base.rows(), base.dim());
    if rng.random::<bool>() {
        let sigma = permutation(n, rng);
        for s in 0..n {
            for a in 0..k {
                out.row_mut(s * k + a).copy_from_slice(base.row(sigma[s] * k + a));
            }
        }
    } else {
        let lambda = rng.random_range(0.2..0.6);
        for r in 0..base.rows() {
            let w = dirichlet_ones(base.rows(), rng);
            let row = out.row_mut(r);
            for (c, v) in row.iter_mut().enumerate() {
                let mix: f64 = w.iter().enumerate().map(|(j, wj)| wj * base.row(j)[c]).sum();
                *v = (1.0 - lambda) * base.row(r)[c] + lambda * mix;
            }
        }
    }
    out
}

fn mu_decoy<R: Rng + ?Sized>(base: &FeatureTable, rng: &mut R) -> FeatureTable {
    let n = base.rows();
    let mut out = FeatureTable::zeros(n, base.dim());
    if rng.random::<bool>() {
        let sigma = permutation(n, rng);
        for x in 0..n {
            out.row_mut(x).copy_from_slice(base.row(sigma[x]));
        }
    } else {
        // mu'(x') = sum_y S(y, x') mu(y) with S = (1 - lambda) I + lambda D,
        // D row-stochastic, so every candidate row stays a pmf
        let lambda = rng.random_range(0.2..0.6);
        for y in 0..n {
            let noise = dirichlet_ones(n, rng);
            for x in 0..n {
                let s = lambda * noise[x] + if x == y { 1.0 - lambda } else { 0.0 };
                for (o, m) in out.row_mut(x).iter_mut().zip(base.row(y)) {
                    *o += s * m;
                }
            }
        }
    }
    out
}

/// The distinct true tables of every level plus random decoys, each list in
/// shuffled order. `phi` decoys permute states or mix rows convexly; `mu`
/// decoys permute next states or push the embedding through a stochastic
/// noise matrix. Each decoy, paired with its base level's other true table,
/// is a valid transition operator at TV distance at least 0.01 from the
/// truth on some row.
pub fn gen_hypothesis_family<R: Rng + ?Sized>(
    model: &LowRankMDP,
    size_phi: usize,
    size_mu: usize,
    rng: &mut R,
) -> Result<HypothesisFamily> {
    let (n, k) = (model.n_states(), model.n_actions());
    let (mut phis, mut mus) = distinct_truths(model);
    if size_phi < phis.len() || size_mu < mus.len() {
        return Err(Error::GenerationFailed(format!(
            "family sizes {size_phi}x{size_mu} cannot hold the {}x{} distinct true tables",
            phis.len(),
            mus.len()
        )));
    }
    let mut tries = 0;
    while phis.len() < size_phi {
        tries += 1;
        if tries > MAX_DECOY_TRIES * size_phi {
            return Err(Error::GenerationFailed("could not build enough diverse phi decoys".into()));
        }
        let h = rng.random_range(0..model.horizon());
        let level = model.level(h);
        let cand = phi_decoy(level.phi_table(), n, k, rng);
        if cand.iter_rows().any(|r| norm2(r) > 1.0 + 1e-9) || phis.iter().any(|p| same_table(p, &cand)) {
            continue;
        }
        let pair = FactoredLevel::new(n, k, cand.clone(), level.mu_table().clone())?;
        if decoy_gap(&pair, model, h).is_some_and(|g| g >= MIN_DECOY_TV) {
            phis.push(cand);
        }
    }
    tries = 0;
    while mus.len() < size_mu {
        tries += 1;
        if tries > MAX_DECOY_TRIES * size_mu {
            return Err(Error::GenerationFailed("could not build enough diverse mu decoys".into()));
        }
        let h = rng.random_range(0..model.horizon());
        let level = model.level(h);
        let cand = mu_decoy(level.mu_table(), rng);
        if mus.iter().any(|m| same_table(m, &cand)) {
            continue;
        }
        let pair = FactoredLevel::new(n, k, level.phi_table().clone(), cand.clone())?;
        if decoy_gap(&pair, model, h).is_some_and(|g| g >= MIN_DECOY_TV) {
            mus.push(cand);
        }
    }
    phis.shuffle(rng);
    mus.shuffle(rng);
    HypothesisFamily::new(n, k, phis, mus)
}
