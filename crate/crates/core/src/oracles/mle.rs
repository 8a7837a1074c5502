use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dataset::Transition;
use crate::envgen::HypothesisFamily;
use crate::error::{Error, Result};
use crate::linalg::dot;
use crate::mdp::level::{clip_renormalize, sample_index, FeatureTable};

/// Probabilities at or below this count as zero likelihood.
const LOG_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MleResult {
    pub phi_index: usize,
    pub mu_index: usize,
    pub log_likelihood: f64,
}

/// Clip-renormalized next-state pmf of a candidate pair, if it normalizes.
fn candidate_row(phi: &FeatureTable, mu: &FeatureTable, row: usize) -> Option<Vec<f64>> {
    let p = phi.row(row);
    let raw: Vec<f64> = mu.iter_rows().map(|m| dot(p, m)).collect();
    clip_renormalize(&raw)
}

fn count(data: &[Transition]) -> Vec<(Transition, f64)> {
    let mut counts: BTreeMap<Transition, f64> = BTreeMap::new();
    for t in data {
        *counts.entry(*t).or_insert(0.0) += 1.0;
    }
    counts.into_iter().collect()
}

/// Log-likelihood of aggregated counts under a candidate pair. A pair with
/// any row that cannot be renormalized is not a valid model and scores
/// `-inf`, as does one assigning at most `1e-12` to an observed triple.
fn score(phi: &FeatureTable, mu: &FeatureTable, n_actions: usize, counts: &[(Transition, f64)]) -> f64 {
    let rows: Vec<Option<Vec<f64>>> = (0..phi.rows()).map(|r| candidate_row(phi, mu, r)).collect();
    if rows.iter().any(Option::is_none) {
        return f64::NEG_INFINITY;
    }
    let mut total = 0.0;
    for (t, c) in counts {
        let p = rows[t.x * n_actions + t.a].as_ref().expect("checked")[t.xp];
        if p <= LOG_FLOOR {
            return f64::NEG_INFINITY;
        }
        total += c * p.ln();
    }
    total
}

/// Log-likelihood of `data` under the pair `(i, j)` of `family`.
pub fn log_likelihood(family: &HypothesisFamily, i: usize, j: usize, data: &[Transition]) -> f64 {
    score(&family.phis()[i], &family.mus()[j], family.n_actions(), &count(data))
}

/// Exhaustive maximum likelihood over all pairs, lowest `(i, j)` on ties.
pub fn mle(family: &HypothesisFamily, data: &[Transition]) -> Result<MleResult> {
    if data.is_empty() {
        return Err(Error::InsufficientData { level: 0 });
    }
    let (n, k) = (family.n_states(), family.n_actions());
    if data.iter().any(|t| t.x >= n || t.a >= k || t.xp >= n) {
        return Err(Error::InvalidArgument("dataset index out of range for the family".into()));
    }
    let counts = count(data);
    let n_mu = family.mus().len();
    let scores: Vec<f64> = (0..family.size())
        .into_par_iter()
        .map(|idx| score(&family.phis()[idx / n_mu], &family.mus()[idx % n_mu], k, &counts))
        .collect();
    let mut best: Option<usize> = None;
    for (idx, &s) in scores.iter().enumerate() {
        if s > f64::NEG_INFINITY && best.is_none_or(|b| s > scores[b]) {
            best = Some(idx);
        }
    }
    let idx = best.ok_or(Error::AllCandidatesInfeasible)?;
    Ok(MleResult { phi_index: idx / n_mu, mu_index: idx % n_mu, log_likelihood: scores[idx] })
}

/// One draw from the clip-renormalized law `<phi(s,a), mu(.)>` of a candidate pair.
pub fn samp<R: Rng + ?Sized>(phi: &FeatureTable, mu: &FeatureTable, s: usize, a: usize, n_actions: usize, rng: &mut R) -> Result<usize> {
    let row = s * n_actions + a;
    if row >= phi.rows() || phi.dim() != mu.dim() {
        return Err(Error::DimensionMismatch(format!("row {row} of a {}-row table", phi.rows())));
    }
    let pmf = candidate_row(phi, mu, row)
        .ok_or_else(|| Error::InvalidModel(format!("candidate row (s={s}, a={a}) cannot be renormalized")))?;
    Ok(sample_index(&pmf, rng))
}
