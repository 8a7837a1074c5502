use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dataset::collect_level;
use super::mle::mle;
use crate::envgen::HypothesisFamily;
use crate::error::Result;
use crate::mdp::dp::tv_unchecked;
use crate::mdp::{occupancy, LowRankMDP, Policy};
use crate::rng::stream;

/// `2 log(|F| / delta) / n`.
pub fn rate_bound(family_size: usize, delta: f64, n: usize) -> f64 {
    2.0 * (family_size as f64 / delta).ln() / n as f64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub trial: usize,
    pub n: usize,
    pub tv_sq: f64,
    pub bound: f64,
    pub within: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub rows: Vec<RateRow>,
    pub fraction_within: f64,
}

/// Repeats "sample `n` level-`h` triples under `data_policy`, fit by MLE" and
/// measures the exact expected squared TV error of the fit under the same
/// policy's occupancy. Trial `t` draws from its own stream of `seed`.
#[allow(clippy::too_many_arguments)]
pub fn mle_rate_experiment(
    env: &LowRankMDP,
    family: &HypothesisFamily,
    h: usize,
    n: usize,
    trials: usize,
    delta: f64,
    data_policy: &Policy,
    seed: u64,
) -> Result<RateReport> {
    let occ = occupancy(env, data_policy, h)?;
    let bound = rate_bound(family.size(), delta, n);
    let k = env.n_actions();
    let rows = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = stream(seed, &format!("mle-rate/h{h}/n{n}/trial{trial}"));
            let data = collect_level(env, data_policy, h, n, &mut rng)?;
            let fit = mle(family, &data)?;
            let level = family.pair(fit.phi_index, fit.mu_index)?;
            let mut tv_sq = 0.0;
            for (i, &w) in occ.iter().enumerate() {
                if w > 0.0 {
                    let tv = tv_unchecked(&level.pmf(i / k, i % k)?, env.transition_pmf(h, i / k, i % k)?);
                    tv_sq += w * tv * tv;
                }
            }
            Ok(RateRow { trial, n, tv_sq, bound, within: tv_sq <= bound })
        })
        .collect::<Result<Vec<_>>>()?;
    let fraction_within = rows.iter().filter(|r| r.within).count() as f64 / trials.max(1) as f64;
    Ok(RateReport { rows, fraction_within })
}
