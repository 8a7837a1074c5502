//! Exact forward (occupancy) and backward (optimal control) recursions.

use serde::{Deserialize, Serialize};

use super::model::LowRankMDP;
use super::policy::{argmax, MarkovView, Policy, TabularPolicy};
use crate::error::{Error, Result};

/// Per-level reward tables over `(s, a)`, flat `N*K` in state-major order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Reward {
    n_states: usize,
    n_actions: usize,
    levels: Vec<Vec<f64>>,
}

impl Reward {
    pub fn zeros(horizon: usize, n_states: usize, n_actions: usize) -> Self {
        Self { n_states, n_actions, levels: vec![vec![0.0; n_states * n_actions]; horizon] }
    }

    /// Reward only at `level`, zero elsewhere.
    pub fn at_level(horizon: usize, n_states: usize, n_actions: usize, level: usize, table: Vec<f64>) -> Result<Self> {
        if level >= horizon || table.len() != n_states * n_actions {
            return Err(Error::DimensionMismatch(format!(
                "reward table of length {} at level {level} for H={horizon}, N*K={}",
                table.len(),
                n_states * n_actions
            )));
        }
        let mut r = Self::zeros(horizon, n_states, n_actions);
        r.levels[level] = table;
        Ok(r)
    }

    /// Reward only at the last level.
    pub fn terminal(horizon: usize, n_states: usize, n_actions: usize, table: Vec<f64>) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::InvalidArgument("horizon must be positive".into()));
        }
        Self::at_level(horizon, n_states, n_actions, horizon - 1, table)
    }

    pub fn from_levels(n_states: usize, n_actions: usize, levels: Vec<Vec<f64>>) -> Result<Self> {
        if levels.iter().any(|l| l.len() != n_states * n_actions) {
            return Err(Error::DimensionMismatch("reward level has wrong length".into()));
        }
        Ok(Self { n_states, n_actions, levels })
    }

    pub fn horizon(&self) -> usize {
        self.levels.len()
    }

    pub fn level(&self, h: usize) -> &[f64] {
        &self.levels[h]
    }

    pub fn get(&self, h: usize, s: usize, a: usize) -> f64 {
        self.levels[h][s * self.n_actions + a]
    }

    fn check_shape(&self, model: &LowRankMDP) -> Result<()> {
        if self.horizon() != model.horizon() || self.n_states != model.n_states() || self.n_actions != model.n_actions() {
            return Err(Error::DimensionMismatch(format!(
                "reward is {}x{}x{}, model is {}x{}x{}",
                self.horizon(),
                self.n_states,
                self.n_actions,
                model.horizon(),
                model.n_states(),
                model.n_actions()
            )));
        }
        Ok(())
    }
}

/// `0.5 * sum |p_i - q_i|`.
pub fn tv_distance(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch(format!("pmfs of length {} and {}", p.len(), q.len())));
    }
    Ok(tv_unchecked(p, q))
}

pub(crate) fn tv_unchecked(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Occupancies of a Markov policy at levels `0..=last`.
pub fn markov_occupancies(model: &LowRankMDP, view: &MarkovView<'_>, last: usize) -> Vec<Vec<f64>> {
    let (n, k) = (model.n_states(), model.n_actions());
    let mut dist = vec![0.0; n];
    dist[model.start_state()] = 1.0;
    let mut out = Vec::with_capacity(last + 1);
    let mut pmf = vec![0.0; k];
    for h in 0..=last {
        let mut occ = vec![0.0; n * k];
        for (s, &ps) in dist.iter().enumerate() {
            if ps == 0.0 {
                continue;
            }
            view.fill_pmf(h, s, &mut pmf);
            for a in 0..k {
                occ[s * k + a] = ps * pmf[a];
            }
        }
        if h < last {
            dist.fill(0.0);
            for (i, &w) in occ.iter().enumerate() {
                if w == 0.0 {
                    continue;
                }
                for (d, &t) in dist.iter_mut().zip(model.row(h, i / k, i % k)) {
                    *d += w * t;
                }
            }
        }
        out.push(occ);
    }
    out
}

/// Exact occupancies over `(s, a)` at every level.
pub fn occupancies(model: &LowRankMDP, policy: &Policy) -> Result<Vec<Vec<f64>>> {
    occupancies_until(model, policy, model.horizon() - 1)
}

fn occupancies_until(model: &LowRankMDP, policy: &Policy, last: usize) -> Result<Vec<Vec<f64>>> {
    policy.validate(model.n_states(), model.n_actions(), last + 1)?;
    let nk = model.n_states() * model.n_actions();
    let mut acc = vec![vec![0.0; nk]; last + 1];
    for (w, view) in policy.markov_components() {
        for (a, o) in acc.iter_mut().zip(markov_occupancies(model, &view, last)) {
            for (x, y) in a.iter_mut().zip(o) {
                *x += w * y;
            }
        }
    }
    Ok(acc)
}

/// Exact joint pmf over `(s, a)` at level `h`.
pub fn occupancy(model: &LowRankMDP, policy: &Policy, h: usize) -> Result<Vec<f64>> {
    if h >= model.horizon() {
        return Err(Error::InvalidArgument(format!("level {h} beyond horizon {}", model.horizon())));
    }
    Ok(occupancies_until(model, policy, h)?.pop().expect("nonempty"))
}

/// Exact state distribution of `x_h` for `h` in `0..=H`.
pub fn state_distribution(model: &LowRankMDP, policy: &Policy, h: usize) -> Result<Vec<f64>> {
    let (n, k) = (model.n_states(), model.n_actions());
    if h > model.horizon() {
        return Err(Error::InvalidArgument(format!("level {h} beyond horizon {}", model.horizon())));
    }
    if h == 0 {
        let mut d = vec![0.0; n];
        d[model.start_state()] = 1.0;
        return Ok(d);
    }
    let occ = occupancy(model, policy, h - 1)?;
    let mut dist = vec![0.0; n];
    for (i, &w) in occ.iter().enumerate() {
        if w > 0.0 {
            for (d, &t) in dist.iter_mut().zip(model.row(h - 1, i / k, i % k)) {
                *d += w * t;
            }
        }
    }
    Ok(dist)
}

/// Expected cumulative reward of `policy`.
pub fn policy_value(model: &LowRankMDP, policy: &Policy, reward: &Reward) -> Result<f64> {
    reward.check_shape(model)?;
    let occ = occupancies(model, policy)?;
    Ok(occ.iter().zip(&reward.levels).map(|(o, r)| o.iter().zip(r).map(|(a, b)| a * b).sum::<f64>()).sum())
}

/// `(sum_x' T_h(x'|s,a) v(x'))` for every `(s, a)`.
pub fn expected_next_value(model: &LowRankMDP, h: usize, v: &[f64]) -> Vec<f64> {
    let (n, k) = (model.n_states(), model.n_actions());
    (0..n * k).map(|i| model.row(h, i / k, i % k).iter().zip(v).map(|(t, x)| t * x).sum()).collect()
}

/// Backward induction without range checks on the reward. Returns an
/// optimal deterministic policy (lowest action on ties) and its value.
pub fn optimize_reward(model: &LowRankMDP, reward: &Reward) -> Result<(TabularPolicy, f64)> {
    reward.check_shape(model)?;
    let (n, k, horizon) = (model.n_states(), model.n_actions(), model.horizon());
    let mut v = vec![0.0; n];
    let mut actions = vec![Vec::new(); horizon];
    for h in (0..horizon).rev() {
        let next = expected_next_value(model, h, &v);
        let mut nv = vec![0.0; n];
        let mut acts = vec![0; n];
        for s in 0..n {
            let q: Vec<f64> = (0..k).map(|a| reward.get(h, s, a) + next[s * k + a]).collect();
            let a = argmax(&q);
            acts[s] = a;
            nv[s] = q[a];
        }
        actions[h] = acts;
        v = nv;
    }
    let policy = TabularPolicy::deterministic(n, k, &actions)?;
    Ok((policy, v[model.start_state()]))
}

/// Exactly optimal deterministic policy for a reward with values in `[0, 1]`.
pub fn best_policy_for_reward(model: &LowRankMDP, reward: &Reward) -> Result<(TabularPolicy, f64)> {
    for (h, level) in reward.levels.iter().enumerate() {
        if let Some(bad) = level.iter().find(|r| !(0.0..=1.0).contains(*r)) {
            return Err(Error::InvalidReward(format!("level {h} has value {bad} outside [0, 1]")));
        }
    }
    optimize_reward(model, reward)
}

/// Maximum over policies of `E[table(x_h, a_h)]`, with a maximizer.
pub fn max_level_expectation(model: &LowRankMDP, h: usize, table: Vec<f64>) -> Result<(f64, TabularPolicy)> {
    let reward = Reward::at_level(model.horizon(), model.n_states(), model.n_actions(), h, table)?;
    let (policy, value) = optimize_reward(model, &reward)?;
    Ok((value, policy))
}

/// `theta = sum_x' mu_h(x') v(x')`, so that `<phi_h(s,a), theta>` is the
/// one-step expectation of `v` under the raw factorization.
pub fn bellman_backup_theta(model: &LowRankMDP, h: usize, v: &[f64]) -> Result<Vec<f64>> {
    if h >= model.horizon() || v.len() != model.n_states() {
        return Err(Error::DimensionMismatch(format!(
            "value table of length {} at level {h}",
            v.len()
        )));
    }
    Ok(model.level(h).mu_weighted_sum(v))
}
