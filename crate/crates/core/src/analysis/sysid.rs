use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::dot;
use crate::mdp::dp::{expected_next_value, tv_unchecked};
use crate::mdp::{
    bellman_backup_theta, max_level_expectation, occupancy, optimize_reward, state_distribution, LowRankMDP, Policy,
    Reward, TabularPolicy,
};

fn check_shapes(env: &LowRankMDP, learned: &LowRankMDP) -> Result<()> {
    if env.horizon() != learned.horizon() || env.n_states() != learned.n_states() || env.n_actions() != learned.n_actions() {
        return Err(Error::DimensionMismatch("learned model and environment differ in H, N or K".into()));
    }
    Ok(())
}

/// Row-wise `TV(learned, env)` at level `h`, flat `N*K`.
fn tv_table(env: &LowRankMDP, learned: &LowRankMDP, h: usize) -> Vec<f64> {
    let k = env.n_actions();
    (0..env.n_states() * k).map(|i| tv_unchecked(learned.row(h, i / k, i % k), env.row(h, i / k, i % k))).collect()
}

/// `max_pi E_{pi, env}[TV(learned_h(x_h, a_h), env_h(x_h, a_h))]` and a maximizer.
pub fn sys_id_error(env: &LowRankMDP, learned: &LowRankMDP, h: usize) -> Result<(f64, TabularPolicy)> {
    check_shapes(env, learned)?;
    max_level_expectation(env, h, tv_table(env, learned, h))
}

/// `max_pi E_{pi, env}[TV^2]` at level `h`.
pub fn max_expected_sq_tv(env: &LowRankMDP, learned: &LowRankMDP, h: usize) -> Result<f64> {
    check_shapes(env, learned)?;
    let table = tv_table(env, learned, h).into_iter().map(|t| t * t).collect();
    Ok(max_level_expectation(env, h, table)?.0)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SysIdReport {
    pub worst: Vec<f64>,
    pub maximizers: Vec<TabularPolicy>,
    /// Mean error under random stochastic policies.
    pub random_mean: Vec<f64>,
}

/// Worst-case error per level plus the mean over `n_random` random policies.
pub fn sys_id_report<R: Rng + ?Sized>(env: &LowRankMDP, learned: &LowRankMDP, n_random: usize, rng: &mut R) -> Result<SysIdReport> {
    check_shapes(env, learned)?;
    let (n, k, horizon) = (env.n_states(), env.n_actions(), env.horizon());
    let mut worst = Vec::with_capacity(horizon);
    let mut maximizers = Vec::with_capacity(horizon);
    let mut sums = vec![0.0; horizon];
    for h in 0..horizon {
        let (w, p) = sys_id_error(env, learned, h)?;
        worst.push(w);
        maximizers.push(p);
    }
    let tables: Vec<Vec<f64>> = (0..horizon).map(|h| tv_table(env, learned, h)).collect();
    for _ in 0..n_random {
        let policy = Policy::Tabular(TabularPolicy::random_stochastic(n, k, horizon, rng));
        for (h, table) in tables.iter().enumerate() {
            sums[h] += dot(&occupancy(env, &policy, h)?, table);
        }
    }
    let random_mean = sums.iter().map(|s| s / n_random.max(1) as f64).collect();
    Ok(SysIdReport { worst, maximizers, random_mean })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationGap {
    pub gap: f64,
    /// `h sqrt(eps_tv)`.
    pub bound: f64,
    /// `max_{h' < h} max_pi E_{pi, env}[TV_{h'}^2]`.
    pub eps_tv: f64,
    pub holds: bool,
}

/// `|E_{pi, env} f(x_h) - E_{pi, learned} f(x_h)|` against `h sqrt(eps_tv)`.
pub fn simulation_gap(env: &LowRankMDP, learned: &LowRankMDP, f: &[f64], policy: &Policy, h: usize) -> Result<SimulationGap> {
    check_shapes(env, learned)?;
    if f.len() != env.n_states() {
        return Err(Error::DimensionMismatch(format!("f has length {}", f.len())));
    }
    let true_mean = dot(&state_distribution(env, policy, h)?, f);
    let model_mean = dot(&state_distribution(learned, policy, h)?, f);
    let gap = (true_mean - model_mean).abs();
    let mut eps_tv = 0.0_f64;
    for level in 0..h {
        eps_tv = eps_tv.max(max_expected_sq_tv(env, learned, level)?);
    }
    let bound = h as f64 * eps_tv.sqrt();
    Ok(SimulationGap { gap, bound, eps_tv, holds: gap <= bound + 1e-12 })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lemma1Report {
    pub theta: Vec<f64>,
    /// `max_pi E_{pi, env} |<theta, phi_hat_h> - E[V(x_{h+1}) | x_h, a_h]|`.
    pub worst_error: f64,
    pub sys_id: f64,
    pub holds: bool,
}

/// Linear approximation of one-step expectations with the learned features.
pub fn lemma1_check(env: &LowRankMDP, learned: &LowRankMDP, v: &[f64], h: usize) -> Result<Lemma1Report> {
    check_shapes(env, learned)?;
    if v.iter().any(|x| !(0.0..=1.0).contains(x)) {
        return Err(Error::InvalidArgument("V must take values in [0, 1]".into()));
    }
    let theta = bellman_backup_theta(learned, h, v)?;
    let k = env.n_actions();
    let exact = expected_next_value(env, h, v);
    let level = learned.level(h);
    let err: Vec<f64> = exact
        .iter()
        .enumerate()
        .map(|(i, e)| (dot(&theta, level.phi(i / k, i % k)) - e).abs())
        .collect();
    let reward = Reward::at_level(env.horizon(), env.n_states(), k, h, err)?;
    let (_, worst_error) = optimize_reward(env, &reward)?;
    let (sys_id, _) = sys_id_error(env, learned, h)?;
    Ok(Lemma1Report { theta, worst_error, sys_id, holds: worst_error <= sys_id + 1e-9 })
}
