use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::envgen::family::check_simplex_table;
use crate::error::{Error, Result};
use crate::linalg::{dot, norm2};
use crate::mdp::policy::argmax;
use crate::mdp::{FeatureTable, LowRankMDP, Policy, Reward, TabularPolicy};
use crate::oracles::collect_level;
use crate::rng::seeded_rng;

/// Ridge added to the normal equations for conditioning.
pub const FQI_RIDGE: f64 = 1e-8;

/// Samples per level, and optional overrides of the parameter radius
/// (default `H sqrt(d)`) and the value ceiling (default `H`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FqiConfig {
    pub n: usize,
    #[serde(default)]
    pub theta_bound: Option<f64>,
    #[serde(default)]
    pub clip_ceiling: Option<f64>,
}

impl FqiConfig {
    pub fn new(n: usize) -> Self {
        Self { n, theta_bound: None, clip_ceiling: None }
    }

    fn radius(&self, horizon: usize, d: usize) -> f64 {
        self.theta_bound.unwrap_or(horizon as f64 * (d as f64).sqrt())
    }

    fn ceiling(&self, horizon: usize) -> f64 {
        self.clip_ceiling.unwrap_or(horizon as f64)
    }
}

#[derive(Clone, Debug)]
pub struct FqiOutput {
    pub policy: TabularPolicy,
    /// Fitted parameters per level.
    pub thetas: Vec<Vec<f64>>,
    /// Estimated value `V_0(start)`.
    pub value_estimate: f64,
    pub trajectories: usize,
}

/// Least squares with a small ridge, then radial projection onto the ball of
/// radius `radius`.
fn fit_theta(features: &[&[f64]], targets: &[f64], d: usize, radius: f64) -> Vec<f64> {
    let mut gram = DMatrix::<f64>::identity(d, d) * FQI_RIDGE;
    let mut rhs = DVector::<f64>::zeros(d);
    for (phi, &y) in features.iter().zip(targets) {
        for i in 0..d {
            rhs[i] += phi[i] * y;
            for j in 0..d {
                gram[(i, j)] += phi[i] * phi[j];
            }
        }
    }
    let theta = gram
        .clone()
        .cholesky()
        .map(|c| c.solve(&rhs))
        .unwrap_or_else(|| gram.lu().solve(&rhs).unwrap_or_else(|| DVector::zeros(d)));
    let mut theta: Vec<f64> = theta.iter().copied().collect();
    let norm = norm2(&theta);
    if norm > radius {
        theta.iter_mut().for_each(|t| *t *= radius / norm);
    }
    theta
}

/// Backward fitted-Q iteration with linear value models on the features
/// `phi_hats`. Level `h` regresses `V_{h+1}(x')` on `phi_hats[h](x, a)` using
/// `config.n` transitions collected in `env` under `rhos[h]` followed by a
/// uniform action at level `h`. The horizon is `reward.horizon()`.
pub fn linear_fqi<R: Rng + ?Sized>(
    env: &LowRankMDP,
    rhos: &[Policy],
    phi_hats: &[FeatureTable],
    reward: &Reward,
    config: &FqiConfig,
    rng: &mut R,
) -> Result<FqiOutput> {
    let horizon = reward.horizon();
    let (n, k) = (env.n_states(), env.n_actions());
    if horizon == 0 || horizon > env.horizon() || rhos.len() < horizon || phi_hats.len() < horizon {
        return Err(Error::DimensionMismatch(format!(
            "horizon {horizon} with {} exploration policies and {} feature tables",
            rhos.len(),
            phi_hats.len()
        )));
    }
    if config.n == 0 {
        return Err(Error::InsufficientData { level: horizon - 1 });
    }
    let d = phi_hats[0].dim();
    if phi_hats[..horizon].iter().any(|p| p.rows() != n * k || p.dim() != d) {
        return Err(Error::DimensionMismatch("feature tables have the wrong shape".into()));
    }
    let radius = config.radius(horizon, d);
    let ceiling = config.ceiling(horizon);
    let mut v_next = vec![0.0; n];
    let mut actions = vec![Vec::new(); horizon];
    let mut thetas = vec![Vec::new(); horizon];
    for h in (0..horizon).rev() {
        let data_policy = rhos[h].clone().then_uniform(h);
        let data = collect_level(env, &data_policy, h, config.n, rng)?;
        let feats: Vec<&[f64]> = data.iter().map(|t| phi_hats[h].row(t.x * k + t.a)).collect();
        let targets: Vec<f64> = data.iter().map(|t| v_next[t.xp]).collect();
        let theta = fit_theta(&feats, &targets, d, radius);
        let mut v = vec![0.0; n];
        let mut acts = vec![0; n];
        for s in 0..n {
            let q: Vec<f64> = (0..k).map(|a| reward.get(h, s, a) + dot(&theta, phi_hats[h].row(s * k + a))).collect();
            let a = argmax(&q);
            acts[s] = a;
            v[s] = q[a].min(ceiling);
        }
        actions[h] = acts;
        thetas[h] = theta;
        v_next = v;
    }
    Ok(FqiOutput {
        policy: TabularPolicy::deterministic(n, k, &actions)?,
        thetas,
        value_estimate: v_next[env.start_state()],
        trajectories: config.n * horizon,
    })
}

/// One fitted-Q run per coordinate `i` of the simplex features
/// `phi_hats[h-1]`, with terminal reward `phi_hats[h-1](x, a)[i]`, where
/// `h = phi_hats.len()`. Returns the uniform mixture of the resulting
/// policies and the episodes consumed. Per-run seeds are drawn from `rng` in
/// coordinate order, so the runs may execute in parallel.
pub fn real_world_planner<R: Rng + ?Sized>(
    env: &LowRankMDP,
    rhos: &[Policy],
    phi_hats: &[FeatureTable],
    config: &FqiConfig,
    rng: &mut R,
) -> Result<(Policy, Vec<TabularPolicy>, usize)> {
    let h = phi_hats.len();
    if h == 0 {
        return Err(Error::InvalidArgument("no feature tables".into()));
    }
    let last = &phi_hats[h - 1];
    check_simplex_table(last)?;
    let (n, k, z) = (env.n_states(), env.n_actions(), last.dim());
    let seeds: Vec<u64> = (0..z).map(|_| rng.random()).collect();
    let runs = seeds
        .par_iter()
        .enumerate()
        .map(|(i, &seed)| {
            let table: Vec<f64> = last.iter_rows().map(|r| r[i].clamp(0.0, 1.0)).collect();
            let reward = Reward::terminal(h, n, k, table)?;
            linear_fqi(env, rhos, phi_hats, &reward, config, &mut seeded_rng(seed))
        })
        .collect::<Result<Vec<_>>>()?;
    let used = runs.iter().map(|r| r.trajectories).sum();
    let components: Vec<TabularPolicy> = runs.into_iter().map(|r| r.policy).collect();
    let policy = Policy::uniform_mixture(components.iter().cloned().map(Policy::Tabular).collect())?;
    Ok((policy, components, used))
}
