//! The feature-learning exploration loop: per level, collect transitions
//! under the current exploratory policy, fit the level by maximum likelihood,
//! and plan in the learned prefix for the next exploratory policy.

use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::envgen::HypothesisFamily;
use crate::error::{Error, Result};
use crate::mdp::{FactoredLevel, FeatureTable, LowRankMDP, Policy};
use crate::oracles::{collect_level, mle, TransitionDataset};
use crate::planners::{elliptical_planner, real_world_planner, simplex_planner, FqiConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlannerKind {
    Elliptical,
    Simplex,
    Realworld,
}

impl std::str::FromStr for PlannerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "elliptical" => Ok(Self::Elliptical),
            "simplex" => Ok(Self::Simplex),
            "realworld" => Ok(Self::Realworld),
            other => Err(Error::InvalidArgument(format!("unknown planner {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageDiagnostics {
    pub level: usize,
    pub phi_index: usize,
    pub mu_index: usize,
    pub log_likelihood: f64,
    /// Number of mixture components produced by the planner at this stage.
    pub planner_iterations: Option<usize>,
    pub planner_degenerate: bool,
    #[serde(skip)]
    pub wall_time_secs: f64,
}

/// Episode counts. `formula` states how `total` was assembled.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryAccounting {
    pub formula: String,
    pub mle: usize,
    pub planner: usize,
    pub total: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FlambeRun {
    pub planner: PlannerKind,
    pub learned: LowRankMDP,
    /// Exploratory policies `rho_0..rho_H`; `rho_h` acts on levels below `h`
    /// and is uniform from level `h` on.
    pub rhos: Vec<Policy>,
    pub datasets: TransitionDataset,
    pub diagnostics: Vec<StageDiagnostics>,
    pub trajectories_used: usize,
    pub accounting: TrajectoryAccounting,
}

/// What a planner returns at stage `h`: the policy on levels `0..h`, the
/// number of components, whether it degenerated, and episodes consumed.
struct PlanStep {
    policy: Policy,
    iterations: usize,
    degenerate: bool,
    episodes: usize,
}

fn drive<R, P>(
    env: &LowRankMDP,
    family: &HypothesisFamily,
    n: usize,
    kind: PlannerKind,
    rng: &mut R,
    mut plan: P,
) -> Result<FlambeRun>
where
    R: Rng + ?Sized,
    P: FnMut(&LowRankMDP, &[Policy], &mut R) -> Result<PlanStep>,
{
    if n == 0 {
        return Err(Error::InsufficientData { level: 0 });
    }
    if family.n_states() != env.n_states() || family.n_actions() != env.n_actions() {
        return Err(Error::DimensionMismatch("family and environment disagree on N or K".into()));
    }
    family.check_realizable(env)?;
    let horizon = env.horizon();
    let mut rhos = vec![Policy::uniform(), Policy::uniform()];
    let mut datasets = TransitionDataset::with_horizon(horizon);
    let mut levels: Vec<FactoredLevel> = Vec::with_capacity(horizon);
    let mut diagnostics = Vec::with_capacity(horizon);
    let mut planner_episodes = 0;
    for h in 0..horizon {
        let start = Instant::now();
        let data = collect_level(env, &rhos[h], h, n, rng)?;
        let fit = mle(family, &data).map_err(|e| match e {
            Error::InsufficientData { .. } => Error::InsufficientData { level: h },
            other => other,
        })?;
        datasets.levels[h] = data;
        levels.push(family.pair(fit.phi_index, fit.mu_index)?);
        let mut diag = StageDiagnostics {
            level: h,
            phi_index: fit.phi_index,
            mu_index: fit.mu_index,
            log_likelihood: fit.log_likelihood,
            planner_iterations: None,
            planner_degenerate: false,
            wall_time_secs: 0.0,
        };
        if h >= 1 {
            let prefix = LowRankMDP::new(levels[..h].to_vec(), env.start_state())?;
            let step = plan(&prefix, &rhos[..h], rng)?;
            diag.planner_iterations = Some(step.iterations);
            diag.planner_degenerate = step.degenerate;
            planner_episodes += step.episodes;
            rhos.push(step.policy.then_uniform(h));
        }
        diag.wall_time_secs = start.elapsed().as_secs_f64();
        diagnostics.push(diag);
    }
    let learned = LowRankMDP::new(levels, env.start_state())?;
    let mle_episodes = n * horizon;
    let accounting = TrajectoryAccounting {
        formula: match kind {
            PlannerKind::Realworld => "n_mle*H + sum_{h=1}^{H-1} fqi_n*h*Z".into(),
            _ => "n*H".into(),
        },
        mle: mle_episodes,
        planner: planner_episodes,
        total: mle_episodes + planner_episodes,
    };
    Ok(FlambeRun {
        planner: kind,
        learned,
        rhos,
        datasets,
        diagnostics,
        trajectories_used: accounting.total,
        accounting,
    })
}

/// Model-based exploration with the elliptical or simplex planner.
pub fn run_flambe<R: Rng + ?Sized>(
    env: &LowRankMDP,
    family: &HypothesisFamily,
    planner: PlannerKind,
    beta: f64,
    n: usize,
    rng: &mut R,
) -> Result<FlambeRun> {
    match planner {
        PlannerKind::Elliptical => {
            drive(env, family, n, planner, rng, |prefix, _, _| {
                let out = elliptical_planner(prefix, beta)?;
                Ok(PlanStep { policy: out.policy, iterations: out.iterations, degenerate: out.degenerate, episodes: 0 })
            })
        }
        PlannerKind::Simplex => {
            family.check_simplex()?;
            drive(env, family, n, planner, rng, |prefix, _, _| {
                let out = simplex_planner(prefix)?;
                Ok(PlanStep { iterations: out.components.len(), policy: out.policy, degenerate: false, episodes: 0 })
            })
        }
        PlannerKind::Realworld => Err(Error::InvalidArgument(
            "the environment-facing planner needs run_flambe_real_world".into(),
        )),
    }
}

/// Exploration whose planner runs fitted-Q iteration against the environment
/// itself, one run per coordinate of the learned simplex features.
pub fn run_flambe_real_world<R: Rng + ?Sized>(
    env: &LowRankMDP,
    family: &HypothesisFamily,
    n_mle: usize,
    fqi: &FqiConfig,
    rng: &mut R,
) -> Result<FlambeRun> {
    family.check_simplex()?;
    drive(env, family, n_mle, PlannerKind::Realworld, rng, |prefix, rhos, rng| {
        let phis: Vec<FeatureTable> = prefix.levels().iter().map(|l| l.phi_table().clone()).collect();
        let (policy, components, episodes) = real_world_planner(env, rhos, &phis, fqi, rng)?;
        Ok(PlanStep { policy, iterations: components.len(), degenerate: false, episodes })
    })
}
