use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{add_outer, norm2, operator_norm, quad_form, spd_inverse, symmetric_eigenvalues};
use crate::mdp::{occupancy, optimize_reward, rollout, LowRankMDP, Policy, Reward, TabularPolicy};

/// Iteration cap of the sampled planner, as a multiple of the exact cap.
pub const SAMPLED_CAP_FACTOR: f64 = 4.0;

/// `4 d log(1 + 4/beta) / beta`.
pub fn elliptical_cap(d: usize, beta: f64) -> f64 {
    4.0 * d as f64 * (1.0 + 4.0 / beta).ln() / beta
}

/// Covariance accumulator `Sigma = I + sum_t Sigma_{pi_t}`.
#[derive(Clone, Debug)]
pub struct EllipticalState {
    pub sigma: DMatrix<f64>,
    pub policies: Vec<TabularPolicy>,
    pub t: usize,
    pub beta: f64,
}

impl EllipticalState {
    pub fn new(d: usize, beta: f64) -> Self {
        Self { sigma: DMatrix::identity(d, d), policies: Vec::new(), t: 0, beta }
    }

    pub fn min_eigenvalue(&self) -> f64 {
        symmetric_eigenvalues(&self.sigma)[0]
    }
}

/// One planner iteration. `trace_term` is the running sum of
/// `tr(Sigma_{pi_t} Sigma_{t-1}^{-1})` over completed iterations and `bound`
/// is `2 d log(1 + t/d)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub t: usize,
    pub objective: f64,
    pub trace_term: f64,
    pub bound: f64,
}

#[derive(Clone, Debug)]
pub struct EllipticalOutput {
    /// Uniform mixture of the iterates, or the uniform policy if degenerate.
    pub policy: Policy,
    pub components: Vec<TabularPolicy>,
    /// Average covariance of the iterates, `(Sigma_T - I) / T`.
    pub sigma_rho: DMatrix<f64>,
    /// Final accumulator `Sigma_T`.
    pub sigma: DMatrix<f64>,
    pub iterations: usize,
    /// Halted before producing any policy.
    pub degenerate: bool,
    pub trace: Vec<TraceRow>,
    pub cap: f64,
    /// Sampled planner only: `||Sigma_hat - Sigma_exact||_op` at halt.
    pub sigma_gap: Option<f64>,
    /// Smallest eigenvalue of the accumulator over all iterations.
    pub min_sigma_eigenvalue: f64,
}

fn last_features(model: &LowRankMDP) -> Vec<&[f64]> {
    let l = model.level(model.horizon() - 1);
    (0..model.n_states())
        .flat_map(|s| (0..model.n_actions()).map(move |a| (s, a)))
        .map(|(s, a)| l.phi(s, a))
        .collect()
}

/// `E_pi[phi phi^T]` at the last level of `model`.
pub fn feature_covariance(model: &LowRankMDP, policy: &Policy) -> Result<DMatrix<f64>> {
    let occ = occupancy(model, policy, model.horizon() - 1)?;
    let d = model.dim();
    let mut cov = DMatrix::zeros(d, d);
    for (w, phi) in occ.iter().zip(last_features(model)) {
        if *w > 0.0 {
            add_outer(&mut cov, phi, *w);
        }
    }
    Ok(cov)
}

/// `max_pi E_pi[phi^T A phi]` at the last level for a PSD `A`, by exact
/// dynamic programming on the reward rescaled by `lambda_max(A) max ||phi||^2`.
pub fn max_quadratic_objective(model: &LowRankMDP, a: &DMatrix<f64>) -> Result<(f64, TabularPolicy)> {
    let feats = last_features(model);
    let table: Vec<f64> = feats.iter().map(|phi| quad_form(a, phi).max(0.0)).collect();
    let lambda = *symmetric_eigenvalues(a).last().expect("nonempty");
    let max_norm_sq = feats.iter().map(|f| norm2(f).powi(2)).fold(0.0, f64::max);
    let scale = lambda * max_norm_sq;
    let h = model.horizon();
    if !(scale > 0.0) {
        let reward = Reward::zeros(h, model.n_states(), model.n_actions());
        let (p, _) = optimize_reward(model, &reward)?;
        return Ok((0.0, p));
    }
    let scaled: Vec<f64> = table.iter().map(|v| (v / scale).min(1.0)).collect();
    let reward = Reward::terminal(h, model.n_states(), model.n_actions(), scaled)?;
    let (policy, value) = optimize_reward(model, &reward)?;
    Ok((value * scale, policy))
}

fn finish(
    state: EllipticalState,
    trace: Vec<TraceRow>,
    cap: f64,
    sigma_gap: Option<f64>,
    min_eig: f64,
    model: &LowRankMDP,
) -> Result<EllipticalOutput> {
    let d = model.dim();
    let t = state.policies.len();
    let (policy, sigma_rho, degenerate) = if t == 0 {
        let p = Policy::uniform();
        let cov = feature_covariance(model, &p)?;
        (p, cov, true)
    } else {
        let p = Policy::uniform_mixture(state.policies.iter().cloned().map(Policy::Tabular).collect())?;
        let cov = (&state.sigma - DMatrix::<f64>::identity(d, d)) / t as f64;
        (p, cov, false)
    };
    Ok(EllipticalOutput {
        policy,
        components: state.policies,
        sigma_rho,
        sigma: state.sigma,
        iterations: t,
        degenerate,
        trace,
        cap,
        sigma_gap,
        min_sigma_eigenvalue: min_eig,
    })
}

fn check_args(model: &LowRankMDP, beta: f64) -> Result<()> {
    if !(beta > 0.0) {
        return Err(Error::InvalidArgument(format!("beta must be positive, got {beta}")));
    }
    if model.horizon() == 0 {
        return Err(Error::InvalidArgument("empty model".into()));
    }
    Ok(())
}

/// Repeatedly adds the policy maximizing `E[phi^T Sigma^{-1} phi]` at the last
/// level of `model` until that maximum is at most `beta`.
pub fn elliptical_planner(model: &LowRankMDP, beta: f64) -> Result<EllipticalOutput> {
    check_args(model, beta)?;
    let d = model.dim();
    let cap = elliptical_cap(d, beta);
    let mut state = EllipticalState::new(d, beta);
    let mut trace = Vec::new();
    let mut cumulative = 0.0;
    let mut min_eig = 1.0_f64;
    loop {
        state.t += 1;
        let inv = spd_inverse(&state.sigma).ok_or_else(|| Error::InvalidModel("covariance lost definiteness".into()))?;
        let (objective, pi) = max_quadratic_objective(model, &inv)?;
        if objective <= beta {
            break;
        }
        if state.policies.len() + 1 > cap.floor() as usize {
            return Err(Error::NonConvergence { iterations: state.policies.len() + 1, bound: cap });
        }
        let cov = feature_covariance(model, &Policy::Tabular(pi.clone()))?;
        cumulative += (&cov * &inv).trace();
        state.sigma += cov;
        state.policies.push(pi);
        min_eig = min_eig.min(state.min_eigenvalue());
        trace.push(TraceRow {
            t: state.t,
            objective,
            trace_term: cumulative,
            bound: 2.0 * d as f64 * (1.0 + state.t as f64 / d as f64).ln(),
        });
    }
    finish(state, trace, cap, None, min_eig, model)
}

/// Like [`elliptical_planner`] but covariances and halting values are
/// estimated from `n_est` episodes sampled in `model`; the argmax still runs
/// exact dynamic programming on the estimated accumulator.
pub fn sampled_elliptical_planner<R: Rng + ?Sized>(
    model: &LowRankMDP,
    beta: f64,
    n_est: usize,
    rng: &mut R,
) -> Result<EllipticalOutput> {
    check_args(model, beta)?;
    if n_est == 0 {
        return Err(Error::InvalidArgument("n_est must be positive".into()));
    }
    let d = model.dim();
    let last = model.horizon() - 1;
    let cap = SAMPLED_CAP_FACTOR * elliptical_cap(d, beta);
    let mut state = EllipticalState::new(d, beta);
    let mut exact = DMatrix::<f64>::identity(d, d);
    let mut trace = Vec::new();
    let mut cumulative = 0.0;
    let mut min_eig = 1.0_f64;
    loop {
        state.t += 1;
        let inv = spd_inverse(&state.sigma).ok_or_else(|| Error::InvalidModel("covariance lost definiteness".into()))?;
        let (_, pi) = max_quadratic_objective(model, &inv)?;
        let policy = Policy::Tabular(pi);
        let mut cov = DMatrix::zeros(d, d);
        let mut objective = 0.0;
        for _ in 0..n_est {
            let traj = rollout(model, &policy, rng)?;
            let phi = model.level(last).phi(traj.states[last], traj.actions[last]);
            objective += quad_form(&inv, phi);
            add_outer(&mut cov, phi, 1.0);
        }
        objective /= n_est as f64;
        cov /= n_est as f64;
        if objective <= beta {
            break;
        }
        if state.policies.len() + 1 > cap.floor() as usize {
            return Err(Error::NonConvergence { iterations: state.policies.len() + 1, bound: cap });
        }
        cumulative += (&cov * &inv).trace();
        exact += feature_covariance(model, &policy)?;
        state.sigma += cov;
        let Policy::Tabular(pi) = policy else { unreachable!() };
        state.policies.push(pi);
        min_eig = min_eig.min(state.min_eigenvalue());
        trace.push(TraceRow {
            t: state.t,
            objective,
            trace_term: cumulative,
            bound: 2.0 * d as f64 * (1.0 + state.t as f64 / d as f64).ln(),
        });
    }
    let gap = operator_norm(&(&state.sigma - &exact));
    finish(state, trace, cap, Some(gap), min_eig, model)
}

/// `(max_pi E[phi^T (Sigma_rho + I/T)^{-1} phi], T * beta)` for a
/// non-degenerate output, computed by exact dynamic programming.
pub fn post_condition(model: &LowRankMDP, out: &EllipticalOutput, beta: f64) -> Result<(f64, f64)> {
    let t = out.iterations;
    if t == 0 {
        return Err(Error::InvalidArgument("degenerate planner output has no post-condition".into()));
    }
    let d = model.dim();
    let m = &out.sigma_rho + DMatrix::<f64>::identity(d, d) / t as f64;
    let inv = spd_inverse(&m).ok_or_else(|| Error::InvalidModel("singular Sigma_rho + I/T".into()))?;
    let (value, _) = max_quadratic_objective(model, &inv)?;
    Ok((value, t as f64 * beta))
}
