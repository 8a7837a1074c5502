//! Independent reference computations used as test oracles: explicit
//! trajectory-tree expansion and exhaustive deterministic-policy enumeration.
#![allow(dead_code)]

use lowrank_core::mdp::{FactoredLevel, FeatureTable, LowRankMDP, TabularPolicy};
use lowrank_core::rng::LabRng;
use rand::Rng;

/// Every deterministic policy as per-level action tables, `K^(N*H)` of them.
pub fn all_action_tables(n: usize, k: usize, horizon: usize) -> Vec<Vec<Vec<usize>>> {
    let slots = n * horizon;
    let total = k.pow(slots as u32);
    (0..total)
        .map(|mut code| {
            let mut flat = Vec::with_capacity(slots);
            for _ in 0..slots {
                flat.push(code % k);
                code /= k;
            }
            flat.chunks(n).map(<[usize]>::to_vec).collect()
        })
        .collect()
}

pub fn as_policy(n: usize, k: usize, actions: &[Vec<usize>]) -> TabularPolicy {
    TabularPolicy::deterministic(n, k, actions).unwrap()
}

/// Expected total reward of a deterministic policy by expanding the tree of
/// all trajectories with their probabilities.
pub fn tree_value(model: &LowRankMDP, actions: &[Vec<usize>], reward: &dyn Fn(usize, usize, usize) -> f64) -> f64 {
    fn go(model: &LowRankMDP, actions: &[Vec<usize>], reward: &dyn Fn(usize, usize, usize) -> f64, h: usize, s: usize) -> f64 {
        if h == model.horizon() {
            return 0.0;
        }
        let a = actions[h][s];
        let pmf = model.transition_pmf(h, s, a).unwrap();
        let mut v = reward(h, s, a);
        for (x, &p) in pmf.iter().enumerate() {
            if p > 0.0 {
                v += p * go(model, actions, reward, h + 1, x);
            }
        }
        v
    }
    go(model, actions, reward, 0, model.start_state())
}

/// Probability of each state at level `h` under a deterministic policy, by
/// tree expansion.
pub fn tree_state_dist(model: &LowRankMDP, actions: &[Vec<usize>], h: usize) -> Vec<f64> {
    let mut out = vec![0.0; model.n_states()];
    fn go(model: &LowRankMDP, actions: &[Vec<usize>], target: usize, level: usize, s: usize, p: f64, out: &mut [f64]) {
        if level == target {
            out[s] += p;
            return;
        }
        let pmf = model.transition_pmf(level, s, actions[level][s]).unwrap();
        for (x, &q) in pmf.iter().enumerate() {
            if q > 0.0 {
                go(model, actions, target, level + 1, x, p * q, out);
            }
        }
    }
    go(model, actions, h, 0, model.start_state(), 1.0, &mut out);
    out
}

/// Max over all deterministic policies of a tree-evaluated value.
pub fn brute_force_max(model: &LowRankMDP, reward: &dyn Fn(usize, usize, usize) -> f64) -> f64 {
    all_action_tables(model.n_states(), model.n_actions(), model.horizon())
        .iter()
        .map(|acts| tree_value(model, acts, reward))
        .fold(f64::NEG_INFINITY, f64::max)
}

fn random_pmf(n: usize, rng: &mut LabRng) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| -rng.random::<f64>().max(1e-300).ln()).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|x| x / s).collect()
}

/// Random latent-style model built directly from pmf tables.
pub fn small_model(n: usize, k: usize, horizon: usize, d: usize, rng: &mut LabRng) -> LowRankMDP {
    let levels = (0..horizon)
        .map(|_| {
            let phi: Vec<Vec<f64>> = (0..n * k).map(|_| random_pmf(d, rng)).collect();
            let nu: Vec<Vec<f64>> = (0..d).map(|_| random_pmf(n, rng)).collect();
            let mu: Vec<Vec<f64>> = (0..n).map(|x| (0..d).map(|z| nu[z][x]).collect()).collect();
            FactoredLevel::new(n, k, FeatureTable::from_rows(phi).unwrap(), FeatureTable::from_rows(mu).unwrap()).unwrap()
        })
        .collect();
    LowRankMDP::new(levels, 0).unwrap()
}

pub fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}
