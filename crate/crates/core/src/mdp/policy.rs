//! Tabular, mixture and prefix-then-uniform policies.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::level::sample_index;
use crate::error::{Error, Result};

const WEIGHT_TOL: f64 = 1e-12;

/// Per-level tables `s -> pmf over actions`, stored flat as `N*K` per level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TabularPolicy {
    n_states: usize,
    n_actions: usize,
    levels: Vec<Vec<f64>>,
}

impl TabularPolicy {
    pub fn new(n_states: usize, n_actions: usize, levels: Vec<Vec<f64>>) -> Result<Self> {
        let p = Self { n_states, n_actions, levels };
        p.check_tables()?;
        Ok(p)
    }

    /// Deterministic policy from per-level action choices.
    pub fn deterministic(n_states: usize, n_actions: usize, actions: &[Vec<usize>]) -> Result<Self> {
        let levels = actions
            .iter()
            .map(|acts| {
                if acts.len() != n_states || acts.iter().any(|&a| a >= n_actions) {
                    return Err(Error::InvalidPolicy("action table has wrong shape".into()));
                }
                let mut t = vec![0.0; n_states * n_actions];
                for (s, &a) in acts.iter().enumerate() {
                    t[s * n_actions + a] = 1.0;
                }
                Ok(t)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { n_states, n_actions, levels })
    }

    /// Uniformly random deterministic policy.
    pub fn random_deterministic<R: Rng + ?Sized>(n_states: usize, n_actions: usize, horizon: usize, rng: &mut R) -> Self {
        let actions: Vec<Vec<usize>> = (0..horizon)
            .map(|_| (0..n_states).map(|_| rng.random_range(0..n_actions)).collect())
            .collect();
        Self::deterministic(n_states, n_actions, &actions).expect("actions in range")
    }

    /// Stochastic policy with independent flat-Dirichlet action pmfs.
    pub fn random_stochastic<R: Rng + ?Sized>(n_states: usize, n_actions: usize, horizon: usize, rng: &mut R) -> Self {
        let levels = (0..horizon)
            .map(|_| {
                (0..n_states)
                    .flat_map(|_| crate::envgen::dirichlet_ones(n_actions, rng))
                    .collect()
            })
            .collect();
        Self { n_states, n_actions, levels }
    }

    /// Zero-level placeholder; only meaningful as the prefix of a uniform policy.
    pub fn empty() -> Self {
        Self { n_states: 0, n_actions: 0, levels: Vec::new() }
    }

    fn check_tables(&self) -> Result<()> {
        for (h, t) in self.levels.iter().enumerate() {
            if t.len() != self.n_states * self.n_actions {
                return Err(Error::InvalidPolicy(format!("level {h} table has length {}", t.len())));
            }
            for (s, row) in t.chunks(self.n_actions.max(1)).enumerate() {
                let sum: f64 = row.iter().sum();
                if row.iter().any(|&p| p < 0.0) || (sum - 1.0).abs() > 1e-9 {
                    return Err(Error::InvalidPolicy(format!("level {h}, state {s}: not a pmf")));
                }
            }
        }
        Ok(())
    }

    pub fn horizon(&self) -> usize {
        self.levels.len()
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn action_pmf(&self, h: usize, s: usize) -> &[f64] {
        let k = self.n_actions;
        &self.levels[h][s * k..(s + 1) * k]
    }

    pub fn levels(&self) -> &[Vec<f64>] {
        &self.levels
    }

    /// Most likely action per level and state (lowest index on ties).
    pub fn greedy_actions(&self) -> Vec<Vec<usize>> {
        (0..self.horizon())
            .map(|h| (0..self.n_states).map(|s| argmax(self.action_pmf(h, s))).collect())
            .collect()
    }
}

/// First index attaining the maximum.
pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// A possibly non-Markov policy. Mixtures draw one component per episode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Policy {
    Tabular(TabularPolicy),
    Mixture { components: Vec<Policy>, weights: Vec<f64> },
    /// Runs `prefix` on levels `0..len`, uniform actions afterwards.
    PrefixThenUniform { prefix: Box<Policy>, len: usize },
}

/// A Markov policy obtained by fixing every mixture choice: a tabular
/// policy (if any) used below `cutoff`, uniform actions elsewhere.
#[derive(Clone, Copy, Debug)]
pub struct MarkovView<'a> {
    table: Option<&'a TabularPolicy>,
    cutoff: usize,
}

impl<'a> MarkovView<'a> {
    pub fn uniform() -> Self {
        Self { table: None, cutoff: 0 }
    }

    fn active(&self, h: usize) -> Option<&'a TabularPolicy> {
        self.table.filter(|_| h < self.cutoff)
    }

    pub fn prob(&self, h: usize, s: usize, a: usize, n_actions: usize) -> f64 {
        match self.active(h) {
            Some(t) => t.action_pmf(h, s)[a],
            None => 1.0 / n_actions as f64,
        }
    }

    /// Writes the action pmf at `(h, s)` into `out` (length K).
    pub fn fill_pmf(&self, h: usize, s: usize, out: &mut [f64]) {
        match self.active(h) {
            Some(t) => out.copy_from_slice(t.action_pmf(h, s)),
            None => out.fill(1.0 / out.len() as f64),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, h: usize, s: usize, n_actions: usize, rng: &mut R) -> usize {
        match self.active(h) {
            Some(t) => sample_index(t.action_pmf(h, s), rng),
            None => rng.random_range(0..n_actions),
        }
    }
}

impl Policy {
    /// Uniformly random actions at every level.
    pub fn uniform() -> Self {
        Policy::PrefixThenUniform { prefix: Box::new(Policy::Tabular(TabularPolicy::empty())), len: 0 }
    }

    pub fn uniform_mixture(components: Vec<Policy>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidPolicy("empty mixture".into()));
        }
        let w = 1.0 / components.len() as f64;
        let weights = vec![w; components.len()];
        Ok(Policy::Mixture { components, weights })
    }

    pub fn then_uniform(self, len: usize) -> Self {
        Policy::PrefixThenUniform { prefix: Box::new(self), len }
    }

    /// Checks pmfs, weights, and that every level below `horizon` that the
    /// policy acts on has a table of the right shape.
    pub fn validate(&self, n_states: usize, n_actions: usize, horizon: usize) -> Result<()> {
        self.validate_until(n_states, n_actions, horizon)
    }

    fn validate_until(&self, n: usize, k: usize, needed: usize) -> Result<()> {
        match self {
            Policy::Tabular(t) => {
                if needed == 0 {
                    return Ok(());
                }
                if t.n_states != n || t.n_actions != k {
                    return Err(Error::InvalidPolicy(format!(
                        "tabular policy is {}x{}, model is {n}x{k}",
                        t.n_states, t.n_actions
                    )));
                }
                if t.horizon() < needed {
                    return Err(Error::InvalidPolicy(format!(
                        "tabular policy covers {} levels, {needed} needed",
                        t.horizon()
                    )));
                }
                t.check_tables()
            }
            Policy::Mixture { components, weights } => {
                if components.is_empty() || components.len() != weights.len() {
                    return Err(Error::InvalidPolicy("mixture components and weights disagree".into()));
                }
                let sum: f64 = weights.iter().sum();
                if weights.iter().any(|&w| w < 0.0) || (sum - 1.0).abs() > WEIGHT_TOL {
                    return Err(Error::InvalidPolicy(format!("mixture weights sum to {sum}")));
                }
                components.iter().try_for_each(|c| c.validate_until(n, k, needed))
            }
            Policy::PrefixThenUniform { prefix, len } => prefix.validate_until(n, k, needed.min(*len)),
        }
    }

    /// Draws the Markov policy executed for one episode.
    pub fn sample_markov<R: Rng + ?Sized>(&self, rng: &mut R) -> MarkovView<'_> {
        self.sample_markov_capped(usize::MAX, rng)
    }

    fn sample_markov_capped<R: Rng + ?Sized>(&self, cutoff: usize, rng: &mut R) -> MarkovView<'_> {
        match self {
            Policy::Tabular(t) => MarkovView { table: Some(t), cutoff },
            Policy::Mixture { components, weights } => {
                let i = if components.len() == 1 { 0 } else { sample_index(weights, rng) };
                components[i].sample_markov_capped(cutoff, rng)
            }
            Policy::PrefixThenUniform { prefix, len } => prefix.sample_markov_capped(cutoff.min(*len), rng),
        }
    }

    /// All Markov components with their total episode probabilities.
    pub fn markov_components(&self) -> Vec<(f64, MarkovView<'_>)> {
        let mut out = Vec::new();
        self.collect_components(1.0, usize::MAX, &mut out);
        out
    }

    fn collect_components<'a>(&'a self, weight: f64, cutoff: usize, out: &mut Vec<(f64, MarkovView<'a>)>) {
        match self {
            Policy::Tabular(t) => out.push((weight, MarkovView { table: Some(t), cutoff })),
            Policy::Mixture { components, weights } => {
                for (c, &w) in components.iter().zip(weights) {
                    if w > 0.0 {
                        c.collect_components(weight * w, cutoff, out);
                    }
                }
            }
            Policy::PrefixThenUniform { prefix, len } => prefix.collect_components(weight, cutoff.min(*len), out),
        }
    }
}

impl From<TabularPolicy> for Policy {
    fn from(t: TabularPolicy) -> Self {
        Policy::Tabular(t)
    }
}
