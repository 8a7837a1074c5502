use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::level::sample_index;
use crate::mdp::{LowRankMDP, Policy};

/// One observed `(x, a, x')` triple.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Transition {
    pub x: usize,
    pub a: usize,
    pub xp: usize,
}

/// Per-level lists of transitions.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TransitionDataset {
    pub levels: Vec<Vec<Transition>>,
}

impl TransitionDataset {
    pub fn with_horizon(horizon: usize) -> Self {
        Self { levels: vec![Vec::new(); horizon] }
    }

    pub fn level(&self, h: usize) -> &[Transition] {
        &self.levels[h]
    }

    pub fn total(&self) -> usize {
        self.levels.iter().map(Vec::len).sum()
    }

    pub fn validate(&self, n_states: usize, n_actions: usize) -> Result<()> {
        for (h, l) in self.levels.iter().enumerate() {
            if let Some(t) = l.iter().find(|t| t.x >= n_states || t.a >= n_actions || t.xp >= n_states) {
                return Err(Error::InvalidArgument(format!("level {h} has out-of-range triple {t:?}")));
            }
        }
        Ok(())
    }

    /// `(s, a)` visit frequencies at level `h`, flat `N*K`.
    pub fn empirical_occupancy(&self, h: usize, n_states: usize, n_actions: usize) -> Vec<f64> {
        let mut f = vec![0.0; n_states * n_actions];
        let l = &self.levels[h];
        for t in l {
            f[t.x * n_actions + t.a] += 1.0;
        }
        let n = l.len().max(1) as f64;
        f.iter_mut().for_each(|v| *v /= n);
        f
    }
}

/// `n` triples `(x_h, a_h, x_{h+1})`, each from a fresh episode of `policy`
/// in `env`, truncated after level `h`.
pub fn collect_level<R: Rng + ?Sized>(
    env: &LowRankMDP,
    policy: &Policy,
    h: usize,
    n: usize,
    rng: &mut R,
) -> Result<Vec<Transition>> {
    if h >= env.horizon() {
        return Err(Error::InvalidArgument(format!("level {h} beyond horizon {}", env.horizon())));
    }
    let k = env.n_actions();
    policy.validate(env.n_states(), k, h + 1)?;
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let view = policy.sample_markov(rng);
        let mut s = env.start_state();
        for level in 0..=h {
            let a = view.sample(level, s, k, rng);
            let next = sample_index(env.row(level, s, a), rng);
            if level == h {
                out.push(Transition { x: s, a, xp: next });
            }
            s = next;
        }
    }
    Ok(out)
}
