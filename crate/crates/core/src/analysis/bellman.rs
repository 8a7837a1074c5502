use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, numerical_rank, singular_values};
use crate::mdp::dp::expected_next_value;
use crate::mdp::{state_distribution, LowRankMDP, Policy, Reward};

/// Relative singular-value cutoff for numerical rank.
pub const RANK_REL_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct BellmanMatrix {
    pub matrix: DMatrix<f64>,
    pub singular_values: Vec<f64>,
    pub rank: usize,
}

#[derive(Serialize, Deserialize)]
struct BellmanDoc {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
    singular_values: Vec<f64>,
    rank: usize,
}

impl Serialize for BellmanMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        BellmanDoc {
            rows: self.matrix.nrows(),
            cols: self.matrix.ncols(),
            data: self.matrix.transpose().iter().copied().collect(),
            singular_values: self.singular_values.clone(),
            rank: self.rank,
        }
        .serialize(s)
    }
}

/// Average Bellman errors `E[g(x_h) - R_h(x_h, a_h) - g(x_{h+1})]` with
/// `x_h` from the roll-in policy (row) and `a_h` from the one-step policy
/// of the `(g, pi')` pair (column). One-step policies are flat `N*K` pmf
/// tables.
pub fn bellman_error_matrix(
    env: &LowRankMDP,
    roll_ins: &[Policy],
    pairs: &[(Vec<f64>, Vec<f64>)],
    reward: &Reward,
    h: usize,
) -> Result<BellmanMatrix> {
    if roll_ins.is_empty() || pairs.is_empty() {
        return Err(Error::InvalidArgument("need at least one roll-in policy and one (g, pi') pair".into()));
    }
    let (n, k) = (env.n_states(), env.n_actions());
    if h >= env.horizon() || reward.horizon() != env.horizon() {
        return Err(Error::InvalidArgument(format!("level {h} with horizon {}", env.horizon())));
    }
    let deltas = pairs
        .iter()
        .map(|(g, pi)| {
            if g.len() != n || pi.len() != n * k {
                return Err(Error::DimensionMismatch("(g, pi') pair has the wrong shape".into()));
            }
            let next = expected_next_value(env, h, g);
            Ok((0..n)
                .map(|s| {
                    (0..k)
                        .map(|a| pi[s * k + a] * (g[s] - reward.get(h, s, a) - next[s * k + a]))
                        .sum::<f64>()
                })
                .collect::<Vec<f64>>())
        })
        .collect::<Result<Vec<_>>>()?;
    let dists = roll_ins
        .iter()
        .map(|p| state_distribution(env, p, h))
        .collect::<Result<Vec<_>>>()?;
    let matrix = DMatrix::from_fn(dists.len(), deltas.len(), |i, j| dot(&dists[i], &deltas[j]));
    Ok(BellmanMatrix {
        singular_values: singular_values(&matrix),
        rank: numerical_rank(&matrix, RANK_REL_TOL),
        matrix,
    })
}
