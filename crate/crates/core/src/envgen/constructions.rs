//! Hand-built environments: the rank-2 separation instance, the matching
//! polytope slack instance and the two-level lower-bound instance.

use rand::Rng;

use crate::error::{Error, Result};
use crate::mdp::{FactoredLevel, FeatureTable, LowRankMDP};

fn rank2_level(m: usize) -> Result<FactoredLevel> {
    let total = (m * (m + 1) / 2) as f64;
    let phi: Vec<Vec<f64>> = (0..m).flat_map(|_| [vec![1.0, 0.0], vec![0.0, 1.0]]).collect();
    let mu: Vec<Vec<f64>> = (1..=m).map(|i| vec![1.0 / m as f64, i as f64 / total]).collect();
    FactoredLevel::new(m, 2, FeatureTable::from_rows(phi)?, FeatureTable::from_rows(mu)?)
}

/// Two actions over `M` states: action 0 moves uniformly, action 1 moves to
/// state `i` (1-indexed) with probability `i / (1 + ... + M)`. Both levels
/// use the same construction; the start state is 0.
pub fn gen_rank2_separation(m: usize) -> Result<LowRankMDP> {
    if m < 2 {
        return Err(Error::InvalidArgument("M must be at least 2".into()));
    }
    LowRankMDP::new(vec![rank2_level(m)?, rank2_level(m)?], 0)
}

/// Random bit vector for [`gen_lowerbound_mdp`].
pub fn random_bits<R: Rng + ?Sized>(m: usize, rng: &mut R) -> Vec<bool> {
    (0..m).map(|_| rng.random()).collect()
}

/// States `0..M` plus a good state `M` and a bad state `M+1`. Level 0 moves
/// uniformly onto `0..M`; at level 1, state `j` reaches the good state iff
/// the action equals `bits[j]` (false = action 0).
pub fn gen_lowerbound_mdp(m: usize, bits: &[bool]) -> Result<LowRankMDP> {
    if bits.len() != m || m < 1 {
        return Err(Error::InvalidArgument(format!("bit vector of length {} for M = {m}", bits.len())));
    }
    let n = m + 2;
    let phi0 = FeatureTable::from_rows(vec![vec![1.0, 0.0]; n * 2])?;
    let mu0 = FeatureTable::from_rows((0..n).map(|x| vec![if x < m { 1.0 / m as f64 } else { 0.0 }, 0.0]).collect())?;
    let mut phi1 = Vec::with_capacity(n * 2);
    for s in 0..n {
        for a in 0..2 {
            phi1.push(if s < m {
                let good = (a == 1) == bits[s];
                if good { vec![1.0, 0.0] } else { vec![0.0, 1.0] }
            } else {
                vec![0.0, 1.0]
            });
        }
    }
    let mu1 = (0..n)
        .map(|x| vec![if x == m { 1.0 } else { 0.0 }, if x == m + 1 { 1.0 } else { 0.0 }])
        .collect();
    LowRankMDP::new(
        vec![
            FactoredLevel::new(n, 2, phi0, mu0)?,
            FactoredLevel::new(n, 2, FeatureTable::from_rows(phi1)?, FeatureTable::from_rows(mu1)?)?,
        ],
        0,
    )
}

/// All perfect matchings of `K_n` as sorted edge lists.
pub fn perfect_matchings(n: usize) -> Vec<Vec<(usize, usize)>> {
    fn extend(free: &[usize], current: &mut Vec<(usize, usize)>, out: &mut Vec<Vec<(usize, usize)>>) {
        let Some((&u, rest)) = free.split_first() else {
            out.push(current.clone());
            return;
        };
        for (i, &v) in rest.iter().enumerate() {
            let remaining: Vec<usize> = rest.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &x)| x).collect();
            current.push((u, v));
            extend(&remaining, current, out);
            current.pop();
        }
    }
    let mut out = Vec::new();
    if n % 2 == 0 {
        extend(&(0..n).collect::<Vec<_>>(), &mut Vec::new(), &mut out);
    }
    out
}

/// The slack-matrix environment together with its raw ingredients.
#[derive(Clone, Debug)]
pub struct MatchingSlack {
    pub model: LowRankMDP,
    /// Number of perfect matchings (= number of states).
    pub n_vertices: usize,
    /// Kept constraint rows (= number of actions).
    pub n_constraints: usize,
    /// Slack matrix, `n_constraints x n_vertices`, row-major.
    pub slack: Vec<f64>,
}

/// Transition table built from the slack matrix of the perfect matching
/// polytope of `K_n`: action `i` moves to vertex `j` with probability
/// proportional to the slack of constraint `i` at vertex `j`. Every state
/// shares the same rows. Horizon 1.
pub fn gen_matching_slack_mdp(n: usize) -> Result<MatchingSlack> {
    if n % 2 != 0 || !(4..=6).contains(&n) {
        return Err(Error::InvalidArgument("n must be 4 or 6".into()));
    }
    let edges: Vec<(usize, usize)> = (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))).collect();
    let d = edges.len() + 1;
    let vertices: Vec<Vec<f64>> = perfect_matchings(n)
        .iter()
        .map(|m| {
            let mut v: Vec<f64> = edges.iter().map(|e| if m.contains(e) { 1.0 } else { 0.0 }).collect();
            v.push(1.0);
            v
        })
        .collect();

    let mut constraints: Vec<Vec<f64>> = (0..edges.len())
        .map(|e| {
            let mut c = vec![0.0; d];
            c[e] = 1.0;
            c
        })
        .collect();
    // odd cuts; each cut is listed once by requiring vertex 0 inside U
    for mask in 0u32..(1 << n) {
        if mask & 1 == 0 || mask.count_ones() % 2 == 0 {
            continue;
        }
        let mut c: Vec<f64> = edges
            .iter()
            .map(|&(u, v)| if ((mask >> u) & 1) != ((mask >> v) & 1) { 1.0 } else { 0.0 })
            .collect();
        c.push(-1.0);
        constraints.push(c);
    }

    let slack_of = |c: &[f64], v: &[f64]| -> f64 { c.iter().zip(v).map(|(a, b)| a * b).sum() };
    let kept: Vec<Vec<f64>> = constraints
        .into_iter()
        .filter(|c| vertices.iter().any(|v| slack_of(c, v).abs() > 1e-12))
        .collect();

    let n_vertices = vertices.len();
    let mut slack = Vec::with_capacity(kept.len() * n_vertices);
    let mut phi_rows = Vec::with_capacity(kept.len());
    for (i, c) in kept.iter().enumerate() {
        let row: Vec<f64> = vertices.iter().map(|v| slack_of(c, v)).collect();
        let total: f64 = row.iter().sum();
        if !(total > 0.0) || row.iter().any(|&x| x < -1e-12) {
            return Err(Error::DegenerateRow { row: i });
        }
        slack.extend(&row);
        phi_rows.push(c.iter().map(|x| x / total).collect::<Vec<f64>>());
    }
    let k = kept.len();
    let phi: Vec<Vec<f64>> = (0..n_vertices).flat_map(|_| phi_rows.iter().cloned()).collect();
    let level = FactoredLevel::new(n_vertices, k, FeatureTable::from_rows(phi)?, FeatureTable::from_rows(vertices)?)?;
    Ok(MatchingSlack { model: LowRankMDP::new(vec![level], 0)?, n_vertices, n_constraints: k, slack })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matching_counts() {
        assert_eq!(perfect_matchings(4).len(), 3);
        assert_eq!(perfect_matchings(6).len(), 15);
    }

    #[test]
    fn k4_keeps_only_edge_rows() {
        let ms = gen_matching_slack_mdp(4).unwrap();
        assert_eq!(ms.n_vertices, 3);
        assert_eq!(ms.n_constraints, 6);
    }

    #[test]
    fn lowerbound_rejects_wrong_length() {
        assert!(gen_lowerbound_mdp(3, &[true]).is_err());
    }
}
