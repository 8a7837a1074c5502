//! One time step of a factored transition operator.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, norm2};

/// Tolerance used when checking pmf rows.
pub const PMF_TOL: f64 = 1e-9;
/// Rows whose raw mass falls below this cannot be renormalized.
pub const MIN_ROW_MASS: f64 = 1e-6;

/// A dense table of `rows` vectors of dimension `dim`, stored row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureTable {
    rows: usize,
    dim: usize,
    data: Vec<f64>,
}

impl FeatureTable {
    pub fn zeros(rows: usize, dim: usize) -> Self {
        Self { rows, dim, data: vec![0.0; rows * dim] }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch("feature rows have unequal length".into()));
        }
        let n = rows.len();
        Ok(Self { rows: n, dim, data: rows.into_iter().flatten().collect() })
    }

    pub fn from_flat(rows: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * dim {
            return Err(Error::DimensionMismatch(format!(
                "{} values for a {rows}x{dim} table",
                data.len()
            )));
        }
        Ok(Self { rows, dim, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.dim.max(1)).take(self.rows)
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.iter_rows().map(<[f64]>::to_vec).collect()
    }

    /// Largest absolute entrywise difference; infinite on shape mismatch.
    pub fn max_abs_diff(&self, other: &FeatureTable) -> f64 {
        if self.rows != other.rows || self.dim != other.dim {
            return f64::INFINITY;
        }
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

/// Clip negative entries at zero and renormalize. `None` when the clipped
/// mass is below [`MIN_ROW_MASS`].
pub fn clip_renormalize(raw: &[f64]) -> Option<Vec<f64>> {
    let mass: f64 = raw.iter().map(|v| v.max(0.0)).sum();
    if !(mass >= MIN_ROW_MASS) {
        return None;
    }
    Some(raw.iter().map(|v| v.max(0.0) / mass).collect())
}

/// Draw an index from a pmf by inverting its CDF with one uniform draw.
pub fn sample_index<R: Rng + ?Sized>(pmf: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &p) in pmf.iter().enumerate() {
        if p > 0.0 {
            last_positive = i;
            acc += p;
            if u < acc {
                return i;
            }
        }
    }
    // only reachable through rounding when the pmf sums to slightly below 1
    last_positive
}

/// Transition operator `T(x'|s,a) = <phi(s,a), mu(x')>` for one level.
///
/// `phi` has one row per `(s, a)` pair in state-major order (`s * K + a`);
/// `mu` has one row per next state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FactoredLevel {
    n_states: usize,
    n_actions: usize,
    phi: FeatureTable,
    mu: FeatureTable,
}

/// Result of checking a level against the normalization and pmf conditions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelReport {
    pub max_phi_norm: f64,
    pub min_raw_entry: f64,
    pub max_row_sum_error: f64,
    pub max_mu_norm: f64,
    /// Whether `max_mu_norm` came from exhaustive enumeration of binary g.
    pub mu_norm_exhaustive: bool,
    pub phi_norm_ok: bool,
    pub pmf_ok: bool,
    pub mu_norm_ok: bool,
}

impl LevelReport {
    pub fn is_valid(&self) -> bool {
        self.phi_norm_ok && self.pmf_ok && self.mu_norm_ok
    }
}

impl FactoredLevel {
    pub fn new(n_states: usize, n_actions: usize, phi: FeatureTable, mu: FeatureTable) -> Result<Self> {
        if phi.rows() != n_states * n_actions {
            return Err(Error::DimensionMismatch(format!(
                "phi has {} rows, expected {}",
                phi.rows(),
                n_states * n_actions
            )));
        }
        if mu.rows() != n_states {
            return Err(Error::DimensionMismatch(format!(
                "mu has {} rows, expected {n_states}",
                mu.rows()
            )));
        }
        if phi.dim() != mu.dim() {
            return Err(Error::DimensionMismatch(format!(
                "phi dimension {} differs from mu dimension {}",
                phi.dim(),
                mu.dim()
            )));
        }
        Ok(Self { n_states, n_actions, phi, mu })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn dim(&self) -> usize {
        self.phi.dim()
    }

    pub fn phi(&self, s: usize, a: usize) -> &[f64] {
        self.phi.row(s * self.n_actions + a)
    }

    pub fn mu(&self, x: usize) -> &[f64] {
        self.mu.row(x)
    }

    pub fn phi_table(&self) -> &FeatureTable {
        &self.phi
    }

    pub fn mu_table(&self) -> &FeatureTable {
        &self.mu
    }

    /// Raw inner products `<phi(s,a), mu(x')>` for every next state.
    pub fn raw_row(&self, s: usize, a: usize) -> Vec<f64> {
        let p = self.phi(s, a);
        (0..self.n_states).map(|x| dot(p, self.mu(x))).collect()
    }

    /// Clip-renormalized transition pmf for `(s, a)`.
    pub fn pmf(&self, s: usize, a: usize) -> Result<Vec<f64>> {
        clip_renormalize(&self.raw_row(s, a)).ok_or_else(|| {
            Error::InvalidModel(format!("row (s={s}, a={a}) has mass below {MIN_ROW_MASS:e}"))
        })
    }

    /// All rows as a dense `N*K x N` table, or the first invalid row.
    pub fn transition_table(&self) -> Result<Vec<f64>> {
        let n = self.n_states;
        let mut table = Vec::with_capacity(n * self.n_actions * n);
        for s in 0..n {
            for a in 0..self.n_actions {
                table.extend(self.pmf(s, a)?);
            }
        }
        Ok(table)
    }

    /// Like [`transition_table`](Self::transition_table) but rows that cannot
    /// be renormalized come back as `None`.
    pub fn lenient_table(&self) -> Vec<Option<Vec<f64>>> {
        (0..self.n_states)
            .flat_map(|s| (0..self.n_actions).map(move |a| (s, a)))
            .map(|(s, a)| clip_renormalize(&self.raw_row(s, a)))
            .collect()
    }

    /// `sum_x' mu(x') g(x')`.
    pub fn mu_weighted_sum(&self, g: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        for (x, &gx) in g.iter().enumerate() {
            if gx != 0.0 {
                for (o, m) in out.iter_mut().zip(self.mu(x)) {
                    *o += gx * m;
                }
            }
        }
        out
    }

    /// Maximum of `||sum_x' mu(x') g(x')||_2` over binary `g`. Exhaustive
    /// (Gray-code walk) when `N <= 20`, otherwise 10^4 random draws.
    pub fn max_mu_norm<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, bool) {
        let n = self.n_states;
        let d = self.dim();
        if n <= 20 {
            let mut acc = vec![0.0; d];
            let mut best = 0.0_f64;
            let mut gray_prev = 0u64;
            for i in 1u64..(1u64 << n) {
                let gray = i ^ (i >> 1);
                let flipped = (gray ^ gray_prev).trailing_zeros() as usize;
                let sign = if gray & (1 << flipped) != 0 { 1.0 } else { -1.0 };
                for (o, m) in acc.iter_mut().zip(self.mu(flipped)) {
                    *o += sign * m;
                }
                gray_prev = gray;
                best = best.max(norm2(&acc));
            }
            (best, true)
        } else {
            let mut best = 0.0_f64;
            for _ in 0..10_000 {
                let g: Vec<f64> = (0..n).map(|_| if rng.random::<bool>() { 1.0 } else { 0.0 }).collect();
                best = best.max(norm2(&self.mu_weighted_sum(&g)));
            }
            (best, false)
        }
    }

    /// Check the normalization and pmf invariants.
    pub fn validate<R: Rng + ?Sized>(&self, rng: &mut R) -> LevelReport {
        let max_phi_norm = self.phi.iter_rows().map(norm2).fold(0.0, f64::max);
        let mut min_raw_entry = f64::INFINITY;
        let mut max_row_sum_error = 0.0_f64;
        for s in 0..self.n_states {
            for a in 0..self.n_actions {
                let raw = self.raw_row(s, a);
                min_raw_entry = raw.iter().copied().fold(min_raw_entry, f64::min);
                let sum: f64 = raw.iter().sum();
                max_row_sum_error = max_row_sum_error.max((sum - 1.0).abs());
            }
        }
        let (max_mu_norm, mu_norm_exhaustive) = self.max_mu_norm(rng);
        LevelReport {
            max_phi_norm,
            min_raw_entry,
            max_row_sum_error,
            max_mu_norm,
            mu_norm_exhaustive,
            phi_norm_ok: max_phi_norm <= 1.0 + PMF_TOL,
            pmf_ok: min_raw_entry >= -1e-12 && max_row_sum_error <= PMF_TOL,
            mu_norm_ok: max_mu_norm <= (self.dim() as f64).sqrt() + 1e-6,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded_rng;

    fn level(phi: Vec<Vec<f64>>, mu: Vec<Vec<f64>>, n: usize, k: usize) -> FactoredLevel {
        FactoredLevel::new(n, k, FeatureTable::from_rows(phi).unwrap(), FeatureTable::from_rows(mu).unwrap())
            .unwrap()
    }

    #[test]
    fn clip_renormalize_handles_negatives() {
        let p = clip_renormalize(&[0.5, -0.1, 0.5]).unwrap();
        assert_eq!(p, vec![0.5, 0.0, 0.5]);
        assert!(clip_renormalize(&[-1.0, 1e-8]).is_none());
    }

    #[test]
    fn pmf_matches_raw_row_when_nonnegative() {
        let l = level(vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![vec![0.25, 0.5], vec![0.75, 0.5]], 2, 1);
        assert_eq!(l.pmf(0, 0).unwrap(), vec![0.25, 0.75]);
        assert_eq!(l.pmf(1, 0).unwrap(), vec![0.5, 0.5]);
    }

    #[test]
    fn invalid_row_is_reported() {
        let l = level(vec![vec![0.0]], vec![vec![1.0]], 1, 1);
        assert!(matches!(l.pmf(0, 0), Err(Error::InvalidModel(_))));
    }

    #[test]
    fn shape_errors() {
        let phi = FeatureTable::from_rows(vec![vec![1.0]]).unwrap();
        let mu = FeatureTable::from_rows(vec![vec![1.0], vec![0.0]]).unwrap();
        assert!(FactoredLevel::new(2, 1, phi, mu).is_err());
    }

    #[test]
    fn gray_code_walk_matches_brute_force() {
        let mu = vec![vec![0.3, -0.2], vec![0.1, 0.4], vec![0.6, -0.2], vec![-0.1, 0.3]];
        let l = level(vec![vec![1.0, 0.0]; 4], mu, 4, 1);
        let mut brute = 0.0_f64;
        for mask in 0u32..16 {
            let g: Vec<f64> = (0..4).map(|i| ((mask >> i) & 1) as f64).collect();
            brute = brute.max(norm2(&l.mu_weighted_sum(&g)));
        }
        let (walk, exhaustive) = l.max_mu_norm(&mut seeded_rng(0));
        assert!(exhaustive);
        assert!((walk - brute).abs() < 1e-12);
    }

    #[test]
    fn sample_index_skips_zero_mass() {
        let mut rng = seeded_rng(3);
        for _ in 0..1000 {
            assert_eq!(sample_index(&[0.0, 1.0, 0.0], &mut rng), 1);
        }
    }
}
