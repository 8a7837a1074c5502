//! Latent-variable (simplex) representation of a transition operator.

use serde::{Deserialize, Serialize};

use super::level::{FactoredLevel, FeatureTable, PMF_TOL};
use crate::error::{Error, Result};

/// `T(x'|s,a) = sum_z psi(s,a)[z] * nu(z)[x']` with `psi` rows and `nu` rows
/// all pmfs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatentRepresentation {
    n_latent: usize,
    n_actions: usize,
    /// One row per `(s, a)` in state-major order, each a pmf over latents.
    psi: FeatureTable,
    /// One row per latent, each a pmf over next states.
    nu: FeatureTable,
}

fn check_pmf_rows(table: &FeatureTable, what: &str) -> Result<()> {
    for (i, row) in table.iter_rows().enumerate() {
        let sum: f64 = row.iter().sum();
        if row.iter().any(|&v| v < 0.0) || (sum - 1.0).abs() > PMF_TOL {
            return Err(Error::InvalidModel(format!("{what} row {i} is not a pmf (sum {sum})")));
        }
    }
    Ok(())
}

impl LatentRepresentation {
    pub fn new(n_actions: usize, psi: FeatureTable, nu: FeatureTable) -> Result<Self> {
        let n_latent = nu.rows();
        if psi.dim() != n_latent {
            return Err(Error::DimensionMismatch(format!(
                "psi has dimension {}, nu has {n_latent} rows",
                psi.dim()
            )));
        }
        if n_actions == 0 || psi.rows() % n_actions != 0 {
            return Err(Error::DimensionMismatch("psi rows are not a multiple of K".into()));
        }
        check_pmf_rows(&psi, "psi")?;
        check_pmf_rows(&nu, "nu")?;
        Ok(Self { n_latent, n_actions, psi, nu })
    }

    pub fn n_latent(&self) -> usize {
        self.n_latent
    }

    pub fn n_states(&self) -> usize {
        self.psi.rows() / self.n_actions
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn psi(&self, s: usize, a: usize) -> &[f64] {
        self.psi.row(s * self.n_actions + a)
    }

    pub fn nu(&self, z: usize) -> &[f64] {
        self.nu.row(z)
    }

    pub fn psi_table(&self) -> &FeatureTable {
        &self.psi
    }

    pub fn nu_table(&self) -> &FeatureTable {
        &self.nu
    }

    /// `sum_z psi(s,a)[z] nu(z)`.
    pub fn marginal_row(&self, s: usize, a: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.nu.dim()];
        for (z, &w) in self.psi(s, a).iter().enumerate() {
            for (o, v) in out.iter_mut().zip(self.nu(z)) {
                *o += w * v;
            }
        }
        out
    }

    /// Largest deviation between the latent marginal and the level's pmf.
    pub fn consistency_error(&self, level: &FactoredLevel) -> Result<f64> {
        if level.n_states() != self.n_states() || level.n_actions() != self.n_actions {
            return Err(Error::DimensionMismatch("latent representation does not match level shape".into()));
        }
        let mut worst = 0.0_f64;
        for s in 0..self.n_states() {
            for a in 0..self.n_actions {
                let t = level.pmf(s, a)?;
                for (p, q) in self.marginal_row(s, a).iter().zip(&t) {
                    worst = worst.max((p - q).abs());
                }
            }
        }
        Ok(worst)
    }

    /// Whether the emission supports of distinct latents are disjoint.
    pub fn is_block(&self) -> bool {
        let n = self.nu.dim();
        (0..n).all(|x| (0..self.n_latent).filter(|&z| self.nu(z)[x] > 0.0).count() <= 1)
    }

    /// The simplex factorization as a level: `phi = psi`, `mu(x') = (nu(z)[x'])_z`.
    pub fn to_level(&self) -> Result<FactoredLevel> {
        let n = self.nu.dim();
        let mut mu = FeatureTable::zeros(n, self.n_latent);
        for z in 0..self.n_latent {
            for (x, &v) in self.nu(z).iter().enumerate() {
                mu.row_mut(x)[z] = v;
            }
        }
        FactoredLevel::new(self.n_states(), self.n_actions, self.psi.clone(), mu)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rep(nu: Vec<Vec<f64>>) -> LatentRepresentation {
        let psi = FeatureTable::from_rows(vec![
            vec![0.3, 0.7],
            vec![1.0, 0.0],
            vec![0.5, 0.5],
            vec![0.0, 1.0],
            vec![0.9, 0.1],
            vec![0.4, 0.6],
        ])
        .unwrap();
        LatentRepresentation::new(2, psi, FeatureTable::from_rows(nu).unwrap()).unwrap()
    }

    #[test]
    fn block_flag() {
        assert!(rep(vec![vec![1.0, 0.0, 0.0], vec![0.0, 0.5, 0.5]]).is_block());
        assert!(!rep(vec![vec![0.5, 0.5, 0.0], vec![0.0, 0.5, 0.5]]).is_block());
    }

    #[test]
    fn level_view_is_consistent() {
        let r = rep(vec![vec![0.2, 0.8, 0.0], vec![0.0, 0.5, 0.5]]);
        let level = r.to_level().unwrap();
        assert!(r.consistency_error(&level).unwrap() < 1e-12);
        assert!((level.pmf(0, 0).unwrap()[1] - (0.3 * 0.8 + 0.7 * 0.5)).abs() < 1e-12);
    }

    #[test]
    fn rejects_non_pmf_rows() {
        let psi = FeatureTable::from_rows(vec![vec![0.3, 0.6]]).unwrap();
        let nu = FeatureTable::from_rows(vec![vec![1.0], vec![1.0]]).unwrap();
        assert!(LatentRepresentation::new(1, psi, nu).is_err());
    }
}
