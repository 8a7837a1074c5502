use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::symmetric_eigenvalues;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PotentialReport {
    /// `tr(X_t M_{t-1}^{-1})` per step.
    pub terms: Vec<f64>,
    pub sum: f64,
    /// `2 d log(1 + T/d)`.
    pub bound: f64,
    pub holds: bool,
}

/// Runs `M_t = M_{t-1} + X_t` from the identity and compares
/// `sum_t tr(X_t M_{t-1}^{-1})` against `2 d log(1 + T/d)`.
pub fn elliptical_potential_check(seq: &[DMatrix<f64>]) -> Result<PotentialReport> {
    let d = seq.first().map_or(0, DMatrix::nrows);
    let mut m = DMatrix::<f64>::identity(d, d);
    let mut terms = Vec::with_capacity(seq.len());
    for (t, x) in seq.iter().enumerate() {
        if x.nrows() != d || x.ncols() != d {
            return Err(Error::NotPsd { index: t, detail: format!("shape {}x{}", x.nrows(), x.ncols()) });
        }
        let min_eig = symmetric_eigenvalues(x).first().copied().unwrap_or(0.0);
        if min_eig < -1e-10 {
            return Err(Error::NotPsd { index: t, detail: format!("eigenvalue {min_eig:e}") });
        }
        if x.trace() > 1.0 + 1e-12 {
            return Err(Error::NotPsd { index: t, detail: format!("trace {}", x.trace()) });
        }
        let chol = m.clone().cholesky().ok_or_else(|| Error::NotPsd {
            index: t,
            detail: "accumulator lost definiteness".into(),
        })?;
        terms.push(chol.solve(x).trace());
        m += x;
    }
    let sum: f64 = terms.iter().sum();
    let bound = if d == 0 { 0.0 } else { 2.0 * d as f64 * (1.0 + seq.len() as f64 / d as f64).ln() };
    Ok(PotentialReport { terms, sum, bound, holds: sum <= bound })
}
