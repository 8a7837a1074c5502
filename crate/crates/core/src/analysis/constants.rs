use serde::{Deserialize, Serialize};

use crate::oracles::rate_bound;

/// Quantities the guarantees are stated in.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TheoryInputs {
    pub eta_min: f64,
    pub d: usize,
    pub n_actions: usize,
    pub horizon: usize,
    pub family_size: usize,
    pub n: usize,
    pub delta: f64,
    pub planner_t: usize,
    /// Defaults to `eta_min T / (3d)`.
    pub alpha: Option<f64>,
    /// Defaults to `eta_min^2 / (9d)`.
    pub beta: Option<f64>,
}

/// Constants plus the three parameter requirements
/// `T beta / (2 alpha)`, `alpha d / (2T)` and `(1 + alpha/2) h sqrt(eps_tv)`,
/// each compared with `eta_min / 6` at `h = H - 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TheoryConstants {
    pub eta_min: f64,
    pub beta: f64,
    pub alpha: f64,
    pub kappa: f64,
    pub eps_sup: f64,
    pub eps_tv: f64,
    pub threshold: f64,
    pub requirements: [f64; 3],
    pub satisfied: [bool; 3],
}

pub fn theory_constants(inp: &TheoryInputs) -> TheoryConstants {
    let d = inp.d as f64;
    let t = inp.planner_t.max(1) as f64;
    let k = inp.n_actions as f64;
    let beta = inp.beta.unwrap_or(inp.eta_min * inp.eta_min / (9.0 * d));
    let alpha = inp.alpha.unwrap_or(inp.eta_min * t / (3.0 * d));
    let kappa = alpha * k;
    let eps_sup = rate_bound(inp.family_size, inp.delta, inp.n);
    let eps_tv = kappa * k * eps_sup;
    let h = inp.horizon.saturating_sub(1) as f64;
    let requirements = [
        t * beta / (2.0 * alpha),
        alpha * d / (2.0 * t),
        (1.0 + alpha / 2.0) * h * eps_tv.sqrt(),
    ];
    let threshold = inp.eta_min / 6.0;
    // the defaults make the first two hold with equality; allow rounding
    let satisfied = requirements.map(|r| r <= threshold * (1.0 + 1e-12));
    TheoryConstants { eta_min: inp.eta_min, beta, alpha, kappa, eps_sup, eps_tv, threshold, requirements, satisfied }
}
