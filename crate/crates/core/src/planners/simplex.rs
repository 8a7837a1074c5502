use crate::envgen::family::check_simplex_table;
use crate::error::Result;
use crate::mdp::{optimize_reward, LowRankMDP, Policy, Reward, TabularPolicy};

#[derive(Clone, Debug)]
pub struct SimplexOutput {
    /// Uniform mixture of the per-coordinate maximizers.
    pub policy: Policy,
    pub components: Vec<TabularPolicy>,
    /// `max_pi E[phi[i]]` at the last level, per coordinate.
    pub values: Vec<f64>,
}

/// For each coordinate `i` of the last level's simplex features, the policy
/// maximizing `E[phi(x, a)[i]]`; returns their uniform mixture.
pub fn simplex_planner(model: &LowRankMDP) -> Result<SimplexOutput> {
    let h = model.horizon();
    let level = model.level(h - 1);
    check_simplex_table(level.phi_table())?;
    let (n, k, z) = (model.n_states(), model.n_actions(), model.dim());
    let mut components = Vec::with_capacity(z);
    let mut values = Vec::with_capacity(z);
    for i in 0..z {
        let table: Vec<f64> = level.phi_table().iter_rows().map(|r| r[i].clamp(0.0, 1.0)).collect();
        let (pi, v) = optimize_reward(model, &Reward::terminal(h, n, k, table)?)?;
        components.push(pi);
        values.push(v);
    }
    let policy = Policy::uniform_mixture(components.iter().cloned().map(Policy::Tabular).collect())?;
    Ok(SimplexOutput { policy, components, values })
}
