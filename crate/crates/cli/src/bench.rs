use std::path::Path;
use std::time::Instant;

use anyhow::Result;
use lowrank_core::envgen::{gen_hypothesis_family, generate, GenKind, GenSpec};
use lowrank_core::flambe::{run_flambe, PlannerKind};
use lowrank_core::io::write_csv;
use lowrank_core::oracles::{collect_level, mle};
use lowrank_core::planners::{elliptical_planner, simplex_planner};
use lowrank_core::rng::stream;
use lowrank_core::Policy;
use serde::Serialize;

use crate::args::BenchArgs;
use crate::error::usage;
use crate::out_file;

#[derive(Serialize)]
struct BenchRow {
    task: &'static str,
    n_states: usize,
    dim: usize,
    horizon: usize,
    reps: usize,
    mean_secs: f64,
}

fn time<F: FnMut() -> Result<()>>(reps: usize, mut f: F) -> Result<f64> {
    let start = Instant::now();
    for _ in 0..reps {
        f()?;
    }
    Ok(start.elapsed().as_secs_f64() / reps as f64)
}

pub fn cmd_bench(seed: u64, out: &Path, a: &BenchArgs) -> Result<()> {
    if a.reps == 0 {
        return Err(usage("--reps must be positive"));
    }
    let spec = GenSpec::latent(GenKind::Simplex, a.n_states, 2, a.dim, a.horizon, 0.0);
    spec.check().map_err(|e| usage(e.to_string()))?;
    let mut rng = stream(seed, "bench");
    let env = generate(&spec, &mut rng)?.model;
    let size = 2 * a.horizon.max(2);
    let family = gen_hypothesis_family(&env, size, size, &mut rng)?;
    let data = collect_level(&env, &Policy::uniform(), 0, 1000, &mut rng)?;

    let mut rows = Vec::new();
    let mut push = |task, secs| rows.push(BenchRow { task, n_states: a.n_states, dim: a.dim, horizon: a.horizon, reps: a.reps, mean_secs: secs });
    push("generate", time(a.reps, || generate(&spec, &mut rng).map(drop).map_err(Into::into))?);
    push("mle_1000", time(a.reps, || mle(&family, &data).map(drop).map_err(Into::into))?);
    push("elliptical_0.05", time(a.reps, || elliptical_planner(&env, 0.05).map(drop).map_err(Into::into))?);
    push("simplex", time(a.reps, || simplex_planner(&env).map(drop).map_err(Into::into))?);
    push(
        "flambe_simplex_1000",
        time(a.reps, || run_flambe(&env, &family, PlannerKind::Simplex, 0.0, 1000, &mut rng).map(drop).map_err(Into::into))?,
    );
    write_csv(&out_file(out, "bench.csv")?, "bench", &rows)?;
    Ok(())
}
