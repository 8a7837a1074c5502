use std::collections::HashSet;
use std::path::Path;

use anyhow::{Context, Result};
use lowrank_core::analysis::{coverage_ratio, sys_id_error, sys_id_report, theory_constants, TheoryConstants, TheoryInputs};
use lowrank_core::envgen::{compute_reachability, gen_hypothesis_family, HypothesisFamily};
use lowrank_core::flambe::{run_flambe, run_flambe_real_world, FlambeRun, PlannerKind};
use lowrank_core::io::{read_json, write_csv, write_json, SCHEMA_VERSION};
use lowrank_core::planners::FqiConfig;
use lowrank_core::rng::stream;
use lowrank_core::{LatentRepresentation, LowRankMDP, Policy};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::args::{EvalArgs, Planner, RunArgs};
use crate::error::usage;
use crate::{out_file, read_env};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunConfig {
    pub env: String,
    pub family: Option<String>,
    /// `|Phi| * |Upsilon|` of the family actually used.
    pub family_size: usize,
    pub planner: PlannerKind,
    pub beta: Option<f64>,
    pub n: usize,
    pub fqi_n: Option<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RunDoc {
    pub schema_version: u32,
    pub seed: u64,
    pub config: RunConfig,
    pub run: FlambeRun,
}

#[derive(Serialize)]
struct MetricsRow {
    seed: u64,
    level: usize,
    sys_id_error: f64,
    kappa: Option<f64>,
    planner_t: Option<usize>,
    log_likelihood: f64,
    phi_index: usize,
    mu_index: usize,
}

#[derive(Serialize)]
struct EvalRow {
    level: usize,
    worst_sys_id: f64,
    random_mean: f64,
    kappa: Option<f64>,
}

#[derive(Serialize)]
struct TheoryDoc {
    schema_version: u32,
    inputs: Option<TheoryInputs>,
    constants: Option<TheoryConstants>,
    note: Option<String>,
}

fn eta_min(env: &LowRankMDP) -> Result<Option<f64>> {
    match env.latents() {
        Ok(reps) => Ok(Some(compute_reachability(env, reps)?.eta_min)),
        Err(_) => Ok(None),
    }
}

/// Coverage of `rhos[h + 1]` at level `h + 1`, one entry per level `h`.
fn kappas(env: &LowRankMDP, reps: Option<&[LatentRepresentation]>, rhos: &[Policy]) -> Result<Vec<Option<f64>>> {
    (0..env.horizon())
        .map(|h| match reps {
            Some(r) if h + 1 < rhos.len() => Ok(Some(coverage_ratio(env, r, &rhos[h + 1], h + 1)?.kappa)),
            _ => Ok(None),
        })
        .collect()
}

fn resolve_beta(env: &LowRankMDP, a: &RunArgs) -> Result<Option<f64>> {
    if let Some(b) = a.beta {
        if !(b > 0.0 && b.is_finite()) {
            return Err(usage(format!("--beta must be positive, got {b}")));
        }
        return Ok(Some(b));
    }
    if a.planner != Planner::Elliptical {
        return Ok(None);
    }
    match eta_min(env)? {
        Some(eta) if eta > 0.0 => Ok(Some(eta * eta / (9.0 * env.dim() as f64))),
        _ => Err(usage("--beta is required when the environment has no reachable latent representation")),
    }
}

fn one_run(env: &LowRankMDP, family: &HypothesisFamily, config: &RunConfig, seed: u64) -> Result<(RunDoc, Vec<MetricsRow>)> {
    let mut rng = stream(seed, "run");
    let run = match config.planner {
        PlannerKind::Realworld => {
            run_flambe_real_world(env, family, config.n, &FqiConfig::new(config.fqi_n.unwrap_or(0)), &mut rng)
        }
        kind => run_flambe(env, family, kind, config.beta.unwrap_or(0.0), config.n, &mut rng),
    }
    .with_context(|| format!("seed {seed}"))?;
    let ks = kappas(env, env.latents().ok(), &run.rhos)?;
    let rows = run
        .diagnostics
        .iter()
        .zip(ks)
        .map(|(d, kappa)| {
            Ok(MetricsRow {
                seed,
                level: d.level,
                sys_id_error: sys_id_error(env, &run.learned, d.level)?.0,
                kappa,
                planner_t: d.planner_iterations,
                log_likelihood: d.log_likelihood,
                phi_index: d.phi_index,
                mu_index: d.mu_index,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((RunDoc { schema_version: SCHEMA_VERSION, seed, config: config.clone(), run }, rows))
}

pub fn cmd_run(seed: u64, out: &Path, a: &RunArgs) -> Result<()> {
    if a.n == 0 {
        return Err(usage("--n must be positive"));
    }
    if a.planner == Planner::Realworld && a.fqi_n == 0 {
        return Err(usage("--fqi-n must be positive"));
    }
    let seeds = if a.seeds.is_empty() { vec![seed] } else { a.seeds.clone() };
    if seeds.iter().collect::<HashSet<_>>().len() != seeds.len() {
        return Err(usage("--seeds must be distinct"));
    }
    let env = read_env(&a.env)?;
    let family: HypothesisFamily = match &a.family {
        Some(p) => read_json(p).map_err(|e| usage(format!("{}: {e}", p.display())))?,
        None => gen_hypothesis_family(&env, a.family_size, a.family_size, &mut stream(seed, "run/family"))?,
    };
    let config = RunConfig {
        env: a.env.display().to_string(),
        family: a.family.as_ref().map(|p| p.display().to_string()),
        family_size: family.size(),
        planner: a.planner.into(),
        beta: resolve_beta(&env, a)?,
        n: a.n,
        fqi_n: (a.planner == Planner::Realworld).then_some(a.fqi_n),
    };
    let results = seeds.par_iter().map(|&s| one_run(&env, &family, &config, s)).collect::<Result<Vec<_>>>()?;
    let single = results.len() == 1;
    let mut metrics = Vec::new();
    for (doc, rows) in results {
        let name = if single { "run.json".to_string() } else { format!("run-{}.json", doc.seed) };
        write_json(&out_file(out, &name)?, &doc)?;
        metrics.extend(rows);
    }
    write_csv(&out_file(out, "metrics.csv")?, "metrics", &metrics)?;
    Ok(())
}

pub fn cmd_eval(seed: u64, out: &Path, a: &EvalArgs) -> Result<()> {
    if !(a.delta > 0.0 && a.delta < 1.0) {
        return Err(usage("--delta must lie in (0, 1)"));
    }
    let env = read_env(&a.env)?;
    let doc: RunDoc = read_json(&a.run).map_err(|e| usage(format!("{}: {e}", a.run.display())))?;
    let learned = &doc.run.learned;
    let report = sys_id_report(&env, learned, a.random, &mut stream(seed, "eval"))?;
    let ks = kappas(&env, env.latents().ok(), &doc.run.rhos)?;
    let rows: Vec<EvalRow> = (0..env.horizon())
        .map(|h| EvalRow { level: h, worst_sys_id: report.worst[h], random_mean: report.random_mean[h], kappa: ks[h] })
        .collect();
    write_csv(&out_file(out, "eval.csv")?, "eval", &rows)?;

    let theory = match eta_min(&env)? {
        Some(eta) => {
            let inputs = TheoryInputs {
                eta_min: eta,
                d: env.dim(),
                n_actions: env.n_actions(),
                horizon: env.horizon(),
                family_size: doc.config.family_size,
                n: doc.config.n,
                delta: a.delta,
                planner_t: doc.run.diagnostics.iter().filter_map(|d| d.planner_iterations).max().unwrap_or(1),
                alpha: None,
                beta: doc.config.beta,
            };
            TheoryDoc { schema_version: SCHEMA_VERSION, constants: Some(theory_constants(&inputs)), inputs: Some(inputs), note: None }
        }
        None => TheoryDoc {
            schema_version: SCHEMA_VERSION,
            inputs: None,
            constants: None,
            note: Some("environment has no latent representation, so eta_min is undefined".into()),
        },
    };
    write_json(&out_file(out, "theory.json")?, &theory)?;
    Ok(())
}
