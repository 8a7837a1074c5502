use std::path::Path;

use anyhow::Result;
use lowrank_core::analysis::{bellman_error_matrix, elliptical_potential_check, lemma1_check, simulation_gap};
use lowrank_core::envgen::{gen_hypothesis_family, gen_rotated_lowrank, generate, GenKind, GenSpec};
use lowrank_core::flambe::{run_flambe, FlambeRun, PlannerKind};
use lowrank_core::io::{load_model, write_csv};
use lowrank_core::planners::{elliptical_cap, elliptical_planner, post_condition};
use lowrank_core::rng::{stream, LabRng};
use lowrank_core::{LowRankMDP, Policy, Reward, TabularPolicy};
use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::Value;

use crate::args::{CheckArgs, Lemma};
use crate::error::{usage, Violation};
use crate::{out_file, read_env};

#[derive(Serialize)]
struct GapRow {
    trial: usize,
    level: usize,
    gap: f64,
    bound: f64,
    eps_tv: f64,
    holds: bool,
}

#[derive(Serialize)]
struct PlannerRow {
    trial: usize,
    dim: usize,
    horizon: usize,
    beta: f64,
    iterations: usize,
    cap: f64,
    post_value: f64,
    post_bound: f64,
    trace_sum: f64,
    trace_bound: f64,
    holds: bool,
}

#[derive(Serialize)]
struct PotentialRow {
    trial: usize,
    dim: usize,
    steps: usize,
    sum: f64,
    bound: f64,
    holds: bool,
}

#[derive(Serialize)]
struct RegressionRow {
    trial: usize,
    level: usize,
    worst_error: f64,
    sys_id: f64,
    holds: bool,
}

#[derive(Serialize)]
struct RankRow {
    trial: usize,
    level: usize,
    rank: usize,
    dim: usize,
    holds: bool,
}

/// The pair an environment-vs-learned suite runs on.
enum Pair {
    Fixed(LowRankMDP, LowRankMDP),
    /// A fresh environment per trial, learned by a short exploration run.
    Random,
}

fn read_learned(path: &Path) -> Result<LowRankMDP> {
    let bad = |e: String| usage(format!("{}: {e}", path.display()));
    let text = std::fs::read_to_string(path).map_err(|e| bad(e.to_string()))?;
    let value: Value = serde_json::from_str(&text).map_err(|e| bad(e.to_string()))?;
    if let Some(run) = value.get("run") {
        let run: FlambeRun = serde_json::from_value(run.clone()).map_err(|e| bad(e.to_string()))?;
        return Ok(run.learned);
    }
    load_model(path).map_err(|e| bad(e.to_string()))
}

fn pair(a: &CheckArgs) -> Result<Pair> {
    match (&a.env, &a.learned) {
        (Some(e), learned) => {
            let env = read_env(e)?;
            let learned = match learned {
                Some(p) => read_learned(p)?,
                None => env.clone(),
            };
            if learned.n_states() != env.n_states() || learned.n_actions() != env.n_actions() || learned.horizon() != env.horizon() {
                return Err(usage("learned model and environment differ in N, K or H"));
            }
            Ok(Pair::Fixed(env, learned))
        }
        (None, Some(_)) => Err(usage("--learned needs --env")),
        (None, None) => Ok(Pair::Random),
    }
}

fn random_pair(rng: &mut LabRng) -> Result<(LowRankMDP, LowRankMDP)> {
    let spec = GenSpec::latent(GenKind::Simplex, 8, 2, 2, 3, 0.1);
    let env = generate(&spec, rng)?.model;
    let family = gen_hypothesis_family(&env, 6, 6, rng)?;
    let run = run_flambe(&env, &family, PlannerKind::Simplex, 0.0, 100, rng)?;
    Ok((env, run.learned))
}

fn with_pair<T, F>(p: &Pair, rng: &mut LabRng, f: F) -> Result<T>
where
    F: FnOnce(&LowRankMDP, &LowRankMDP, &mut LabRng) -> Result<T>,
{
    match p {
        Pair::Fixed(env, learned) => f(env, learned, rng),
        Pair::Random => {
            let (env, learned) = random_pair(rng)?;
            f(&env, &learned, rng)
        }
    }
}

fn suite_b1(seed: u64, a: &CheckArgs) -> Result<(Vec<GapRow>, usize)> {
    let p = pair(a)?;
    let rows = (0..a.trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, &format!("check/B1/{i}"));
            with_pair(&p, &mut rng, |env, learned, rng| {
                let (n, k, h) = (env.n_states(), env.n_actions(), env.horizon());
                let pi = Policy::Tabular(TabularPolicy::random_stochastic(n, k, h, rng));
                let f: Vec<f64> = (0..n).map(|_| rng.random()).collect();
                let level = rng.random_range(1..=h);
                let g = simulation_gap(env, learned, &f, &pi, level)?;
                Ok(GapRow { trial: i, level, gap: g.gap, bound: g.bound, eps_tv: g.eps_tv, holds: g.holds })
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let fails = rows.iter().filter(|r| !r.holds).count();
    Ok((rows, fails))
}

fn suite_l1(seed: u64, a: &CheckArgs) -> Result<(Vec<RegressionRow>, usize)> {
    let p = pair(a)?;
    let rows = (0..a.trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, &format!("check/L1/{i}"));
            with_pair(&p, &mut rng, |env, learned, rng| {
                let v: Vec<f64> = (0..env.n_states()).map(|_| rng.random()).collect();
                let level = rng.random_range(0..env.horizon());
                let r = lemma1_check(env, learned, &v, level)?;
                Ok(RegressionRow { trial: i, level, worst_error: r.worst_error, sys_id: r.sys_id, holds: r.holds })
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let fails = rows.iter().filter(|r| !r.holds).count();
    Ok((rows, fails))
}

fn planner_row(trial: usize, m: &LowRankMDP, beta: f64) -> Result<PlannerRow> {
    let out = elliptical_planner(m, beta)?;
    let cap = elliptical_cap(m.dim(), beta);
    let (post_value, post_bound) = if out.degenerate { (f64::NAN, f64::NAN) } else { post_condition(m, &out, beta)? };
    let last = out.trace.last();
    let trace_sum = last.map_or(0.0, |r| r.trace_term);
    let trace_bound = last.map_or(0.0, |r| r.bound);
    let holds = out.iterations as f64 <= cap
        && (out.degenerate || post_value <= post_bound + 1e-9)
        && trace_sum <= trace_bound + 1e-9;
    Ok(PlannerRow {
        trial,
        dim: m.dim(),
        horizon: m.horizon(),
        beta,
        iterations: out.iterations,
        cap,
        post_value,
        post_bound,
        trace_sum,
        trace_bound,
        holds,
    })
}

fn suite_c2(seed: u64, a: &CheckArgs) -> Result<(Vec<PlannerRow>, usize)> {
    if !(a.beta > 0.0 && a.beta.is_finite()) {
        return Err(usage("--beta must be positive"));
    }
    let rows = match &a.env {
        Some(p) => vec![planner_row(0, &read_env(p)?, a.beta)?],
        None => (0..a.trials)
            .into_par_iter()
            .map(|i| {
                let mut rng = stream(seed, &format!("check/C2/{i}"));
                let d = rng.random_range(1..=5);
                let h = rng.random_range(1..=4);
                let n = rng.random_range(d.max(2)..=8);
                let k = rng.random_range(2..=3);
                let m = gen_rotated_lowrank(&GenSpec::latent(GenKind::Rotated, n, k, d, h, 0.0), &mut rng)?;
                planner_row(i, &m, a.beta)
            })
            .collect::<Result<Vec<_>>>()?,
    };
    let fails = rows.iter().filter(|r| !r.holds).count();
    Ok((rows, fails))
}

fn suite_f1(seed: u64, a: &CheckArgs) -> Result<(Vec<PotentialRow>, usize)> {
    if a.dim == 0 {
        return Err(usage("--dim must be positive"));
    }
    let d = a.dim;
    let rows = (0..a.trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, &format!("check/F1/{i}"));
            let seq: Vec<DMatrix<f64>> = (0..a.steps)
                .map(|_| {
                    let v: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
                    let norm2: f64 = v.iter().map(|x| x * x).sum();
                    let scale = if norm2 > 0.0 { rng.random::<f64>() / norm2 } else { 0.0 };
                    DMatrix::from_fn(d, d, |r, c| scale * v[r] * v[c])
                })
                .collect();
            let rep = elliptical_potential_check(&seq)?;
            Ok(PotentialRow { trial: i, dim: d, steps: a.steps, sum: rep.sum, bound: rep.bound, holds: rep.holds })
        })
        .collect::<Result<Vec<_>>>()?;
    let fails = rows.iter().filter(|r| !r.holds).count();
    Ok((rows, fails))
}

fn rank_row(trial: usize, env: &LowRankMDP, rng: &mut LabRng) -> Result<RankRow> {
    let (n, k, h) = (env.n_states(), env.n_actions(), env.horizon());
    let rolls: Vec<Policy> = (0..10).map(|_| Policy::Tabular(TabularPolicy::random_stochastic(n, k, h, rng))).collect();
    let pairs: Vec<(Vec<f64>, Vec<f64>)> = (0..10)
        .map(|_| {
            let g = (0..n).map(|_| rng.random()).collect();
            (g, TabularPolicy::random_stochastic(n, k, 1, rng).levels()[0].clone())
        })
        .collect();
    let reward = Reward::from_levels(n, k, (0..h).map(|_| (0..n * k).map(|_| rng.random()).collect()).collect())?;
    let level = rng.random_range(0..h);
    let b = bellman_error_matrix(env, &rolls, &pairs, &reward, level)?;
    Ok(RankRow { trial, level, rank: b.rank, dim: env.dim(), holds: b.rank <= env.dim() })
}

fn suite_a2(seed: u64, a: &CheckArgs) -> Result<(Vec<RankRow>, usize)> {
    let fixed = a.env.as_deref().map(read_env).transpose()?;
    let rows = (0..a.trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, &format!("check/propA2/{i}"));
            match &fixed {
                Some(env) => rank_row(i, env, &mut rng),
                None => {
                    let d = [2, 3, 5][i % 3];
                    let kind = [GenKind::Block, GenKind::Simplex, GenKind::Rotated][(i / 3) % 3];
                    let env = generate(&GenSpec::latent(kind, 12, 3, d, 3, 0.0), &mut rng)?.model;
                    rank_row(i, &env, &mut rng)
                }
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let fails = rows.iter().filter(|r| !r.holds).count();
    Ok((rows, fails))
}

pub fn cmd_check(seed: u64, out: &Path, a: &CheckArgs) -> Result<()> {
    if a.trials == 0 {
        return Err(usage("--trials must be positive"));
    }
    let name = a.lemma.name();
    let path = out_file(out, &format!("check-{name}.csv"))?;
    let table = format!("check-{name}");
    let (total, fails) = match a.lemma {
        Lemma::B1 => {
            let (rows, f) = suite_b1(seed, a)?;
            write_csv(&path, &table, &rows)?;
            (rows.len(), f)
        }
        Lemma::C2 => {
            let (rows, f) = suite_c2(seed, a)?;
            write_csv(&path, &table, &rows)?;
            (rows.len(), f)
        }
        Lemma::F1 => {
            let (rows, f) = suite_f1(seed, a)?;
            write_csv(&path, &table, &rows)?;
            (rows.len(), f)
        }
        Lemma::L1 => {
            let (rows, f) = suite_l1(seed, a)?;
            write_csv(&path, &table, &rows)?;
            (rows.len(), f)
        }
        Lemma::PropA2 => {
            let (rows, f) = suite_a2(seed, a)?;
            write_csv(&path, &table, &rows)?;
            (rows.len(), f)
        }
    };
    println!("{name}: {}/{total} trials hold", total - fails);
    if fails > 0 {
        return Err(Violation(format!("{name}: {fails}/{total} trials violate the bound; see {}", path.display())).into());
    }
    Ok(())
}
