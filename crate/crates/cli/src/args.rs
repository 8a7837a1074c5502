use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lowrank_core::envgen::GenKind;
use lowrank_core::flambe::PlannerKind;

#[derive(Debug, Parser)]
#[command(name = "lowrank", version, about = "Low-rank MDP laboratory: generate environments, run FLAMBE, audit guarantees")]
#[command(after_help = "Exit codes: 0 ok, 1 algorithm failure, 2 usage error, 3 assertion violation.\n\
Every JSON output carries schema_version; every CSV starts with a `# lowrank <table> v<version>` line.")]
pub struct Cli {
    /// Master seed. Each subcommand derives its own streams from it by label.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,

    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// JSON object of flag defaults. Top-level keys apply to global flags,
    /// a nested object under the subcommand name applies to its flags.
    /// Flags given on the command line win.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate an environment: writes model.json, meta.json and optionally family.json.
    Gen(GenArgs),
    /// Run FLAMBE on an environment: writes run.json and metrics.csv.
    #[command(after_help = "metrics.csv columns:\n  \
        seed            master seed of the run\n  \
        level           level h\n  \
        sys_id_error    max over policies of E[TV(T_h, learned T_h)] at level h\n  \
        kappa           coverage ratio of rho_{h+1} at level h+1 (empty without latents)\n  \
        planner_t       planner components produced at stage h (empty at h = 0)\n  \
        log_likelihood  log-likelihood of the selected pair on the level-h data\n  \
        phi_index       selected phi in the family\n  \
        mu_index        selected mu in the family")]
    Run(RunArgs),
    /// Evaluate a run: writes eval.csv and theory.json.
    #[command(after_help = "eval.csv columns:\n  \
        level         level h\n  \
        worst_sys_id  max over policies of E[TV] at level h\n  \
        random_mean   mean E[TV] over random stochastic policies\n  \
        kappa         coverage ratio of rho_{h+1} at level h+1 (empty without latents)\n\n\
        theory.json holds the guarantee constants at the run's n, family size and delta.")]
    Eval(EvalArgs),
    /// Run a named guarantee suite: writes check-<lemma>.csv, exits 3 on violation.
    #[command(after_help = "check-<lemma>.csv columns:\n  \
        B1      trial, level, gap, bound, eps_tv, holds\n            \
                |E f(x_h) - learned E f(x_h)| against h sqrt(eps_tv)\n  \
        C2      trial, dim, horizon, beta, iterations, cap, post_value, post_bound, trace_sum, trace_bound, holds\n            \
                elliptical planner halting and post-condition\n  \
        F1      trial, dim, steps, sum, bound, holds\n            \
                sum_t tr(X_t M_{t-1}^-1) against 2 d log(1 + T/d)\n  \
        L1      trial, level, worst_error, sys_id, holds\n            \
                learned-feature regression error against the sys-id error\n  \
        propA2  trial, level, rank, dim, holds\n            \
                numerical rank of the average Bellman error matrix against d")]
    Check(CheckArgs),
    /// Time the main kernels: writes bench.csv.
    #[command(after_help = "bench.csv columns:\n  \
        task       kernel name\n  \
        n_states   N\n  \
        dim        d\n  \
        horizon    H\n  \
        reps       repetitions\n  \
        mean_secs  mean wall time per repetition")]
    Bench(BenchArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Kind {
    Block,
    Simplex,
    Rotated,
    Rank2sep,
    Matchingslack,
    Lowerbound,
}

impl From<Kind> for GenKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Block => GenKind::Block,
            Kind::Simplex => GenKind::Simplex,
            Kind::Rotated => GenKind::Rotated,
            Kind::Rank2sep => GenKind::Rank2sep,
            Kind::Matchingslack => GenKind::Matchingslack,
            Kind::Lowerbound => GenKind::Lowerbound,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Planner {
    Elliptical,
    Simplex,
    Realworld,
}

impl From<Planner> for PlannerKind {
    fn from(p: Planner) -> Self {
        match p {
            Planner::Elliptical => PlannerKind::Elliptical,
            Planner::Simplex => PlannerKind::Simplex,
            Planner::Realworld => PlannerKind::Realworld,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Lemma {
    #[value(name = "B1", alias = "b1")]
    B1,
    #[value(name = "C2", alias = "c2")]
    C2,
    #[value(name = "F1", alias = "f1")]
    F1,
    #[value(name = "L1", alias = "l1")]
    L1,
    #[value(name = "propA2", alias = "propa2")]
    PropA2,
}

impl Lemma {
    pub fn name(self) -> &'static str {
        match self {
            Lemma::B1 => "B1",
            Lemma::C2 => "C2",
            Lemma::F1 => "F1",
            Lemma::L1 => "L1",
            Lemma::PropA2 => "propA2",
        }
    }
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long, value_enum)]
    pub kind: Kind,
    /// Number of states.
    #[arg(long = "N", default_value_t = 20)]
    pub n_states: usize,
    /// Number of actions.
    #[arg(long = "K", default_value_t = 2)]
    pub n_actions: usize,
    /// Latent dimension (alias --Z).
    #[arg(long = "d", visible_alias = "Z", default_value_t = 3)]
    pub dim: usize,
    /// Horizon.
    #[arg(long = "H", default_value_t = 3)]
    pub horizon: usize,
    /// Target reachability floor, in [0, 1/d].
    #[arg(long, default_value_t = 0.2)]
    pub eta: f64,
    /// Size of the rank2sep and lowerbound constructions.
    #[arg(long = "M", default_value_t = 3)]
    pub m: usize,
    /// Vertex count of the matchingslack construction (4 or 6).
    #[arg(long = "n", default_value_t = 4)]
    pub n_match: usize,
    /// Also write family.json with this many phi and mu candidates.
    #[arg(long)]
    pub family_size: Option<usize>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Environment model JSON.
    #[arg(long)]
    pub env: PathBuf,
    /// Hypothesis family JSON; generated from the environment when absent.
    #[arg(long)]
    pub family: Option<PathBuf>,
    /// Candidates per side of a generated family.
    #[arg(long, default_value_t = 10)]
    pub family_size: usize,
    #[arg(long, value_enum, default_value_t = Planner::Elliptical)]
    pub planner: Planner,
    /// Elliptical planner threshold; defaults to eta_min^2/(9d) when the
    /// environment carries latents.
    #[arg(long)]
    pub beta: Option<f64>,
    /// Transitions per level for the likelihood fit.
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    /// Episodes per FQI regression for the realworld planner.
    #[arg(long, default_value_t = 200)]
    pub fqi_n: usize,
    /// Comma-separated seeds run in parallel; defaults to --seed.
    #[arg(long, value_delimiter = ',')]
    pub seeds: Vec<u64>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub env: PathBuf,
    /// run.json written by `run`.
    #[arg(long)]
    pub run: PathBuf,
    /// Random policies for the average-case sys-id column.
    #[arg(long, default_value_t = 100)]
    pub random: usize,
    /// Failure probability for the theory constants.
    #[arg(long, default_value_t = 0.1)]
    pub delta: f64,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    #[arg(long, value_enum)]
    pub lemma: Lemma,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    /// Environment for B1, L1, C2 and propA2; random environments when absent.
    #[arg(long)]
    pub env: Option<PathBuf>,
    /// Learned model for B1 and L1: a model JSON or a run.json. Defaults to the environment.
    #[arg(long)]
    pub learned: Option<PathBuf>,
    /// Planner threshold for C2.
    #[arg(long, default_value_t = 0.05)]
    pub beta: f64,
    /// Matrix dimension for F1.
    #[arg(long, default_value_t = 10)]
    pub dim: usize,
    /// Sequence length for F1.
    #[arg(long, default_value_t = 1000)]
    pub steps: usize,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long = "N", default_value_t = 20)]
    pub n_states: usize,
    #[arg(long = "d", default_value_t = 3)]
    pub dim: usize,
    #[arg(long = "H", default_value_t = 3)]
    pub horizon: usize,
    #[arg(long, default_value_t = 5)]
    pub reps: usize,
}
