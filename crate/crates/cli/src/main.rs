mod args;
mod bench;
mod check;
mod config;
mod error;
mod gen;
mod run;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::Parser;
use lowrank_core::io::load_model;
use lowrank_core::LowRankMDP;

use args::{Cli, Command};
use error::{exit_code, usage};

pub(crate) fn out_file(dir: &Path, name: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir.join(name))
}

pub(crate) fn read_env(path: &Path) -> Result<LowRankMDP> {
    load_model(path).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn dispatch(cli: Cli) -> Result<()> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(usage("--threads must be positive"));
        }
        rayon::ThreadPoolBuilder::new().num_threads(t).build_global().context("starting worker pool")?;
    }
    match &cli.command {
        Command::Gen(a) => gen::cmd_gen(cli.seed, &cli.out, a),
        Command::Run(a) => run::cmd_run(cli.seed, &cli.out, a),
        Command::Eval(a) => run::cmd_eval(cli.seed, &cli.out, a),
        Command::Check(a) => check::cmd_check(cli.seed, &cli.out, a),
        Command::Bench(a) => bench::cmd_bench(cli.seed, &cli.out, a),
    }
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args_os().map(|a| a.to_string_lossy().into_owned()).collect();
    let argv = match config::merged_args(argv) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
