use std::path::Path;

use anyhow::Result;
use lowrank_core::envgen::{compute_reachability, gen_hypothesis_family, generate, validity_report, GenSpec};
use lowrank_core::io::{save_model, write_json, SCHEMA_VERSION};
use lowrank_core::mdp::LevelReport;
use lowrank_core::rng::stream;
use serde::Serialize;

use crate::args::GenArgs;
use crate::error::usage;
use crate::out_file;

#[derive(Serialize)]
struct Meta {
    schema_version: u32,
    seed: u64,
    spec: GenSpec,
    /// Absent when the model has no latent representation.
    eta_min: Option<f64>,
    norm_exempt: bool,
    validity: Vec<LevelReport>,
}

pub fn cmd_gen(seed: u64, out: &Path, a: &GenArgs) -> Result<()> {
    let spec = GenSpec {
        kind: a.kind.into(),
        n_states: a.n_states,
        n_actions: a.n_actions,
        dim: a.dim,
        horizon: a.horizon,
        eta_target: a.eta,
        m: a.m,
        n_match: a.n_match,
    };
    spec.check().map_err(|e| usage(e.to_string()))?;
    let g = generate(&spec, &mut stream(seed, "gen"))?;
    let eta_min = match &g.latents {
        Some(reps) => Some(compute_reachability(&g.model, reps)?.eta_min),
        None => None,
    };
    let validity = validity_report(&g.model, &mut stream(seed, "gen/validity"));
    save_model(&out_file(out, "model.json")?, &g.model)?;
    let meta = Meta { schema_version: SCHEMA_VERSION, seed, spec, eta_min, norm_exempt: g.norm_exempt, validity };
    write_json(&out_file(out, "meta.json")?, &meta)?;
    if let Some(size) = a.family_size {
        let family = gen_hypothesis_family(&g.model, size, size, &mut stream(seed, "gen/family"))?;
        write_json(&out_file(out, "family.json")?, &family)?;
    }
    Ok(())
}
