use lowrank_core::envgen::{gen_block_mdp, GenKind, GenSpec};
use lowrank_core::io::*;
use lowrank_core::mdp::{rollout_with_latents, Policy};
use lowrank_core::oracles::{collect_level, RateRow, TransitionDataset};
use lowrank_core::planners::{elliptical_planner, TraceRow};
use lowrank_core::rng::seeded_rng;
use lowrank_core::LowRankMDP;

fn env() -> LowRankMDP {
    let spec = GenSpec::latent(GenKind::Block, 6, 2, 2, 3, 0.1);
    let (m, reps) = gen_block_mdp(&spec, &mut seeded_rng(1)).unwrap();
    m.with_latents(reps).unwrap()
}

#[test]
fn model_round_trip_keeps_latents() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("nested/model.json");
    let m = env();
    save_model(&path, &m).unwrap();
    let back = load_model(&path).unwrap();
    assert_eq!(back.max_transition_diff(&m), 0.0);
    assert!(back.has_latents());
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.ends_with("}\n"));
    let doc: serde_json::Value = serde_json::from_str(&text).unwrap();
    for key in ["H", "N", "K", "d", "levels", "latent"] {
        assert!(doc.get(key).is_some(), "missing {key}");
    }
    assert!(!dir.path().join("nested/model.json.tmp").exists());
}

#[test]
fn hand_written_model_loads() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.json");
    std::fs::write(&path, r#"{"H":1,"N":2,"K":1,"d":1,"levels":[{"phi":[[1.0],[1.0]],"mu":[[0.25],[0.75]]}]}"#).unwrap();
    let m = load_model(&path).unwrap();
    assert_eq!(m.transition_pmf(0, 1, 0).unwrap(), &[0.25, 0.75]);
    std::fs::write(&path, r#"{"H":1,"N":2,"K":1,"d":1,"levels":[{"phi":[[1.0],[1.0]],"mu":[[0.0],[0.0]]}]}"#).unwrap();
    assert!(load_model(&path).is_err());
}

#[test]
fn trajectories_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("traj.jsonl");
    let m = env();
    let mut rng = seeded_rng(2);
    let trajs: Vec<_> = (0..20)
        .map(|_| rollout_with_latents(&m, &Policy::uniform(), m.latents().unwrap(), &mut rng).unwrap())
        .collect();
    write_trajectories(&path, &trajs).unwrap();
    assert_eq!(std::fs::read_to_string(&path).unwrap().lines().count(), 20);
    assert_eq!(read_trajectories(&path).unwrap(), trajs);
}

#[test]
fn dataset_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("data.jsonl");
    let m = env();
    let mut rng = seeded_rng(3);
    let mut ds = TransitionDataset::with_horizon(3);
    for h in [0, 2] {
        ds.levels[h] = collect_level(&m, &Policy::uniform(), h, 50, &mut rng).unwrap();
    }
    write_dataset(&path, &ds).unwrap();
    let first: serde_json::Value = serde_json::from_str(std::fs::read_to_string(&path).unwrap().lines().next().unwrap()).unwrap();
    for key in ["h", "x", "a", "xp"] {
        assert!(first.get(key).is_some());
    }
    assert_eq!(read_dataset(&path, Some(3)).unwrap(), ds);
    assert_eq!(read_dataset(&path, None).unwrap(), ds);
    assert!(read_dataset(&path, Some(2)).is_err());
}

#[test]
fn csv_reports_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("rate.csv");
    let rows = vec![
        RateRow { trial: 0, n: 100, tv_sq: 0.01, bound: 0.1, within: true },
        RateRow { trial: 1, n: 100, tv_sq: 0.2, bound: 0.1, within: false },
    ];
    write_csv(&path, "rate", &rows).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), format!("# lowrank rate v{SCHEMA_VERSION}"));
    assert_eq!(lines.next().unwrap(), "trial,n,tv_sq,bound,within");
    assert_eq!(read_csv::<RateRow>(&path).unwrap(), rows);

    let out = elliptical_planner(&env(), 0.2).unwrap();
    let trace_path = dir.path().join("trace.csv");
    write_csv(&trace_path, "trace", &out.trace).unwrap();
    assert_eq!(read_csv::<TraceRow>(&trace_path).unwrap(), out.trace);
    assert!(std::fs::read_to_string(&trace_path).unwrap().contains("t,objective,trace_term,bound"));
}
