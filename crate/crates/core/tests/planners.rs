mod common;

use common::*;
use lowrank_core::envgen::{gen_rotated_lowrank, gen_simplex_mdp, GenKind, GenSpec};
use lowrank_core::linalg::{spd_inverse, symmetric_eigenvalues};
use lowrank_core::mdp::{occupancy, policy_value, best_policy_for_reward, FactoredLevel, FeatureTable, LowRankMDP, Policy, Reward};
use lowrank_core::planners::*;
use lowrank_core::rng::seeded_rng;
use lowrank_core::Error;
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::Rng;

fn level(n: usize, k: usize, phi: Vec<Vec<f64>>, mu: Vec<Vec<f64>>) -> FactoredLevel {
    FactoredLevel::new(n, k, FeatureTable::from_rows(phi).unwrap(), FeatureTable::from_rows(mu).unwrap()).unwrap()
}

fn simplex_env(n: usize, k: usize, z: usize, h: usize, seed: u64) -> LowRankMDP {
    let spec = GenSpec::latent(GenKind::Simplex, n, k, z, h, 0.0);
    gen_simplex_mdp(&spec, &mut seeded_rng(seed)).unwrap().0
}

/// Last-level feature covariance of a deterministic policy by tree expansion.
fn tree_cov(model: &LowRankMDP, acts: &[Vec<usize>]) -> DMatrix<f64> {
    let last = model.horizon() - 1;
    let dist = tree_state_dist(model, acts, last);
    let d = model.dim();
    let mut c = DMatrix::zeros(d, d);
    for (s, p) in dist.iter().enumerate() {
        let f = model.level(last).phi(s, acts[last][s]);
        for i in 0..d {
            for j in 0..d {
                c[(i, j)] += p * f[i] * f[j];
            }
        }
    }
    c
}

/// `max_pi E[phi^T A phi]` by enumerating deterministic policies.
fn brute_quad(model: &LowRankMDP, a: &DMatrix<f64>) -> f64 {
    all_action_tables(model.n_states(), model.n_actions(), model.horizon())
        .iter()
        .map(|acts| (tree_cov(model, acts) * a).trace())
        .fold(f64::NEG_INFINITY, f64::max)
}

/// `E_rho phi[i]` at the last level.
fn expected_coordinate(model: &LowRankMDP, rho: &Policy, i: usize) -> f64 {
    let last = model.horizon() - 1;
    let occ = occupancy(model, rho, last).unwrap();
    let k = model.n_actions();
    occ.iter().enumerate().map(|(r, w)| w * model.level(last).phi(r / k, r % k)[i]).sum()
}

fn brute_coordinate(model: &LowRankMDP, i: usize) -> f64 {
    let last = model.horizon() - 1;
    all_action_tables(model.n_states(), model.n_actions(), model.horizon())
        .iter()
        .map(|acts| {
            let dist = tree_state_dist(model, acts, last);
            dist.iter().enumerate().map(|(s, p)| p * model.level(last).phi(s, acts[last][s])[i]).sum::<f64>()
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Level `h >= 1` policies from the simplex planner on the true prefix.
fn simplex_rhos(env: &LowRankMDP) -> Vec<Policy> {
    let mut rhos = vec![Policy::uniform()];
    for h in 1..env.horizon() {
        rhos.push(simplex_planner(&env.prefix(h).unwrap()).unwrap().policy.then_uniform(h));
    }
    rhos
}

#[test]
fn iteration_cap_formula() {
    let cap = elliptical_cap(2, 0.1);
    assert!((cap - 297.1).abs() < 0.05, "{cap}");
    assert_eq!(cap.floor() as usize, 297);
}

#[test]
fn single_state_constant_feature_halts_after_one_policy() {
    let m = LowRankMDP::new(vec![level(1, 1, vec![vec![1.0]], vec![vec![1.0]])], 0).unwrap();
    let out = elliptical_planner(&m, 0.5).unwrap();
    assert_eq!(out.iterations, 1);
    assert!(!out.degenerate);
    assert!((out.sigma[(0, 0)] - 2.0).abs() < 1e-15);
    assert_eq!(out.trace.len(), 1);
    assert!((out.trace[0].objective - 1.0).abs() < 1e-15);
}

#[test]
fn quadratic_objective_matches_enumeration() {
    let mut rng = seeded_rng(1);
    for _ in 0..10 {
        let m = small_model(3, 2, 2, 3, &mut rng);
        let b = DMatrix::<f64>::from_fn(3, 3, |_, _| rng.random_range(-1.0..1.0));
        let a = &b * b.transpose() + DMatrix::identity(3, 3) * 0.1;
        let (v, _) = max_quadratic_objective(&m, &a).unwrap();
        let brute = brute_quad(&m, &a);
        assert!((v - brute).abs() < 1e-9 * brute.max(1.0), "{v} vs {brute}");
    }
}

#[test]
fn elliptical_post_condition_holds() {
    let mut rng = seeded_rng(2);
    for beta in [0.05, 0.1, 0.3] {
        for _ in 0..4 {
            let m = small_model(3, 2, 2, 3, &mut rng);
            let out = elliptical_planner(&m, beta).unwrap();
            assert!(!out.degenerate);
            assert!(out.iterations as f64 <= out.cap);
            let (value, bound) = post_condition(&m, &out, beta).unwrap();
            assert!(value <= bound + 1e-9, "{value} > {bound}");
            let t = out.iterations as f64;
            let inv = spd_inverse(&(&out.sigma_rho + DMatrix::identity(3, 3) / t)).unwrap();
            assert!((brute_quad(&m, &inv) - value).abs() < 1e-9 * value.max(1.0));
        }
    }
}

#[test]
fn accumulator_matches_tree_covariances_and_stays_definite() {
    let mut rng = seeded_rng(3);
    let m = small_model(3, 2, 2, 3, &mut rng);
    let out = elliptical_planner(&m, 0.1).unwrap();
    let mut sigma = DMatrix::<f64>::identity(3, 3);
    let mut cumulative = 0.0;
    for (pi, row) in out.components.iter().zip(&out.trace) {
        let cov = tree_cov(&m, &pi.greedy_actions());
        cumulative += (&cov * spd_inverse(&sigma).unwrap()).trace();
        sigma += cov;
        assert!(symmetric_eigenvalues(&sigma)[0] >= 1.0 - 1e-9);
        assert!((row.trace_term - cumulative).abs() < 1e-9);
        assert!(row.trace_term <= row.bound + 1e-12);
    }
    assert!((&sigma - &out.sigma).abs().max() < 1e-9);
    assert!((&out.sigma - out.sigma.transpose()).abs().max() == 0.0);
    assert!(out.min_sigma_eigenvalue >= 1.0 - 1e-9);
    let t = out.iterations as f64;
    assert!(((&sigma - DMatrix::identity(3, 3)) / t - &out.sigma_rho).abs().max() < 1e-9);
}

#[test]
fn rotated_features_run_the_elliptical_planner() {
    let spec = GenSpec::latent(GenKind::Rotated, 5, 2, 3, 2, 0.0);
    let m = gen_rotated_lowrank(&spec, &mut seeded_rng(4)).unwrap();
    let out = elliptical_planner(&m, 0.1).unwrap();
    let (value, bound) = post_condition(&m, &out, 0.1).unwrap();
    assert!(value <= bound + 1e-9);
    for row in &out.trace {
        assert!(row.trace_term <= row.bound + 1e-12);
    }
}

#[test]
fn huge_beta_is_degenerate() {
    let m = simplex_env(4, 2, 2, 2, 5);
    for out in [elliptical_planner(&m, 2.0).unwrap(), sampled_elliptical_planner(&m, 2.0, 100, &mut seeded_rng(0)).unwrap()] {
        assert!(out.degenerate);
        assert_eq!(out.iterations, 0);
        assert!(out.components.is_empty());
        assert_eq!(out.policy, Policy::uniform());
    }
    let out = elliptical_planner(&m, 2.0).unwrap();
    assert!(post_condition(&m, &out, 2.0).is_err());
    assert!(matches!(elliptical_planner(&m, 0.0), Err(Error::InvalidArgument(_))));
}

#[test]
fn sampled_planner_agrees_with_exact_at_large_n() {
    let m = simplex_env(4, 2, 2, 2, 6);
    let exact = elliptical_planner(&m, 0.2).unwrap();
    let sampled = sampled_elliptical_planner(&m, 0.2, 100_000, &mut seeded_rng(7)).unwrap();
    assert_eq!(sampled.iterations, exact.iterations);
    for (a, b) in sampled.components.iter().zip(&exact.components) {
        assert_eq!(a.greedy_actions(), b.greedy_actions());
    }
    assert!(sampled.sigma_gap.unwrap() < 0.05);
    assert!(sampled.iterations as f64 <= SAMPLED_CAP_FACTOR * elliptical_cap(2, 0.2));
}

#[test]
fn sampled_gap_shrinks_with_more_rollouts() {
    let m = simplex_env(4, 2, 2, 2, 8);
    let median = |n_est: usize| {
        let mut gaps: Vec<f64> = (0..20)
            .map(|s| {
                let out = sampled_elliptical_planner(&m, 0.2, n_est, &mut seeded_rng(100 + s)).unwrap();
                out.sigma_gap.unwrap() / out.iterations.max(1) as f64
            })
            .collect();
        gaps.sort_by(f64::total_cmp);
        (gaps[9] + gaps[10]) / 2.0
    };
    let (a, b, c) = (median(100), median(1000), median(10_000));
    assert!(a > b && b > c, "{a} {b} {c}");
}

#[test]
fn simplex_planner_on_a_bandit() {
    let phi = vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]];
    let m = LowRankMDP::new(vec![level(1, 3, phi, vec![vec![1.0, 1.0, 1.0]])], 0).unwrap();
    let out = simplex_planner(&m).unwrap();
    for (i, pi) in out.components.iter().enumerate() {
        assert_eq!(pi.greedy_actions(), vec![vec![i]]);
        assert!((expected_coordinate(&m, &out.policy, i) - 1.0 / 3.0).abs() < 1e-15);
    }
    assert_eq!(out.values, vec![1.0; 3]);
}

#[test]
fn simplex_planner_with_one_coordinate() {
    let m = simplex_env(4, 2, 1, 2, 9);
    let out = simplex_planner(&m).unwrap();
    assert_eq!(out.components.len(), 1);
    assert!((expected_coordinate(&m, &out.policy, 0) - out.values[0]).abs() < 1e-12);
}

#[test]
fn simplex_planner_rejects_signed_features() {
    let spec = GenSpec::latent(GenKind::Rotated, 5, 2, 3, 1, 0.0);
    let m = gen_rotated_lowrank(&spec, &mut seeded_rng(10)).unwrap();
    assert!(matches!(simplex_planner(&m), Err(Error::NotSimplex { .. })));
}

#[test]
fn simplex_guarantee_against_enumeration() {
    for seed in 0..10 {
        let z = 1 + seed as usize % 4;
        let m = simplex_env(3, 2, z, 2, 20 + seed);
        let out = simplex_planner(&m).unwrap();
        for i in 0..z {
            let best = brute_coordinate(&m, i);
            assert!((out.values[i] - best).abs() < 1e-12);
            assert!(best <= z as f64 * expected_coordinate(&m, &out.policy, i) + 1e-9);
        }
    }
}

#[test]
fn fqi_with_zero_reward() {
    let m = simplex_env(5, 2, 2, 3, 11);
    let phis: Vec<FeatureTable> = m.levels().iter().map(|l| l.phi_table().clone()).collect();
    let rhos = vec![Policy::uniform(); 3];
    let out = linear_fqi(&m, &rhos, &phis, &Reward::zeros(3, 5, 2), &FqiConfig::new(500), &mut seeded_rng(12)).unwrap();
    assert_eq!(out.value_estimate, 0.0);
    for t in &out.thetas {
        assert!(t.iter().all(|v| v.abs() < 1e-12));
    }
    assert_eq!(out.trajectories, 1500);
}

#[test]
fn fqi_on_a_bandit() {
    let m = simplex_env(6, 3, 2, 1, 13);
    let mut rng = seeded_rng(14);
    let table: Vec<f64> = (0..18).map(|_| rng.random()).collect();
    let reward = Reward::terminal(1, 6, 3, table).unwrap();
    let phis = vec![m.level(0).phi_table().clone()];
    let out = linear_fqi(&m, &[Policy::uniform()], &phis, &reward, &FqiConfig::new(10_000), &mut rng).unwrap();
    let (_, best) = best_policy_for_reward(&m, &reward).unwrap();
    let got = policy_value(&m, &Policy::Tabular(out.policy), &reward).unwrap();
    assert!(best - got <= 0.05, "{got} vs {best}");
}

#[test]
fn fqi_with_covering_exploration() {
    let m = simplex_env(10, 2, 3, 3, 15);
    let rhos = simplex_rhos(&m);
    let phis: Vec<FeatureTable> = m.levels().iter().map(|l| l.phi_table().clone()).collect();
    let mut rng = seeded_rng(16);
    let levels: Vec<Vec<f64>> = (0..3).map(|_| (0..20).map(|_| rng.random()).collect()).collect();
    let reward = Reward::from_levels(10, 2, levels).unwrap();
    let out = linear_fqi(&m, &rhos, &phis, &reward, &FqiConfig::new(10_000), &mut rng).unwrap();
    let (_, best) = best_policy_for_reward(&m, &reward).unwrap();
    let got = policy_value(&m, &Policy::Tabular(out.policy), &reward).unwrap();
    assert!(best - got <= 0.05, "{got} vs {best}");
}

#[test]
fn fqi_respects_the_parameter_radius() {
    let m = simplex_env(5, 2, 2, 2, 17);
    let phis: Vec<FeatureTable> = m.levels().iter().map(|l| l.phi_table().clone()).collect();
    let reward = Reward::from_levels(5, 2, vec![vec![1.0; 10], vec![1.0; 10]]).unwrap();
    let config = FqiConfig { n: 200, theta_bound: Some(0.1), clip_ceiling: None };
    let out = linear_fqi(&m, &[Policy::uniform(), Policy::uniform()], &phis, &reward, &config, &mut seeded_rng(18)).unwrap();
    for t in &out.thetas {
        assert!(t.iter().map(|v| v * v).sum::<f64>().sqrt() <= 0.1 + 1e-12);
    }
    assert!(matches!(
        linear_fqi(&m, &vec![Policy::uniform(); 2], &phis, &reward, &FqiConfig::new(0), &mut seeded_rng(0)),
        Err(Error::InsufficientData { .. })
    ));
}

#[test]
fn real_world_planner_with_one_coordinate() {
    let m = simplex_env(5, 2, 1, 2, 19);
    let phis: Vec<FeatureTable> = m.levels().iter().map(|l| l.phi_table().clone()).collect();
    let (_, comps, used) = real_world_planner(&m, &vec![Policy::uniform(); 2], &phis, &FqiConfig::new(300), &mut seeded_rng(0)).unwrap();
    assert_eq!(comps.len(), 1);
    assert_eq!(used, 600);
}

#[test]
fn real_world_planner_steers_on_a_deterministic_env() {
    let basis = |i: usize| if i == 0 { vec![1.0, 0.0] } else { vec![0.0, 1.0] };
    let l0 = level(2, 2, vec![basis(0), basis(1), basis(0), basis(1)], vec![basis(0), basis(1)]);
    let l1 = level(2, 2, vec![basis(0), basis(0), basis(1), basis(1)], vec![basis(0), basis(1)]);
    let m = LowRankMDP::new(vec![l0, l1], 0).unwrap();
    let phis: Vec<FeatureTable> = m.levels().iter().map(|l| l.phi_table().clone()).collect();
    let (_, comps, _) = real_world_planner(&m, &vec![Policy::uniform(); 2], &phis, &FqiConfig::new(2000), &mut seeded_rng(1)).unwrap();
    for (i, pi) in comps.iter().enumerate() {
        assert_eq!(pi.greedy_actions()[0][0], i);
        assert!((expected_coordinate(&m, &Policy::Tabular(pi.clone()), i) - 1.0).abs() < 1e-15);
    }
}

#[test]
fn real_world_mixture_covers_every_coordinate() {
    let m = simplex_env(10, 2, 3, 3, 21);
    let rhos = simplex_rhos(&m);
    let phis: Vec<FeatureTable> = m.levels().iter().map(|l| l.phi_table().clone()).collect();
    let (policy, _, _) = real_world_planner(&m, &rhos, &phis, &FqiConfig::new(10_000), &mut seeded_rng(22)).unwrap();
    let exact = simplex_planner(&m).unwrap();
    for i in 0..3 {
        let got = expected_coordinate(&m, &policy, i);
        assert!(got >= (exact.values[i] - 0.1) / 3.0, "coordinate {i}: {got} vs {}", exact.values[i]);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn elliptical_invariants(seed in any::<u64>(), beta in 0.05f64..0.5) {
        let m = small_model(3, 2, 2, 3, &mut seeded_rng(seed));
        let out = elliptical_planner(&m, beta).unwrap();
        prop_assert!(out.iterations as f64 <= out.cap);
        prop_assert!(out.min_sigma_eigenvalue >= 1.0 - 1e-9);
        for row in &out.trace {
            prop_assert!(row.trace_term <= row.bound + 1e-12);
        }
        if !out.degenerate {
            let (value, bound) = post_condition(&m, &out, beta).unwrap();
            prop_assert!(value <= bound + 1e-9);
        }
    }

    #[test]
    fn fqi_parameters_stay_in_the_ball(seed in any::<u64>(), n in 1usize..300) {
        let m = small_model(3, 2, 2, 2, &mut seeded_rng(seed));
        let phis: Vec<FeatureTable> = m.levels().iter().map(|l| l.phi_table().clone()).collect();
        let mut rng = seeded_rng(seed ^ 1);
        let levels: Vec<Vec<f64>> = (0..2).map(|_| (0..6).map(|_| rng.random()).collect()).collect();
        let reward = Reward::from_levels(3, 2, levels).unwrap();
        let out = linear_fqi(&m, &vec![Policy::uniform(); 2], &phis, &reward, &FqiConfig::new(n), &mut rng).unwrap();
        for t in &out.thetas {
            prop_assert!(t.iter().map(|v| v * v).sum::<f64>().sqrt() <= 2.0 * 2f64.sqrt() + 1e-9);
        }
    }
}
