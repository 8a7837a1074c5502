use lowrank_core::envgen::{gen_block_mdp, gen_hypothesis_family, gen_simplex_mdp, GenKind, GenSpec, HypothesisFamily};
use lowrank_core::mdp::{FeatureTable, LowRankMDP, Policy};
use lowrank_core::oracles::*;
use lowrank_core::rng::seeded_rng;
use lowrank_core::Error;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn table(rows: Vec<Vec<f64>>) -> FeatureTable {
    FeatureTable::from_rows(rows).unwrap()
}

/// Per-triple log-likelihood with the pmf rebuilt from scratch for each triple.
fn brute_score(phi: &FeatureTable, mu: &FeatureTable, k: usize, data: &[Transition]) -> f64 {
    let mut total = 0.0;
    for t in data {
        let f = phi.row(t.x * k + t.a);
        let raw: Vec<f64> = mu.iter_rows().map(|m| f.iter().zip(m).map(|(a, b)| a * b).sum::<f64>().max(0.0)).collect();
        let mass: f64 = raw.iter().sum();
        if mass < 1e-6 || raw[t.xp] / mass <= 1e-12 {
            return f64::NEG_INFINITY;
        }
        total += (raw[t.xp] / mass).ln();
    }
    total
}

fn small_setup(seed: u64) -> (LowRankMDP, HypothesisFamily) {
    let spec = GenSpec::latent(GenKind::Simplex, 5, 2, 2, 2, 0.05);
    let (m, _) = gen_simplex_mdp(&spec, &mut seeded_rng(seed)).unwrap();
    let fam = gen_hypothesis_family(&m, 4, 4, &mut seeded_rng(seed + 1000)).unwrap();
    (m, fam)
}

#[test]
fn singleton_family_returns_its_pair() {
    let (m, _) = small_setup(0);
    let fam = HypothesisFamily::new(5, 2, vec![m.level(0).phi_table().clone()], vec![m.level(0).mu_table().clone()]).unwrap();
    let data = collect_level(&m, &Policy::uniform(), 0, 50, &mut seeded_rng(1)).unwrap();
    let fit = mle(&fam, &data).unwrap();
    assert_eq!((fit.phi_index, fit.mu_index), (0, 0));
}

#[test]
fn zero_probability_candidates_are_eliminated() {
    let phi = table(vec![vec![1.0], vec![1.0]]);
    let truth = table(vec![vec![0.5], vec![0.5]]);
    let decoy = table(vec![vec![1.0], vec![0.0]]);
    let fam = HypothesisFamily::new(2, 1, vec![phi.clone()], vec![decoy.clone(), truth]).unwrap();
    let data = vec![Transition { x: 0, a: 0, xp: 0 }, Transition { x: 0, a: 0, xp: 0 }, Transition { x: 0, a: 0, xp: 1 }];
    assert_eq!(log_likelihood(&fam, 0, 0, &data), f64::NEG_INFINITY);
    let fit = mle(&fam, &data).unwrap();
    assert_eq!(fit.mu_index, 1);
    assert!((fit.log_likelihood - 3.0 * 0.5f64.ln()).abs() < 1e-12);

    let only_decoy = HypothesisFamily::new(2, 1, vec![phi], vec![decoy]).unwrap();
    assert!(matches!(mle(&only_decoy, &data), Err(Error::AllCandidatesInfeasible)));
    assert!(matches!(mle(&only_decoy, &[]), Err(Error::InsufficientData { .. })));
}

#[test]
fn ties_pick_the_lowest_pair() {
    let phi = table(vec![vec![1.0], vec![1.0]]);
    let mu = table(vec![vec![0.5], vec![0.5]]);
    let fam = HypothesisFamily::new(2, 1, vec![phi.clone(), phi], vec![mu.clone(), mu]).unwrap();
    let fit = mle(&fam, &[Transition { x: 0, a: 0, xp: 1 }]).unwrap();
    assert_eq!((fit.phi_index, fit.mu_index), (0, 0));
}

#[test]
fn mle_matches_brute_force_score_tables() {
    let mut rng = seeded_rng(77);
    for round in 0..20 {
        let (m, fam) = small_setup(round);
        let h = rng.random_range(0..2);
        let n = rng.random_range(5..400);
        let data = collect_level(&m, &Policy::uniform(), h, n, &mut rng).unwrap();
        let mut best = f64::NEG_INFINITY;
        for i in 0..fam.phis().len() {
            for j in 0..fam.mus().len() {
                best = best.max(brute_score(&fam.phis()[i], &fam.mus()[j], 2, &data));
            }
        }
        let fit = mle(&fam, &data).unwrap();
        assert!((fit.log_likelihood - best).abs() <= 1e-9 * best.abs().max(1.0), "round {round}");
        let own = brute_score(&fam.phis()[fit.phi_index], &fam.mus()[fit.mu_index], 2, &data);
        assert!((own - fit.log_likelihood).abs() <= 1e-9 * own.abs().max(1.0));
    }
}

#[test]
fn samp_of_the_truth_matches_the_environment() {
    let (m, _) = small_setup(3);
    let l = m.level(1);
    let mut rng = seeded_rng(4);
    let n = 100_000;
    for (s, a) in [(0, 0), (2, 1), (4, 1)] {
        let mut freq = [0.0; 5];
        for _ in 0..n {
            freq[samp(l.phi_table(), l.mu_table(), s, a, 2, &mut rng).unwrap()] += 1.0 / n as f64;
        }
        let pmf = m.transition_pmf(1, s, a).unwrap();
        for x in 0..5 {
            assert!((freq[x] - pmf[x]).abs() <= 0.01);
        }
    }
}

#[test]
fn samp_of_a_point_mass_is_constant() {
    let phi = table(vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
    let mu = table(vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]]);
    let mut rng = seeded_rng(5);
    for _ in 0..1000 {
        assert_eq!(samp(&phi, &mu, 0, 0, 2, &mut rng).unwrap(), 1);
    }
}

#[test]
fn samp_draws_are_uncorrelated() {
    let (m, _) = small_setup(6);
    let l = m.level(0);
    let mut rng = seeded_rng(7);
    let xs: Vec<f64> = (0..100_000).map(|_| samp(l.phi_table(), l.mu_table(), 0, 1, 2, &mut rng).unwrap() as f64).collect();
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    let var: f64 = xs.iter().map(|x| (x - mean).powi(2)).sum();
    let cov: f64 = xs.windows(2).map(|w| (w[0] - mean) * (w[1] - mean)).sum();
    assert!((cov / var).abs() <= 0.02, "r = {}", cov / var);
}

#[test]
fn samp_passes_chi_square_on_clipped_rows() {
    let mut rng = seeded_rng(8);
    let n_states = 6;
    let draws = 100_000;
    let mut tested = 0;
    while tested < 20 {
        let phi = table(vec![(0..3).map(|_| rng.random_range(-0.3..1.0)).collect()]);
        let mu = table((0..n_states).map(|_| (0..3).map(|_| rng.random_range(-0.3..1.0)).collect()).collect());
        let raw: Vec<f64> = mu.iter_rows().map(|m| phi.row(0).iter().zip(m).map(|(a, b)| a * b).sum::<f64>().max(0.0)).collect();
        let mass: f64 = raw.iter().sum();
        if mass < 1e-3 {
            continue;
        }
        let pmf: Vec<f64> = raw.iter().map(|v| v / mass).collect();
        let mut counts = vec![0.0; n_states];
        for _ in 0..draws {
            counts[samp(&phi, &mu, 0, 0, 1, &mut rng).unwrap()] += 1.0;
        }
        let mut stat = 0.0;
        let mut cells = 0;
        for (c, p) in counts.iter().zip(&pmf) {
            if *p > 0.0 {
                let e = p * draws as f64;
                stat += (c - e).powi(2) / e;
                cells += 1;
            } else {
                assert_eq!(*c, 0.0);
            }
        }
        if cells >= 2 {
            let pval = 1.0 - ChiSquared::new((cells - 1) as f64).unwrap().cdf(stat);
            assert!(pval > 0.001, "row {tested}: p = {pval}");
        }
        tested += 1;
    }
}

#[test]
fn rate_bound_formula() {
    assert!((rate_bound(64, 0.05, 1000) - 0.01431).abs() < 5e-6);
    assert!((rate_bound(64, 0.05, 1000) - 2.0 * 1280f64.ln() / 1000.0).abs() < 1e-15);
}

#[test]
fn mle_is_consistent_at_large_n() {
    let spec = GenSpec::latent(GenKind::Block, 6, 2, 2, 2, 0.1);
    let (m, _) = gen_block_mdp(&spec, &mut seeded_rng(9)).unwrap();
    let fam = gen_hypothesis_family(&m, 4, 4, &mut seeded_rng(10)).unwrap();
    let report = mle_rate_experiment(&m, &fam, 1, 100_000, 2, 0.1, &Policy::uniform(), 11).unwrap();
    for row in &report.rows {
        assert!(row.tv_sq <= 1e-3, "{row:?}");
    }
}

#[test]
fn rate_experiment_fraction_within_bound() {
    let spec = GenSpec::latent(GenKind::Block, 10, 2, 3, 2, 0.1);
    let (m, _) = gen_block_mdp(&spec, &mut seeded_rng(12)).unwrap();
    let fam = gen_hypothesis_family(&m, 6, 6, &mut seeded_rng(13)).unwrap();
    let delta = 0.1;
    let report = mle_rate_experiment(&m, &fam, 1, 300, 200, delta, &Policy::uniform(), 14).unwrap();
    assert_eq!(report.rows.len(), 200);
    assert!(report.fraction_within >= 1.0 - delta - 0.05, "{}", report.fraction_within);
    let again = mle_rate_experiment(&m, &fam, 1, 300, 200, delta, &Policy::uniform(), 14).unwrap();
    assert_eq!(report, again);
}

#[test]
fn dataset_bookkeeping() {
    let (m, _) = small_setup(15);
    let mut ds = TransitionDataset::with_horizon(2);
    ds.levels[1] = collect_level(&m, &Policy::uniform(), 1, 1000, &mut seeded_rng(16)).unwrap();
    assert_eq!(ds.total(), 1000);
    ds.validate(5, 2).unwrap();
    let occ = ds.empirical_occupancy(1, 5, 2);
    assert!((occ.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    ds.levels[0].push(Transition { x: 9, a: 0, xp: 0 });
    assert!(ds.validate(5, 2).is_err());
    assert!(collect_level(&m, &Policy::uniform(), 2, 10, &mut seeded_rng(0)).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn mle_ignores_data_order(seed in any::<u64>(), n in 1usize..200) {
        let (m, fam) = small_setup(seed % 50);
        let mut rng = seeded_rng(seed);
        let mut data = collect_level(&m, &Policy::uniform(), 1, n, &mut rng).unwrap();
        let a = mle(&fam, &data).unwrap();
        data.shuffle(&mut rng);
        let b = mle(&fam, &data).unwrap();
        prop_assert_eq!((a.phi_index, a.mu_index), (b.phi_index, b.mu_index));
        prop_assert!((a.log_likelihood - b.log_likelihood).abs() < 1e-9);
    }

    #[test]
    fn mle_dominates_the_truth(seed in any::<u64>(), n in 1usize..300) {
        let (m, fam) = small_setup(seed % 50);
        let truth = fam.check_realizable(&m).unwrap();
        let data = collect_level(&m, &Policy::uniform(), 0, n, &mut seeded_rng(seed)).unwrap();
        let fit = mle(&fam, &data).unwrap();
        let (ti, tj) = truth[0];
        let ll_truth = log_likelihood(&fam, ti, tj, &data);
        prop_assert!(fit.log_likelihood >= ll_truth);
        if (fit.phi_index, fit.mu_index) != (ti, tj) && fit.log_likelihood == ll_truth {
            prop_assert!((fit.phi_index, fit.mu_index) < (ti, tj));
        }
    }
}
