use obmc_core::risk::excess_risk_forms;
use obmc_core::rng::Philox;
use obmc_core::{
    bayes_classifier, estimation_error, exact_risk, excess_risk, generate_truth, monte_carlo_risk,
    risk_report, Generator, Matrix, Shape, SignMatrix, TruthMatrix,
};
use proptest::prelude::*;

fn link(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn random_truth(m1: usize, m2: usize, scale: f64, seed: u64) -> TruthMatrix {
    let mut g = Philox::new(seed);
    let entries = Matrix::from_fn(m1, m2, |_, _| scale * g.normal());
    TruthMatrix {
        margin_tau: entries.iter().fold(f64::INFINITY, |m, v| m.min(v.abs())),
        gamma: entries.amax(),
        rank_budget: m1.min(m2),
        entries,
        generator: Generator::GaussianFactor,
        seed,
    }
}

/// Risk of a sign matrix entry by entry, from the model definition.
fn naive_risk(eta: &SignMatrix, truth: &TruthMatrix) -> f64 {
    let (m1, m2) = truth.entries.shape();
    let mut total = 0.0;
    for i in 0..m1 {
        for j in 0..m2 {
            let p = link(truth.entries[(i, j)]);
            total += if eta.get(i, j) == 1 { 1.0 - p } else { p };
        }
    }
    total / (m1 * m2) as f64
}

#[test]
fn bayes_risk_is_the_min_formula() {
    for seed in 0..20 {
        let t = random_truth(7, 9, 2.0, seed);
        let bayes = bayes_classifier(&t.entries).unwrap();
        let direct: f64 = t
            .entries
            .iter()
            .map(|&x| link(x).min(1.0 - link(x)))
            .sum::<f64>()
            / 63.0;
        assert!((exact_risk(&bayes, &t).unwrap() - direct).abs() <= 1e-14);
    }
}

#[test]
fn exact_risk_matches_entrywise_definition() {
    let mut g = Philox::new(5);
    for seed in 0..20 {
        let t = random_truth(6, 5, 1.5, seed);
        let eta = SignMatrix::random(t.shape(), &mut g);
        assert!((exact_risk(&eta, &t).unwrap() - naive_risk(&eta, &t)).abs() <= 1e-14);
    }
}

#[test]
fn excess_forms_agree() {
    let mut g = Philox::new(11);
    for seed in 0..100 {
        let t = random_truth(8, 7, 2.0, 1000 + seed);
        let eta = SignMatrix::random(t.shape(), &mut g);
        let (difference, mismatch) = excess_risk_forms(&eta, &t).unwrap();
        assert!((difference - mismatch).abs() <= 1e-12);
        let bayes = bayes_classifier(&t.entries).unwrap();
        let oracle = naive_risk(&eta, &t) - naive_risk(&bayes, &t);
        assert!((mismatch - oracle).abs() <= 1e-12);
        assert_eq!(excess_risk(&eta, &t).unwrap(), mismatch);
    }
}

#[test]
fn monte_carlo_within_binomial_band() {
    let trials = 100_000;
    let mut inside = 0;
    let mut g = Philox::new(77);
    for seed in 0..100 {
        let t = random_truth(10, 10, 1.0, 2000 + seed);
        let eta = SignMatrix::random(t.shape(), &mut g);
        let p = exact_risk(&eta, &t).unwrap();
        let estimate = monte_carlo_risk(&eta, &t, trials, seed).unwrap();
        let band = 3.0 * (p * (1.0 - p) / trials as f64).sqrt();
        if (estimate - p).abs() <= band {
            inside += 1;
        }
    }
    assert!(inside >= 99, "{inside} of 100 inside the band");
}

#[test]
fn bayes_beats_random_classifiers() {
    for seed in 0..3 {
        let t = random_truth(12, 10, 1.0, 3000 + seed);
        let bayes = exact_risk(&bayes_classifier(&t.entries).unwrap(), &t).unwrap();
        let mut g = Philox::new(seed);
        for _ in 0..1000 {
            let eta = SignMatrix::random(t.shape(), &mut g);
            assert!(bayes <= exact_risk(&eta, &t).unwrap());
            assert!(excess_risk(&eta, &t).unwrap() >= 0.0);
        }
    }
}

#[test]
fn single_flip_costs_the_margin_gap() {
    let gamma = 1.5;
    let (m1, m2) = (12, 10);
    let t = generate_truth(
        Shape::new(m1, m2).unwrap(),
        2,
        gamma,
        Generator::BlockSign,
        4,
    )
    .unwrap();
    let gap = (2.0 * link(t.margin_tau) - 1.0) / (m1 * m2) as f64;
    for (i, j) in [(0, 0), (5, 3), (11, 9)] {
        let mut eta = bayes_classifier(&t.entries).unwrap();
        eta.set(i, j, -eta.get(i, j));
        let excess = excess_risk(&eta, &t).unwrap();
        assert!((excess - gap).abs() <= 1e-15, "{excess} vs {gap}");
    }
}

#[test]
fn classifier_scale_invariance() {
    let t = random_truth(9, 8, 1.0, 8);
    let mut g = Philox::new(9);
    let xhat = Matrix::from_fn(9, 8, |_, _| g.normal());
    let base = excess_risk(&bayes_classifier(&xhat).unwrap(), &t).unwrap();
    for c in [1e-8, 0.3, 1.0, 7.0, 1e6] {
        let scaled = excess_risk(&bayes_classifier(&(&xhat * c)).unwrap(), &t).unwrap();
        assert_eq!(scaled, base);
    }
}

#[test]
fn estimation_error_matches_double_loop() {
    let t = random_truth(7, 11, 1.0, 12);
    let mut g = Philox::new(13);
    let xhat = Matrix::from_fn(7, 11, |_, _| g.normal());
    let mut total = 0.0;
    for i in 0..7 {
        for j in 0..11 {
            total += (xhat[(i, j)] - t.entries[(i, j)]).powi(2);
        }
    }
    assert!((estimation_error(&xhat, &t).unwrap() - total / 77.0).abs() <= 1e-12);
}

proptest! {
    #[test]
    fn report_invariants(seed in any::<u64>(), scale in 0.01f64..5.0) {
        let t = random_truth(6, 4, scale, seed);
        let mut g = Philox::new(seed ^ 0xabc);
        let xhat = Matrix::from_fn(6, 4, |_, _| g.normal());
        let r = risk_report(&xhat, &t).unwrap();
        prop_assert!(r.excess >= 0.0);
        prop_assert!((r.excess - (r.risk - r.bayes_risk)).abs() <= 1e-12);
        prop_assert!(r.bayes_risk >= -1e-12 && r.bayes_risk <= r.risk + 1e-12 && r.risk <= 1.0 + 1e-12);
        prop_assert!(r.frob_error_sq_normalized >= 0.0);
    }
}
