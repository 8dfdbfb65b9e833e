use obmc_core::model::{generate_truth, neg_log_likelihood, nll_gradient, sample_observations};
use obmc_core::rng::Philox;
use obmc_core::spectral::svd;
use obmc_core::{logistic_link, Generator, Matrix, SampleSet, SamplingScheme, Shape};
use proptest::prelude::*;

fn random_problem(m1: usize, m2: usize, n: usize, seed: u64) -> (Matrix, SampleSet) {
    let mut g = Philox::new(seed);
    let x = Matrix::from_fn(m1, m2, |_, _| g.normal());
    let mut obs_idx = Vec::new();
    let mut labels = Vec::new();
    for _ in 0..n {
        obs_idx.push((g.below(m1 as u64) as usize, g.below(m2 as u64) as usize));
        labels.push(if g.next_f64() < 0.5 { 1 } else { -1 });
    }
    let s = SampleSet::new(
        Shape::new(m1, m2).unwrap(),
        obs_idx,
        labels,
        SamplingScheme::IidUniform,
        seed,
    )
    .unwrap();
    (x, s)
}

/// Neumaier-compensated sum of `-ln f(y x)` with the link written out directly.
fn naive_nll(x: &Matrix, s: &SampleSet) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for (w, y) in s.iter() {
        let v = x[w];
        let p = v.exp() / (1.0 + v.exp());
        let term = if y > 0 { -p.ln() } else { -(1.0 - p).ln() };
        let t = sum + term;
        if sum.abs() >= term.abs() {
            comp += (sum - t) + term;
        } else {
            comp += (term - t) + sum;
        }
        sum = t;
    }
    (sum + comp) / s.len() as f64
}

#[test]
fn link_extreme_value_matches_high_precision() {
    // e^-50 / (1 + e^-50) evaluated with 50-digit arithmetic.
    let reference = 1.928_749_847_963_917_8e-22;
    let v = logistic_link(-50.0).unwrap();
    assert!(v > 0.0 && v < 1e-20);
    assert!((v - reference).abs() <= 1e-14 * reference);
}

#[test]
fn nll_matches_naive_summation() {
    for seed in 0..10 {
        let (x, s) = random_problem(5, 5, 30, seed);
        let fast = neg_log_likelihood(&x, &s).unwrap();
        assert!((fast - naive_nll(&x, &s)).abs() <= 1e-12, "seed {seed}");
    }
}

#[test]
fn gradient_matches_central_differences() {
    let h = 1e-5;
    for seed in 0..20 {
        let (x, s) = random_problem(8, 6, 40, 100 + seed);
        let g = nll_gradient(&x, &s).unwrap();
        for i in 0..8 {
            for j in 0..6 {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[(i, j)] += h;
                xm[(i, j)] -= h;
                let fd = (neg_log_likelihood(&xp, &s).unwrap()
                    - neg_log_likelihood(&xm, &s).unwrap())
                    / (2.0 * h);
                let scale = g[(i, j)].abs().max(1e-6);
                assert!(
                    (g[(i, j)] - fd).abs() / scale <= 1e-5,
                    "seed {seed} ({i},{j}): {} vs {fd}",
                    g[(i, j)]
                );
            }
        }
    }
}

#[test]
fn gradient_vanishes_off_sample() {
    let (x, s) = random_problem(9, 7, 25, 3);
    let g = nll_gradient(&x, &s).unwrap();
    let mut sampled = vec![false; 63];
    for &(i, j) in s.indices() {
        sampled[i * 7 + j] = true;
    }
    for i in 0..9 {
        for j in 0..7 {
            if !sampled[i * 7 + j] {
                assert_eq!(g[(i, j)], 0.0);
            }
        }
    }
}

#[test]
fn block_sign_has_exact_rank() {
    let t = generate_truth(
        Shape::new(50, 40).unwrap(),
        3,
        1.5,
        Generator::BlockSign,
        17,
    )
    .unwrap();
    let s = svd(&t.entries).unwrap().singular_values;
    assert!(s[2] > 1e-8 * s[0]);
    assert!(s[3] <= 1e-8 * s[0]);
    assert_eq!(t.margin_tau, 1.5);
    assert!(t.entries.iter().all(|v| v.abs() == 1.5));
}

#[test]
fn gaussian_factor_respects_bounds() {
    for seed in 0..5 {
        let t = generate_truth(
            Shape::new(30, 20).unwrap(),
            2,
            0.8,
            Generator::GaussianFactor,
            seed,
        )
        .unwrap();
        let s = svd(&t.entries).unwrap().singular_values;
        assert!(s[2] <= 1e-8 * s[0]);
        assert!(t.entries.amax() <= 0.8 + 1e-15);
        assert!(t.entries.iter().all(|v| v.abs() >= t.margin_tau));
    }
}

#[test]
fn zero_truth_gives_balanced_labels() {
    let mut t =
        generate_truth(Shape::new(10, 10).unwrap(), 1, 1.0, Generator::BlockSign, 0).unwrap();
    t.entries.fill(0.0);
    let s = sample_observations(&t, 100_000, SamplingScheme::IidUniform, 12).unwrap();
    let frac = s.labels().iter().filter(|&&y| y > 0).count() as f64 / s.len() as f64;
    // 3 sigma at p = 1/2 is 0.0047.
    assert!((frac - 0.5).abs() <= 0.005, "fraction {frac}");
}

#[test]
fn iid_indices_pass_chi_square() {
    let t = generate_truth(Shape::new(10, 12).unwrap(), 1, 1.0, Generator::BlockSign, 0).unwrap();
    let draws = 1_000_000;
    let s = sample_observations(&t, draws, SamplingScheme::IidUniform, 77).unwrap();
    let mut counts = vec![0usize; 120];
    for &(i, j) in s.indices() {
        counts[i * 12 + j] += 1;
    }
    let expected = draws as f64 / 120.0;
    let stat: f64 = counts
        .iter()
        .map(|&c| (c as f64 - expected).powi(2) / expected)
        .sum();
    // Upper 1e-3 quantile of chi-square with 119 degrees of freedom.
    assert!(stat < 172.417_681_602_179_16, "chi-square {stat}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn link_is_monotone_and_symmetric(a in -30.0f64..30.0, b in -30.0f64..30.0) {
        let (fa, fb) = (logistic_link(a).unwrap(), logistic_link(b).unwrap());
        if a < b { prop_assert!(fa <= fb); }
        prop_assert!((fa + logistic_link(-a).unwrap() - 1.0).abs() <= 1e-15);
    }

    #[test]
    fn nll_is_convex_on_segments(seed in 0u64..1000, t in 0.01f64..0.99) {
        let (x1, s) = random_problem(4, 5, 20, seed);
        let mut g = Philox::new(seed ^ 0xabc);
        let x2 = Matrix::from_fn(4, 5, |_, _| 3.0 * g.normal());
        let mid = &x1 * t + &x2 * (1.0 - t);
        let lhs = neg_log_likelihood(&mid, &s).unwrap();
        let rhs = t * neg_log_likelihood(&x1, &s).unwrap() + (1.0 - t) * neg_log_likelihood(&x2, &s).unwrap();
        prop_assert!(lhs <= rhs + 1e-12);
    }
}
