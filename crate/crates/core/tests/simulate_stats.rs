use dynsbm_core::simulate::TimeRegimes;
use dynsbm_core::{
    build_tensor, restart_rng, sample_events, sample_memberships, sample_tensor, scenario_preset,
    SimScenario, TimeGrid,
};
use statrs::distribution::{Binomial, ChiSquared, ContinuousCDF, Discrete, DiscreteCDF, Poisson};

fn small_scenario(length: f64) -> SimScenario {
    SimScenario {
        name: "small".into(),
        n_nodes: 3,
        grid: TimeGrid::uniform(2, length).unwrap(),
        node_weights: vec![0.5, 0.5],
        time_regimes: TimeRegimes::Fixed(vec![0, 1]),
        rates: vec![vec![3.0, 0.5, 1.0, 2.0], vec![0.2, 4.0, 1.5, 0.7]],
        psi: None,
    }
}

#[test]
fn occupancy_stays_in_the_binomial_band() {
    let band = Binomial::new(0.5, 50).unwrap();
    let (lo, hi) = (band.inverse_cdf(0.005), band.inverse_cdf(0.995));
    let mut rng = restart_rng(31, 0);
    let mut inside = 0;
    let mut total = 0u64;
    for _ in 0..500 {
        let z = sample_memberships(&[0.5, 0.5], 50, &mut rng).unwrap();
        let ones = z.iter().filter(|&&k| k == 0).count() as u64;
        total += ones;
        if (lo..=hi).contains(&ones) {
            inside += 1;
        }
    }
    // At most 1% of draws fall outside the band in expectation.
    assert!(inside >= 490, "{inside}/500 draws inside [{lo}, {hi}]");
    let pooled = Binomial::new(0.5, 25_000).unwrap();
    assert!((pooled.inverse_cdf(0.005)..=pooled.inverse_cdf(0.995)).contains(&total));
}

#[test]
fn cell_means_are_within_three_sigma() {
    let s = small_scenario(1.5);
    let z = [0, 1, 1];
    let y = [0, 1];
    let draws = 10_000;
    let mut rng = restart_rng(77, 0);
    let mut sums = [0u64; 3 * 3 * 2];
    for _ in 0..draws {
        let t = sample_tensor(&s, &z, &y, &mut rng).unwrap();
        for (i, j, u, c) in t.nonzero() {
            sums[(i * 3 + j) * 2 + u] += c as u64;
        }
    }
    for i in 0..3 {
        for j in 0..3 {
            for u in 0..2 {
                let sum = sums[(i * 3 + j) * 2 + u] as f64;
                if i == j {
                    assert_eq!(sum, 0.0);
                    continue;
                }
                let mean = s.rate(y[u], z[i], z[j]) * 1.5;
                let sigma = (mean / draws as f64).sqrt();
                let observed = sum / draws as f64;
                assert!(
                    (observed - mean).abs() < 3.0 * sigma,
                    "cell ({i},{j},{u}): {observed} vs {mean}"
                );
            }
        }
    }
}

#[test]
fn counts_pass_a_chi_square_test() {
    // Pool every off-diagonal cell of one block and regime and compare the
    // histogram to its Poisson law.
    let s = scenario_preset("scenario1", None).unwrap();
    let mut rng = restart_rng(5, 0);
    let (z, y) = s.sample_labels(&mut rng).unwrap();
    let mean = s.rate(0, 0, 0);
    // Values of 7 or more share the last bin.
    let mut observed = [0u64; 8];
    let mut n_obs = 0u64;
    for _ in 0..4 {
        let t = sample_tensor(&s, &z, &y, &mut rng).unwrap();
        for i in 0..s.n_nodes {
            for j in 0..s.n_nodes {
                if i == j || z[i] != 0 || z[j] != 0 {
                    continue;
                }
                for u in (0..y.len()).filter(|&u| y[u] == 0) {
                    let c = (t.get(i, j, u) as usize).min(observed.len() - 1);
                    observed[c] += 1;
                    n_obs += 1;
                }
            }
        }
    }
    let law = Poisson::new(mean).unwrap();
    let mut stat = 0.0;
    let mut bins = 0;
    let mut tail = 1.0;
    for (c, &o) in observed.iter().enumerate() {
        let p = if c + 1 == observed.len() {
            tail
        } else {
            law.pmf(c as u64)
        };
        tail -= p;
        let e = p * n_obs as f64;
        assert!(e >= 5.0, "bin {c} expects {e}");
        stat += (o as f64 - e).powi(2) / e;
        bins += 1;
    }
    let critical = ChiSquared::new((bins - 1) as f64)
        .unwrap()
        .inverse_cdf(0.99);
    assert!(
        stat < critical,
        "chi-square {stat} >= {critical} ({n_obs} cells)"
    );
}

#[test]
fn interval_length_scales_the_mean() {
    let short = small_scenario(0.1);
    let z = [0, 0, 0];
    let y = [0, 0];
    let draws = 20_000;
    let mut rng = restart_rng(3, 0);
    let total: u64 = (0..draws)
        .map(|_| sample_tensor(&short, &z, &y, &mut rng).unwrap().total())
        .sum();
    // 6 ordered pairs, 2 intervals of length 0.1, rate 3.
    let mean = 6.0 * 2.0 * 0.1 * 3.0;
    let observed = total as f64 / draws as f64;
    let sigma = (mean / draws as f64).sqrt();
    assert!(
        (observed - mean).abs() < 3.0 * sigma,
        "{observed} vs {mean}"
    );
}

#[test]
fn events_roundtrip_and_are_reproducible() {
    for name in ["scenario2", "overfit"] {
        let s = scenario_preset(name, None).unwrap();
        let (z, y) = s.sample_labels(&mut restart_rng(1, 0)).unwrap();
        let events = sample_events(&s, &z, &y, &mut restart_rng(2, 0)).unwrap();
        let again = sample_events(&s, &z, &y, &mut restart_rng(2, 0)).unwrap();
        assert_eq!(events, again);
        let t = s.grid.horizon();
        assert!(events.iter().all(|e| (0.0..=t).contains(&e.time)));
        let rebuilt = build_tensor(&events, s.grid.clone(), s.n_nodes).unwrap();
        let direct = sample_tensor(&s, &z, &y, &mut restart_rng(2, 0)).unwrap();
        assert_eq!(rebuilt, direct);
    }
}
