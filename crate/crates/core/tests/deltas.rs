mod common;

use common::{
    delta_errors, interval_labels, node_labels, random_move, random_state, random_tensor,
    reference_log_icl,
};
use dynsbm_core::{Partition, Priors, SearchState};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn deltas_match_full_recomputation() {
    let (worst, per_kind) = delta_errors(2024, 2000);
    assert!(worst < 1e-8, "worst delta error {worst:e}");
    assert!(
        per_kind.iter().all(|&c| c >= 100),
        "move kinds under-sampled: {per_kind:?}"
    );
}

#[test]
fn random_walk_keeps_every_table_consistent() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for round in 0..20 {
        let n = rng.random_range(3..=10);
        let nu = rng.random_range(2..=5);
        let tensor = random_tensor(&mut rng, n, nu, 7);
        let mut state = random_state(&mut rng, &tensor, round % 2 == 1);
        let mut applied = 0;
        while applied < 100 {
            if random_move(&mut rng, &mut state, &tensor).is_some() {
                applied += 1;
            }
            // A merge can collapse everything; restart from a fresh split.
            if state.node_partition().n_clusters() == 1 && rng.random_bool(0.3) {
                state.verify().unwrap();
                state = random_state(&mut rng, &tensor, round % 2 == 1);
            }
        }
        state.verify().unwrap();
    }
}

#[test]
fn exchange_and_return_cancel() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut checked = 0;
    while checked < 200 {
        let n = rng.random_range(3..=9);
        let nu = rng.random_range(2..=5);
        let tensor = random_tensor(&mut rng, n, nu, 5);
        let mut state = random_state(&mut rng, &tensor, true);
        let z = node_labels(&state, n);
        let i = rng.random_range(0..n);
        let from = z[i];
        let stays_open = z.iter().filter(|&&l| l == from).count() > 1;
        if let Some(&to) = z.iter().find(|&&l| l != from) {
            if stays_open {
                let there = state.exchange_node(i, to).unwrap();
                let back = state.exchange_node(i, from).unwrap();
                assert!((there + back).abs() < 1e-10, "{there} + {back}");
                checked += 1;
            }
        }
        let y = interval_labels(&state, nu);
        let u = rng.random_range(0..nu);
        let from = y[u];
        let stays_open = y.iter().filter(|&&l| l == from).count() > 1;
        if let Some(&to) = y.iter().find(|&&l| l != from) {
            if stays_open {
                let there = state.exchange_interval(u, to).unwrap();
                let back = state.exchange_interval(u, from).unwrap();
                assert!((there + back).abs() < 1e-10, "{there} + {back}");
                checked += 1;
            }
        }
    }
}

#[test]
fn single_time_cluster_admits_no_interval_move() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let tensor = random_tensor(&mut rng, 4, 3, 3);
    let z = Partition::from_labels(vec![0, 0, 1, 1]);
    let y = Partition::single(3);
    let mut state = SearchState::new(&tensor, &z, Some(&y), Priors::default()).unwrap();
    assert!(state.exchange_interval(0, 0).is_err());
    assert!(state.merge_intervals(0, 0).is_err());
    assert_eq!(
        state.greedy_merge_pass(dynsbm_core::Axis::Intervals, 0.0),
        0
    );
}

#[test]
fn invalid_moves_are_rejected() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let tensor = random_tensor(&mut rng, 4, 2, 3);
    let z = Partition::new(vec![0, 0, 1, 1], 3).unwrap();
    let state = SearchState::new(&tensor, &z, None, Priors::default()).unwrap();
    assert!(state.delta_exchange_node(0, 0).is_err());
    assert!(state.delta_exchange_node(0, 2).is_err(), "empty slot");
    assert!(state.delta_exchange_node(7, 1).is_err());
    assert!(state.delta_merge_nodes(1, 1).is_err());
    assert!(state.delta_merge_nodes(0, 2).is_err());
    assert!(
        state.delta_exchange_interval(0, 1).is_err(),
        "model A has no interval moves"
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn initial_cached_icl_is_the_reference(seed in any::<u64>(), model_b in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(2..=10);
        let nu = rng.random_range(1..=5);
        let tensor = random_tensor(&mut rng, n, nu, 6);
        let state = random_state(&mut rng, &tensor, model_b);
        let y = interval_labels(&state, nu);
        let reference = reference_log_icl(&tensor, &node_labels(&state, n), model_b.then_some(&y[..]), state.priors());
        prop_assert!((state.log_icl() - reference).abs() < 1e-10 * reference.abs().max(1.0));
    }
}
