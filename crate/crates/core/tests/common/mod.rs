//! Reference oracles shared by the integration and acceptance tests. Nothing
//! here goes through the block-statistics or search code paths.

#![allow(dead_code)]

use std::collections::BTreeSet;

use dynsbm_core::{InteractionTensor, Model, Partition, Priors, SearchState, TimeGrid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::function::gamma::ln_gamma;

fn distinct(labels: &[usize]) -> Vec<usize> {
    labels
        .iter()
        .copied()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect()
}

fn log_prior(labels: &[usize], concentration: f64) -> f64 {
    let clusters = distinct(labels);
    let k = clusters.len() as f64;
    let n = labels.len() as f64;
    let occupancy: f64 = clusters
        .iter()
        .map(|&c| ln_gamma(labels.iter().filter(|&&l| l == c).count() as f64 + concentration))
        .sum();
    ln_gamma(concentration * k) - k * ln_gamma(concentration) + occupancy
        - ln_gamma(n + concentration * k)
}

/// Exact ICL by brute force over node pairs. `y = None` is model A. Empty
/// label values are ignored, so the result is that of the compacted
/// partitions.
pub fn reference_log_icl(
    t: &InteractionTensor,
    z: &[usize],
    y: Option<&[usize]>,
    p: &Priors,
) -> f64 {
    let n = t.n_nodes();
    let nu = t.n_intervals();
    let identity: Vec<usize> = (0..nu).collect();
    let layers = y.unwrap_or(&identity);
    let mut total = 0.0;
    for &k in &distinct(z) {
        for &g in &distinct(z) {
            for &d in &distinct(layers) {
                let mut s = 0u64;
                let mut log_p = 0.0;
                let mut pairs = 0u64;
                for i in (0..n).filter(|&i| z[i] == k) {
                    for j in (0..n).filter(|&j| z[j] == g && j != i) {
                        pairs += 1;
                        for u in (0..nu).filter(|&u| layers[u] == d) {
                            let c = t.get(i, j, u) as u64;
                            s += c;
                            log_p += ln_gamma(c as f64 + 1.0);
                        }
                    }
                }
                let size = layers.iter().filter(|&&l| l == d).count() as u64;
                let exposure = pairs * size;
                if exposure == 0 {
                    continue;
                }
                let s = s as f64;
                total += p.a * p.b.ln() - ln_gamma(p.a) - log_p + ln_gamma(s + p.a)
                    - (s + p.a) * (exposure as f64 + p.b).ln();
            }
        }
    }
    total += log_prior(z, p.alpha);
    if let Some(y) = y {
        total += log_prior(y, p.beta);
    }
    total
}

/// Small tensor with sparse counts in `0..=max_count`.
pub fn random_tensor(
    rng: &mut ChaCha8Rng,
    n: usize,
    nu: usize,
    max_count: u32,
) -> InteractionTensor {
    let mut t = InteractionTensor::zeros(n, TimeGrid::uniform(nu, 1.0).unwrap());
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            for u in 0..nu {
                if rng.random_bool(0.6) {
                    t.add(i, j, u, rng.random_range(0..=max_count)).unwrap();
                }
            }
        }
    }
    t
}

/// Tensor with planted structure: a random node clustering into `k` groups
/// and per-block Poisson-like rates.
pub fn planted_tensor(rng: &mut ChaCha8Rng, n: usize, nu: usize, k: usize) -> InteractionTensor {
    let z: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
    let rates: Vec<f64> = (0..k * k * nu)
        .map(|_| rng.random_range(0.2..6.0))
        .collect();
    let mut t = InteractionTensor::zeros(n, TimeGrid::uniform(nu, 1.0).unwrap());
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            for u in 0..nu {
                let mean = rates[(z[i] * k + z[j]) * nu + u];
                // Inverse-transform Poisson draw.
                let mut x = 0u32;
                let mut p = (-mean).exp();
                let mut cdf = p;
                let r: f64 = rng.random();
                while r > cdf && x < 200 {
                    x += 1;
                    p *= mean / x as f64;
                    cdf += p;
                }
                if x > 0 {
                    t.add(i, j, u, x).unwrap();
                }
            }
        }
    }
    t
}

pub fn random_priors(rng: &mut ChaCha8Rng) -> Priors {
    Priors::new(
        rng.random_range(0.3..3.0),
        rng.random_range(0.3..3.0),
        rng.random_range(0.3..3.0),
        rng.random_range(0.3..3.0),
    )
    .unwrap()
}

/// The four move kinds of the greedy search.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MoveKind {
    ExchangeNode,
    MergeNodes,
    ExchangeInterval,
    MergeIntervals,
}

fn active(labels: &[usize]) -> Vec<usize> {
    distinct(labels)
}

pub fn node_labels(state: &SearchState<'_>, n: usize) -> Vec<usize> {
    (0..n).map(|i| state.node_label(i)).collect()
}

pub fn interval_labels(state: &SearchState<'_>, nu: usize) -> Vec<usize> {
    (0..nu).map(|u| state.interval_label(u)).collect()
}

/// Proposes and applies one random legal move, returning its kind, the
/// incremental delta and the change of the reference ICL. `None` if the
/// drawn move kind is not applicable in the current state.
pub fn random_move(
    rng: &mut ChaCha8Rng,
    state: &mut SearchState<'_>,
    tensor: &InteractionTensor,
) -> Option<(MoveKind, f64, f64)> {
    let n = tensor.n_nodes();
    let nu = tensor.n_intervals();
    let model_b = state.model() == Model::B;
    let kinds: &[MoveKind] = if model_b {
        &[
            MoveKind::ExchangeNode,
            MoveKind::MergeNodes,
            MoveKind::ExchangeInterval,
            MoveKind::MergeIntervals,
        ]
    } else {
        &[MoveKind::ExchangeNode, MoveKind::MergeNodes]
    };
    let kind = kinds[rng.random_range(0..kinds.len())];
    let z = node_labels(state, n);
    let y = interval_labels(state, nu);
    let priors = *state.priors();
    let reference =
        |z: &[usize], y: &[usize]| reference_log_icl(tensor, z, model_b.then_some(y), &priors);
    let before = reference(&z, &y);
    let zk = active(&z);
    let yd = active(&y);
    let (delta, after) = match kind {
        MoveKind::ExchangeNode => {
            let i = rng.random_range(0..n);
            let targets: Vec<usize> = zk.iter().copied().filter(|&l| l != z[i]).collect();
            let l = *targets.get(rng.random_range(0..targets.len().max(1)))?;
            let mut z2 = z.clone();
            z2[i] = l;
            (state.exchange_node(i, l).unwrap(), reference(&z2, &y))
        }
        MoveKind::MergeNodes => {
            if zk.len() < 2 {
                return None;
            }
            let k = zk[rng.random_range(0..zk.len())];
            let l = zk[(zk.iter().position(|&x| x == k).unwrap() + rng.random_range(1..zk.len()))
                % zk.len()];
            let z2: Vec<usize> = z.iter().map(|&x| if x == k { l } else { x }).collect();
            (state.merge_nodes(k, l).unwrap(), reference(&z2, &y))
        }
        MoveKind::ExchangeInterval => {
            let u = rng.random_range(0..nu);
            let targets: Vec<usize> = yd.iter().copied().filter(|&e| e != y[u]).collect();
            let e = *targets.get(rng.random_range(0..targets.len().max(1)))?;
            let mut y2 = y.clone();
            y2[u] = e;
            (state.exchange_interval(u, e).unwrap(), reference(&z, &y2))
        }
        MoveKind::MergeIntervals => {
            if yd.len() < 2 {
                return None;
            }
            let d = yd[rng.random_range(0..yd.len())];
            let e = yd[(yd.iter().position(|&x| x == d).unwrap() + rng.random_range(1..yd.len()))
                % yd.len()];
            let y2: Vec<usize> = y.iter().map(|&x| if x == d { e } else { x }).collect();
            (state.merge_intervals(d, e).unwrap(), reference(&z, &y2))
        }
    };
    Some((kind, delta, after - before))
}

/// Random small search state: `N <= 10`, `U <= 5`, `K <= 4` slots.
pub fn random_state<'a>(
    rng: &mut ChaCha8Rng,
    tensor: &'a InteractionTensor,
    model_b: bool,
) -> SearchState<'a> {
    let n = tensor.n_nodes();
    let nu = tensor.n_intervals();
    let priors = random_priors(rng);
    let k = rng.random_range(1..=4.min(n));
    let z = Partition::new((0..n).map(|_| rng.random_range(0..k)).collect(), k).unwrap();
    if model_b {
        let d = rng.random_range(1..=3.min(nu));
        let y = Partition::new((0..nu).map(|_| rng.random_range(0..d)).collect(), d).unwrap();
        SearchState::new(tensor, &z, Some(&y), priors).unwrap()
    } else {
        SearchState::new(tensor, &z, None, priors).unwrap()
    }
}

/// Largest `|delta - reference change|` over `n_moves` random legal moves on
/// fresh random instances, and the number of moves checked per kind.
pub fn delta_errors(seed: u64, n_moves: usize) -> (f64, [usize; 4]) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let mut per_kind = [0usize; 4];
    let mut checked = 0;
    while checked < n_moves {
        let n = rng.random_range(2..=10);
        let nu = rng.random_range(1..=5);
        let tensor = random_tensor(&mut rng, n, nu, 5);
        let model_b = rng.random_bool(0.5);
        let mut state = random_state(&mut rng, &tensor, model_b);
        for _ in 0..8 {
            if let Some((kind, delta, change)) = random_move(&mut rng, &mut state, &tensor) {
                worst = worst.max((delta - change).abs());
                per_kind[kind as usize] += 1;
                checked += 1;
            }
        }
    }
    (worst, per_kind)
}
