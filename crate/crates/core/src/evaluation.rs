//! Adjusted Rand index and the exhaustive ICL optimum used as a test oracle.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::model::{
    block_stats_a, log_icl_a, log_icl_b, InteractionTensor, NodePartition, Partition, Priors,
    TimePartition,
};
use crate::search::Model;

/// Counts of items shared by each pair of clusters of two labellings.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContingencyTable {
    pub cells: BTreeMap<(usize, usize), u64>,
    pub rows: BTreeMap<usize, u64>,
    pub cols: BTreeMap<usize, u64>,
    pub n_items: u64,
}

impl ContingencyTable {
    pub fn new(p1: &[usize], p2: &[usize]) -> Result<Self> {
        if p1.len() != p2.len() {
            return Err(Error::LengthMismatch {
                what: "second labelling",
                expected: p1.len(),
                actual: p2.len(),
            });
        }
        let mut t = Self {
            cells: BTreeMap::new(),
            rows: BTreeMap::new(),
            cols: BTreeMap::new(),
            n_items: p1.len() as u64,
        };
        for (&a, &b) in p1.iter().zip(p2) {
            *t.cells.entry((a, b)).or_default() += 1;
            *t.rows.entry(a).or_default() += 1;
            *t.cols.entry(b).or_default() += 1;
        }
        Ok(t)
    }
}

fn choose2(n: u64) -> f64 {
    (n as f64) * (n as f64 - 1.0) / 2.0
}

/// Hubert–Arabie adjusted Rand index. Not clamped: chance-level agreement
/// can be negative. Two labellings that both put everything in one cluster
/// (or both use singletons) score 1.
pub fn adjusted_rand_index(p1: &[usize], p2: &[usize]) -> Result<f64> {
    let t = ContingencyTable::new(p1, p2)?;
    let index: f64 = t.cells.values().map(|&c| choose2(c)).sum();
    let rows: f64 = t.rows.values().map(|&c| choose2(c)).sum();
    let cols: f64 = t.cols.values().map(|&c| choose2(c)).sum();
    let total = choose2(t.n_items);
    if total == 0.0 {
        return Ok(1.0);
    }
    let expected = rows * cols / total;
    let max = 0.5 * (rows + cols);
    if max == expected {
        return Ok(1.0);
    }
    Ok((index - expected) / (max - expected))
}

/// Calls `f` on every set partition of `n` items into at most `k_max`
/// blocks, as restricted growth strings.
pub fn for_each_partition(n: usize, k_max: usize, mut f: impl FnMut(&[usize], usize)) {
    fn rec(
        labels: &mut Vec<usize>,
        pos: usize,
        used: usize,
        k_max: usize,
        f: &mut dyn FnMut(&[usize], usize),
    ) {
        if pos == labels.len() {
            f(labels, used);
            return;
        }
        let limit = (used + 1).min(k_max);
        for l in 0..limit {
            labels[pos] = l;
            rec(labels, pos + 1, used.max(l + 1), k_max, f);
        }
    }
    if n == 0 || k_max == 0 {
        return;
    }
    let mut labels = vec![0; n];
    rec(&mut labels, 0, 0, k_max, &mut f);
}

/// Largest node count accepted by [`exhaustive_icl_optimum`].
pub const MAX_ENUMERATED_NODES: usize = 8;
/// Largest interval count accepted for model B.
pub const MAX_ENUMERATED_INTERVALS: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct ExhaustiveOptimum {
    pub log_icl: f64,
    pub node_partition: NodePartition,
    pub time_partition: Option<TimePartition>,
}

/// Global ICL maximum over all node partitions with at most `k_max`
/// clusters (and, for model B, all time partitions with at most `d_max`).
pub fn exhaustive_icl_optimum(
    tensor: &InteractionTensor,
    priors: &Priors,
    k_max: usize,
    model: Model,
    d_max: usize,
) -> Result<ExhaustiveOptimum> {
    let n = tensor.n_nodes();
    let nu = tensor.n_intervals();
    if n > MAX_ENUMERATED_NODES {
        return Err(Error::TooLargeForEnumeration {
            max: MAX_ENUMERATED_NODES,
            actual: n,
        });
    }
    if model == Model::B && nu > MAX_ENUMERATED_INTERVALS {
        return Err(Error::TooLargeForEnumeration {
            max: MAX_ENUMERATED_INTERVALS,
            actual: nu,
        });
    }
    if k_max == 0 || (model == Model::B && d_max == 0) {
        return Err(Error::InvalidConfig(
            "k_max and d_max must be positive".into(),
        ));
    }
    let time_partitions: Vec<Partition> = match model {
        Model::A => Vec::new(),
        Model::B => {
            let mut all = Vec::new();
            for_each_partition(nu, d_max, |y, d| {
                all.push(Partition::new(y.to_vec(), d).expect("restricted growth string"))
            });
            all
        }
    };

    let mut best: Option<ExhaustiveOptimum> = None;
    let mut failure = None;
    for_each_partition(n, k_max, |labels, k| {
        if failure.is_some() {
            return;
        }
        let z = Partition::new(labels.to_vec(), k).expect("restricted growth string");
        let result = (|| -> Result<()> {
            let stats = block_stats_a(tensor, &z)?;
            let mut consider = |icl: f64, y: Option<&Partition>| {
                if best.as_ref().is_none_or(|b| icl > b.log_icl) {
                    best = Some(ExhaustiveOptimum {
                        log_icl: icl,
                        node_partition: z.clone(),
                        time_partition: y.cloned(),
                    });
                }
            };
            match model {
                Model::A => consider(log_icl_a(&stats, &z, priors)?, None),
                Model::B => {
                    for y in &time_partitions {
                        let sb = stats.aggregate_layers(y)?;
                        consider(log_icl_b(&sb, &z, y, priors)?, Some(y));
                    }
                }
            }
            Ok(())
        })();
        if let Err(e) = result {
            failure = Some(e);
        }
    });
    if let Some(e) = failure {
        return Err(e);
    }
    best.ok_or_else(|| Error::InvalidConfig("nothing to enumerate".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::TimeGrid;

    #[test]
    fn identical_and_relabelled_partitions_score_one() {
        assert_eq!(
            adjusted_rand_index(&[0, 0, 1, 1], &[0, 0, 1, 1]).unwrap(),
            1.0
        );
        assert_eq!(
            adjusted_rand_index(&[1, 1, 2, 2], &[2, 2, 1, 1]).unwrap(),
            1.0
        );
    }

    #[test]
    fn worked_example() {
        // Contingency [[2,1,0],[0,1,2]]: index 2, rows 6, cols 3, C(6,2)=15.
        // expected = 18/15 = 1.2, max = 4.5, ARI = 0.8 / 3.3.
        let ari = adjusted_rand_index(&[1, 1, 1, 2, 2, 2], &[1, 1, 2, 2, 3, 3]).unwrap();
        assert!((ari - 0.8 / 3.3).abs() < 1e-12);
    }

    #[test]
    fn one_cluster_against_structure_is_zero() {
        assert_eq!(
            adjusted_rand_index(&[0; 6], &[0, 0, 0, 1, 1, 1]).unwrap(),
            0.0
        );
    }

    #[test]
    fn length_mismatch_is_rejected() {
        assert!(adjusted_rand_index(&[0, 1], &[0]).is_err());
    }

    #[test]
    fn partition_counts_are_bell_numbers() {
        let bell = [1, 1, 2, 5, 15, 52, 203, 877, 4140];
        for (n, &expected) in bell.iter().enumerate().skip(1) {
            let mut count = 0;
            for_each_partition(n, n, |_, _| count += 1);
            assert_eq!(count, expected, "n = {n}");
        }
        let mut at_most_two = 0;
        for_each_partition(4, 2, |_, k| {
            assert!(k <= 2);
            at_most_two += 1;
        });
        assert_eq!(at_most_two, 8);
    }

    #[test]
    fn two_nodes_compare_two_partitions() {
        let mut t = InteractionTensor::zeros(2, TimeGrid::uniform(1, 1.0).unwrap());
        t.add(0, 1, 0, 3).unwrap();
        let opt = exhaustive_icl_optimum(&t, &Priors::default(), 2, Model::A, 1).unwrap();
        let z1 = Partition::single(2);
        let z2 = Partition::identity(2);
        let p = Priors::default();
        let v1 = log_icl_a(&block_stats_a(&t, &z1).unwrap(), &z1, &p).unwrap();
        let v2 = log_icl_a(&block_stats_a(&t, &z2).unwrap(), &z2, &p).unwrap();
        assert_eq!(opt.log_icl, v1.max(v2));
    }

    #[test]
    fn enumeration_guard() {
        let t = InteractionTensor::zeros(9, TimeGrid::uniform(1, 1.0).unwrap());
        assert!(matches!(
            exhaustive_icl_optimum(&t, &Priors::default(), 3, Model::A, 1),
            Err(Error::TooLargeForEnumeration { .. })
        ));
        let t = InteractionTensor::zeros(3, TimeGrid::uniform(6, 1.0).unwrap());
        assert!(exhaustive_icl_optimum(&t, &Priors::default(), 3, Model::B, 2).is_err());
    }
}
