//! Maximum-likelihood estimates of block-pair integrated intensities.
//!
//! The increment of block `(k, g)` over a layer is its total count divided
//! by the number of ordered node pairs times the layer size, i.e. events per
//! ordered pair per interval. Blocks without pairs have no estimate.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::model::{BlockStats, TimeGrid, TimePartition};

/// `K x K x L` table of increment estimates; `None` marks blocks with no
/// node pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct IncrementTable {
    n_clusters: usize,
    n_layers: usize,
    values: Vec<Option<f64>>,
}

impl IncrementTable {
    pub fn n_clusters(&self) -> usize {
        self.n_clusters
    }

    pub fn n_layers(&self) -> usize {
        self.n_layers
    }

    pub fn get(&self, k: usize, g: usize, layer: usize) -> Option<f64> {
        self.values[(k * self.n_clusters + g) * self.n_layers + layer]
    }
}

fn estimate(stats: &BlockStats) -> IncrementTable {
    let k = stats.n_clusters();
    let l = stats.n_layers();
    let mut values = Vec::with_capacity(k * k * l);
    for kk in 0..k {
        for g in 0..k {
            let pairs = stats.pair_count(kk, g);
            for layer in 0..l {
                let exposure = pairs * stats.layer_size(layer);
                values.push(if exposure == 0 {
                    None
                } else {
                    Some(stats.count(kk, g, layer) as f64 / exposure as f64)
                });
            }
        }
    }
    IncrementTable {
        n_clusters: k,
        n_layers: l,
        values,
    }
}

/// Per-interval increments `S_kgu / pairs_kg` from model-A statistics.
pub fn estimate_pi_a(stats: &BlockStats) -> IncrementTable {
    estimate(stats)
}

/// Per-time-cluster increments `S_kgd / (pairs_kg |C_d|)` from model-B
/// statistics built with `y`.
pub fn estimate_pi_b(stats: &BlockStats, y: &TimePartition) -> Result<IncrementTable> {
    if stats.n_layers() != y.n_clusters() {
        return Err(Error::LengthMismatch {
            what: "time clusters",
            expected: stats.n_layers(),
            actual: y.n_clusters(),
        });
    }
    for (d, &c) in y.occupancy().iter().enumerate() {
        if stats.layer_size(d) != c as u64 {
            return Err(Error::InvalidConfig(
                "block statistics were not built with this time partition".into(),
            ));
        }
    }
    Ok(estimate(stats))
}

/// Estimated integrated intensity of one block pair at the breakpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct IntensityEstimate {
    pub block: (usize, usize),
    /// Increment over each interval.
    pub increments: Vec<f64>,
    /// `Λ(t_0) = 0, Λ(t_1), ..., Λ(t_U)`.
    pub cumulative: Vec<f64>,
    pub grid: TimeGrid,
}

/// Cumulative curve of block `(k, g)`. `interval_layer` maps each interval to
/// its layer in `table` (identity for model A, `y` for model B). Returns
/// `None` for blocks without node pairs.
pub fn cumulative(
    table: &IncrementTable,
    k: usize,
    g: usize,
    interval_layer: &[usize],
    grid: &TimeGrid,
) -> Result<Option<IntensityEstimate>> {
    if interval_layer.len() != grid.n_intervals() {
        return Err(Error::LengthMismatch {
            what: "interval-to-layer map",
            expected: grid.n_intervals(),
            actual: interval_layer.len(),
        });
    }
    let mut increments = Vec::with_capacity(interval_layer.len());
    for &layer in interval_layer {
        if layer >= table.n_layers {
            return Err(Error::LabelOutOfRange {
                position: increments.len(),
                label: layer,
                n_clusters: table.n_layers,
            });
        }
        match table.get(k, g, layer) {
            Some(v) => increments.push(v),
            None => return Ok(None),
        }
    }
    let mut cumulative = Vec::with_capacity(increments.len() + 1);
    cumulative.push(0.0);
    let mut acc = 0.0;
    for &v in &increments {
        acc += v;
        cumulative.push(acc);
    }
    Ok(Some(IntensityEstimate {
        block: (k, g),
        increments,
        cumulative,
        grid: grid.clone(),
    }))
}

/// Curves for every block pair that has an estimate.
pub fn all_curves(
    table: &IncrementTable,
    interval_layer: &[usize],
    grid: &TimeGrid,
) -> Result<Vec<IntensityEstimate>> {
    let mut curves = Vec::new();
    for k in 0..table.n_clusters {
        for g in 0..table.n_clusters {
            if let Some(c) = cumulative(table, k, g, interval_layer, grid)? {
                curves.push(c);
            }
        }
    }
    Ok(curves)
}

impl IntensityEstimate {
    /// Piecewise-linear interpolation between breakpoints; exact at `t_u`.
    pub fn interpolate(&self, t: f64) -> Result<f64> {
        let u = self.grid.interval_of(t).ok_or(Error::TimestampOutOfRange {
            index: 0,
            time: t,
            horizon: self.grid.horizon(),
        })?;
        let (lo, hi) = self.grid.bounds(u);
        let (v0, v1) = (self.cumulative[u], self.cumulative[u + 1]);
        Ok(v0 + (v1 - v0) * (t - lo) / (hi - lo))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{block_stats_a, block_stats_b, InteractionTensor, Partition};
    use alloc::vec;

    fn three_by_two() -> (InteractionTensor, Partition) {
        // Nodes 0,1,2 in cluster 0; nodes 3,4 in cluster 1. 12 events from
        // cluster 0 to cluster 1 in interval 0.
        let mut t = InteractionTensor::zeros(5, TimeGrid::uniform(2, 1.0).unwrap());
        for i in 0..3 {
            for j in 3..5 {
                t.add(i, j, 0, 2).unwrap();
            }
        }
        (t, Partition::from_labels(vec![0, 0, 0, 1, 1]))
    }

    #[test]
    fn quotient_of_total_by_pairs() {
        let (t, z) = three_by_two();
        let pi = estimate_pi_a(&block_stats_a(&t, &z).unwrap());
        assert_eq!(pi.get(0, 1, 0), Some(2.0));
        assert_eq!(pi.get(0, 1, 1), Some(0.0));
        assert_eq!(pi.get(1, 0, 0), Some(0.0));
    }

    #[test]
    fn empty_block_is_undefined() {
        let t = InteractionTensor::zeros(2, TimeGrid::uniform(1, 1.0).unwrap());
        let z = Partition::identity(2);
        let pi = estimate_pi_a(&block_stats_a(&t, &z).unwrap());
        assert_eq!(pi.get(0, 0, 0), None);
        assert_eq!(pi.get(0, 1, 0), Some(0.0));
        assert!(cumulative(&pi, 0, 0, &[0], t.grid()).unwrap().is_none());
    }

    #[test]
    fn single_time_cluster_averages_over_intervals() {
        let (t, z) = three_by_two();
        let y = Partition::single(2);
        let pi = estimate_pi_b(&block_stats_b(&t, &z, &y).unwrap(), &y).unwrap();
        assert_eq!(pi.get(0, 1, 0), Some(12.0 / (6.0 * 2.0)));
    }

    #[test]
    fn identity_time_partition_matches_model_a() {
        let (t, z) = three_by_two();
        let y = Partition::identity(2);
        let a = estimate_pi_a(&block_stats_a(&t, &z).unwrap());
        let b = estimate_pi_b(&block_stats_b(&t, &z, &y).unwrap(), &y).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn cumulative_and_interpolation() {
        let (t, z) = three_by_two();
        let pi = estimate_pi_a(&block_stats_a(&t, &z).unwrap());
        let c = cumulative(&pi, 0, 1, &[0, 1], t.grid()).unwrap().unwrap();
        assert_eq!(c.cumulative, vec![0.0, 2.0, 2.0]);
        assert_eq!(c.interpolate(0.0).unwrap(), 0.0);
        assert_eq!(c.interpolate(1.0).unwrap(), 2.0);
        assert_eq!(c.interpolate(0.5).unwrap(), 1.0);
        assert_eq!(c.interpolate(2.0).unwrap(), 2.0);
        assert!(c.interpolate(2.5).is_err());
    }
}
