//! Data tensor, partitions, priors and the exact integrated classification
//! likelihood (ICL) of the unconstrained (A) and time-clustered (B) models.
//!
//! Self-pairs never carry observations, so every block is weighted by its
//! number of ordered node pairs `|A_k||A_g| - δ_kg |A_k|` rather than the
//! raw product of cluster sizes. Blocks with no pairs contribute nothing.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::special::{ln, ln_factorial, ln_gamma};

/// Interval breakpoints `0 = t_0 < t_1 < ... < t_U = T`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    breakpoints: Vec<f64>,
}

impl TimeGrid {
    pub fn new(breakpoints: Vec<f64>) -> Result<Self> {
        if breakpoints.len() < 2 {
            return Err(Error::InvalidGrid(format!(
                "need at least two breakpoints, got {}",
                breakpoints.len()
            )));
        }
        if breakpoints[0] != 0.0 {
            return Err(Error::InvalidGrid(format!(
                "first breakpoint must be 0, got {}",
                breakpoints[0]
            )));
        }
        for (u, w) in breakpoints.windows(2).enumerate() {
            if !(w[1] > w[0]) || !w[1].is_finite() {
                return Err(Error::InvalidGrid(format!(
                    "breakpoints not strictly ascending at interval {}",
                    u + 1
                )));
            }
        }
        Ok(Self { breakpoints })
    }

    /// `n_intervals` intervals of equal `length`.
    pub fn uniform(n_intervals: usize, length: f64) -> Result<Self> {
        if n_intervals == 0 || !(length > 0.0) || !length.is_finite() {
            return Err(Error::InvalidGrid(format!(
                "uniform grid needs U >= 1 and a positive length, got U={n_intervals}, length={length}"
            )));
        }
        Self::new((0..=n_intervals).map(|u| u as f64 * length).collect())
    }

    pub fn n_intervals(&self) -> usize {
        self.breakpoints.len() - 1
    }

    pub fn horizon(&self) -> f64 {
        self.breakpoints[self.breakpoints.len() - 1]
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    /// Start and end of interval `u` (0-based).
    pub fn bounds(&self, u: usize) -> (f64, f64) {
        (self.breakpoints[u], self.breakpoints[u + 1])
    }

    pub fn length(&self, u: usize) -> f64 {
        self.breakpoints[u + 1] - self.breakpoints[u]
    }

    /// Interval holding `t` under the half-open `[t_{u-1}, t_u)` convention,
    /// with `t = T` placed in the last interval.
    pub fn interval_of(&self, t: f64) -> Option<usize> {
        if !(t >= 0.0) || t > self.horizon() {
            return None;
        }
        let u = self.breakpoints.partition_point(|&b| b <= t);
        Some((u - 1).min(self.n_intervals() - 1))
    }
}

/// One timestamped directed interaction, nodes 0-based.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub source: usize,
    pub target: usize,
    pub time: f64,
}

/// `N x N x U` table of interaction counts `Y_ij^{I_u}`; the diagonal is
/// always zero.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionTensor {
    n_nodes: usize,
    grid: TimeGrid,
    counts: Vec<u32>,
}

impl InteractionTensor {
    pub fn zeros(n_nodes: usize, grid: TimeGrid) -> Self {
        let u = grid.n_intervals();
        Self {
            n_nodes,
            grid,
            counts: vec![0; n_nodes * n_nodes * u],
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_intervals(&self) -> usize {
        self.grid.n_intervals()
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, u: usize) -> u32 {
        self.counts[(i * self.n_nodes + j) * self.n_intervals() + u]
    }

    /// Counts from `i` to `j` over all intervals.
    #[inline]
    pub fn pair(&self, i: usize, j: usize) -> &[u32] {
        let u = self.n_intervals();
        let base = (i * self.n_nodes + j) * u;
        &self.counts[base..base + u]
    }

    /// Adds `count` interactions from `i` to `j` in interval `u`.
    pub fn add(&mut self, i: usize, j: usize, u: usize, count: u32) -> Result<()> {
        let n = self.n_nodes;
        let nu = self.n_intervals();
        if i >= n || j >= n {
            return Err(Error::InvalidCell(format!(
                "node pair ({i}, {j}) outside 0..{n}"
            )));
        }
        if i == j {
            return Err(Error::InvalidCell(format!("self-loop on node {i}")));
        }
        if u >= nu {
            return Err(Error::InvalidCell(format!("interval {u} outside 0..{nu}")));
        }
        self.counts[(i * n + j) * nu + u] += count;
        Ok(())
    }

    /// Sum of every count in the tensor.
    pub fn total(&self) -> u64 {
        self.counts.iter().map(|&c| c as u64).sum()
    }

    /// Sum over all `(i, j, u)` of `ln(Y!)`.
    pub fn total_log_factorial(&self) -> f64 {
        self.counts
            .iter()
            .filter(|&&c| c > 1)
            .map(|&c| ln_factorial(c as u64))
            .sum()
    }

    /// Non-zero cells as `(i, j, u, count)` in row-major order.
    pub fn nonzero(&self) -> impl Iterator<Item = (usize, usize, usize, u32)> + '_ {
        let n = self.n_nodes;
        let nu = self.n_intervals();
        self.counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(move |(idx, &c)| (idx / (n * nu), (idx / nu) % n, idx % nu, c))
    }
}

/// Bins timestamped events into an interaction tensor.
pub fn build_tensor(events: &[Event], grid: TimeGrid, n_nodes: usize) -> Result<InteractionTensor> {
    let mut tensor = InteractionTensor::zeros(n_nodes, grid);
    for (index, ev) in events.iter().enumerate() {
        for node in [ev.source, ev.target] {
            if node >= n_nodes {
                return Err(Error::NodeOutOfRange {
                    index,
                    node,
                    n_nodes,
                });
            }
        }
        if ev.source == ev.target {
            return Err(Error::SelfLoop {
                index,
                node: ev.source,
            });
        }
        let u = tensor
            .grid
            .interval_of(ev.time)
            .ok_or(Error::TimestampOutOfRange {
                index,
                time: ev.time,
                horizon: tensor.grid.horizon(),
            })?;
        let nu = tensor.n_intervals();
        tensor.counts[(ev.source * n_nodes + ev.target) * nu + u] += 1;
    }
    Ok(tensor)
}

/// Cluster labels (0-based) with occupancy counts. Used both for node
/// clusterings `z` and time clusterings `y`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    labels: Vec<usize>,
    occupancy: Vec<usize>,
}

pub type NodePartition = Partition;
pub type TimePartition = Partition;

impl Partition {
    /// Labels must lie below `n_clusters`; empty clusters are allowed.
    pub fn new(labels: Vec<usize>, n_clusters: usize) -> Result<Self> {
        let mut occupancy = vec![0; n_clusters];
        for (position, &label) in labels.iter().enumerate() {
            if label >= n_clusters {
                return Err(Error::LabelOutOfRange {
                    position,
                    label,
                    n_clusters,
                });
            }
            occupancy[label] += 1;
        }
        Ok(Self { labels, occupancy })
    }

    /// Partition with `max(label) + 1` clusters.
    pub fn from_labels(labels: Vec<usize>) -> Self {
        let k = labels.iter().max().map_or(0, |m| m + 1);
        Self::new(labels, k).expect("labels bounded by their maximum")
    }

    /// Every item in its own cluster.
    pub fn identity(n: usize) -> Self {
        Self::from_labels((0..n).collect())
    }

    /// All items in one cluster.
    pub fn single(n: usize) -> Self {
        Self::new(vec![0; n], 1).expect("label 0 below 1")
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn label(&self, item: usize) -> usize {
        self.labels[item]
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_clusters(&self) -> usize {
        self.occupancy.len()
    }

    pub fn occupancy(&self) -> &[usize] {
        &self.occupancy
    }

    pub fn is_compact(&self) -> bool {
        self.occupancy.iter().all(|&n| n > 0)
    }

    /// Drops empty clusters, keeping the relative order of the others.
    pub fn compact(&self) -> Self {
        let mut remap = vec![usize::MAX; self.occupancy.len()];
        let mut next = 0;
        for (k, &n) in self.occupancy.iter().enumerate() {
            if n > 0 {
                remap[k] = next;
                next += 1;
            }
        }
        let labels = self.labels.iter().map(|&l| remap[l]).collect();
        Self::new(labels, next).expect("remapped labels are dense")
    }
}

/// Hyperparameters of the conjugate priors: Gamma(`a`, `b`) on every block
/// increment, symmetric Dirichlet(`alpha`) on node proportions and
/// Dirichlet(`beta`) on time-cluster proportions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Priors {
    pub a: f64,
    pub b: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl Default for Priors {
    fn default() -> Self {
        Self {
            a: 1.0,
            b: 1.0,
            alpha: 1.0,
            beta: 1.0,
        }
    }
}

impl Priors {
    pub fn new(a: f64, b: f64, alpha: f64, beta: f64) -> Result<Self> {
        let p = Self { a, b, alpha, beta };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("a", self.a),
            ("b", self.b),
            ("alpha", self.alpha),
            ("beta", self.beta),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidPriors(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Ordered node pairs between clusters of the given sizes.
#[inline]
pub fn pair_count(n_from: u64, n_to: u64, same: bool) -> u64 {
    if same {
        n_from * n_from.saturating_sub(1)
    } else {
        n_from * n_to
    }
}

/// Sufficient statistics of a block model: `K x K x L` totals and
/// log-factorial sums, the pair count of each `(k, g)` block and the size of
/// each time layer.
///
/// For model A the layers are the `U` intervals (all of size 1); for model B
/// they are the `D` time clusters.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockStats {
    n_clusters: usize,
    n_layers: usize,
    counts: Vec<u64>,
    log_fact: Vec<f64>,
    pair_count: Vec<u64>,
    layer_size: Vec<u64>,
}

pub type BlockStatsA = BlockStats;
pub type BlockStatsB = BlockStats;

impl BlockStats {
    pub fn n_clusters(&self) -> usize {
        self.n_clusters
    }

    pub fn n_layers(&self) -> usize {
        self.n_layers
    }

    #[inline]
    fn idx(&self, k: usize, g: usize, l: usize) -> usize {
        (k * self.n_clusters + g) * self.n_layers + l
    }

    /// `S_kgl`.
    pub fn count(&self, k: usize, g: usize, l: usize) -> u64 {
        self.counts[self.idx(k, g, l)]
    }

    /// `ln P_kgl`, the sum of `ln(Y!)` over the block.
    pub fn log_fact(&self, k: usize, g: usize, l: usize) -> f64 {
        self.log_fact[self.idx(k, g, l)]
    }

    pub fn pair_count(&self, k: usize, g: usize) -> u64 {
        self.pair_count[k * self.n_clusters + g]
    }

    /// Number of intervals in layer `l` (`|C_d|`, or 1 for model A).
    pub fn layer_size(&self, l: usize) -> u64 {
        self.layer_size[l]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Sums layers sharing a time cluster. Applied to model-A statistics this
    /// yields the model-B statistics for `y`.
    pub fn aggregate_layers(&self, y: &TimePartition) -> Result<Self> {
        if y.len() != self.n_layers {
            return Err(Error::LengthMismatch {
                what: "time partition",
                expected: self.n_layers,
                actual: y.len(),
            });
        }
        let k = self.n_clusters;
        let d = y.n_clusters();
        let mut out = Self {
            n_clusters: k,
            n_layers: d,
            counts: vec![0; k * k * d],
            log_fact: vec![0.0; k * k * d],
            pair_count: self.pair_count.clone(),
            layer_size: vec![0; d],
        };
        for (l, &target) in y.labels().iter().enumerate() {
            out.layer_size[target] += self.layer_size[l];
        }
        for kk in 0..k {
            for g in 0..k {
                for (l, &target) in y.labels().iter().enumerate() {
                    let src = self.idx(kk, g, l);
                    let dst = out.idx(kk, g, target);
                    out.counts[dst] += self.counts[src];
                    out.log_fact[dst] += self.log_fact[src];
                }
            }
        }
        Ok(out)
    }

    /// `ln p(Y | z, y)` with the block increments integrated out.
    pub fn log_likelihood(&self, priors: &Priors) -> f64 {
        let constant = priors.a * ln(priors.b) - ln_gamma(priors.a);
        let mut total = 0.0;
        for k in 0..self.n_clusters {
            for g in 0..self.n_clusters {
                let pairs = self.pair_count(k, g);
                for l in 0..self.n_layers {
                    let exposure = pairs * self.layer_size[l];
                    if exposure == 0 {
                        continue;
                    }
                    let i = self.idx(k, g, l);
                    let s = self.counts[i] as f64;
                    total += constant - self.log_fact[i] + ln_gamma(s + priors.a)
                        - (s + priors.a) * ln(exposure as f64 + priors.b);
                }
            }
        }
        total
    }
}

fn check_len(what: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::LengthMismatch {
            what,
            expected,
            actual,
        });
    }
    Ok(())
}

/// Per-interval block statistics for node partition `z`.
pub fn block_stats_a(tensor: &InteractionTensor, z: &NodePartition) -> Result<BlockStatsA> {
    let n = tensor.n_nodes();
    check_len("node partition", n, z.len())?;
    let k = z.n_clusters();
    let nu = tensor.n_intervals();
    let mut stats = BlockStats {
        n_clusters: k,
        n_layers: nu,
        counts: vec![0; k * k * nu],
        log_fact: vec![0.0; k * k * nu],
        pair_count: vec![0; k * k],
        layer_size: vec![1; nu],
    };
    for kk in 0..k {
        for g in 0..k {
            stats.pair_count[kk * k + g] =
                pair_count(z.occupancy()[kk] as u64, z.occupancy()[g] as u64, kk == g);
        }
    }
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let base = (z.label(i) * k + z.label(j)) * nu;
            for (u, &c) in tensor.pair(i, j).iter().enumerate() {
                stats.counts[base + u] += c as u64;
                if c > 1 {
                    stats.log_fact[base + u] += ln_factorial(c as u64);
                }
            }
        }
    }
    Ok(stats)
}

/// Per-time-cluster block statistics for `(z, y)`.
pub fn block_stats_b(
    tensor: &InteractionTensor,
    z: &NodePartition,
    y: &TimePartition,
) -> Result<BlockStatsB> {
    check_len("time partition", tensor.n_intervals(), y.len())?;
    block_stats_a(tensor, z)?.aggregate_layers(y)
}

/// `ln p(labels | K)` under a symmetric Dirichlet(`concentration`) prior on
/// the cluster proportions.
pub fn log_partition_prior(p: &Partition, concentration: f64) -> f64 {
    let k = p.n_clusters() as f64;
    let n = p.len() as f64;
    ln_gamma(concentration * k) - k * ln_gamma(concentration)
        + p.occupancy()
            .iter()
            .map(|&c| ln_gamma(c as f64 + concentration))
            .sum::<f64>()
        - ln_gamma(n + concentration * k)
}

fn finite(v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite)
    }
}

fn check_stats(stats: &BlockStats, z: &NodePartition) -> Result<()> {
    check_len("node clusters", stats.n_clusters(), z.n_clusters())?;
    for k in 0..z.n_clusters() {
        for g in 0..z.n_clusters() {
            let expected = pair_count(z.occupancy()[k] as u64, z.occupancy()[g] as u64, k == g);
            if stats.pair_count(k, g) != expected {
                return Err(Error::InvalidConfig(format!(
                    "block statistics do not match the node partition at ({k}, {g})"
                )));
            }
        }
    }
    Ok(())
}

/// Exact ICL of model A: `ln p(Y | z, K) + ln p(z | K)`.
pub fn log_icl_a(stats: &BlockStatsA, z: &NodePartition, priors: &Priors) -> Result<f64> {
    priors.validate()?;
    check_stats(stats, z)?;
    if stats.layer_size.iter().any(|&s| s != 1) {
        return Err(Error::InvalidConfig(
            "model-A statistics must have one interval per layer".into(),
        ));
    }
    finite(stats.log_likelihood(priors) + log_partition_prior(z, priors.alpha))
}

/// Exact ICL of model B: `ln p(Y | z, y) + ln p(z | K) + ln p(y | D)`.
pub fn log_icl_b(
    stats: &BlockStatsB,
    z: &NodePartition,
    y: &TimePartition,
    priors: &Priors,
) -> Result<f64> {
    priors.validate()?;
    check_stats(stats, z)?;
    check_len("time clusters", stats.n_layers(), y.n_clusters())?;
    for (d, &c) in y.occupancy().iter().enumerate() {
        if stats.layer_size(d) != c as u64 {
            return Err(Error::InvalidConfig(format!(
                "block statistics do not match the time partition at layer {d}"
            )));
        }
    }
    finite(
        stats.log_likelihood(priors)
            + log_partition_prior(z, priors.alpha)
            + log_partition_prior(y, priors.beta),
    )
}
