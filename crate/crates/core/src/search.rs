//! Greedy maximization of the exact ICL.
//!
//! [`SearchState`] keeps every table needed to score a move without touching
//! the full tensor:
//!
//! * block totals `S_kgd` and log-factorial sums, sized `K_max x K_max x D_max`
//!   and never resized (for model A the layers are the `U` intervals);
//! * per-node aggregates `S_igd = Σ_{z_j = g} Y_ij` (outgoing) and
//!   `S'_igd = Σ_{z_j = g} Y_ji` (incoming) with their log-factorial sums;
//! * for model B, per-interval block totals `S_kgu` used by interval moves;
//! * the likelihood contribution of every `(k, g)` block, summed over layers.
//!
//! A node exchange touches the rows and columns of two clusters, so its
//! delta costs `O(K D)`. An interval exchange touches two layers of every
//! block, `O(K^2)`. The log-factorial terms sum to a constant over any
//! partition and drop out of every delta.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{
    block_stats_a, block_stats_b, log_icl_a, log_icl_b, pair_count, InteractionTensor,
    NodePartition, Partition, Priors, TimePartition,
};
use crate::special::{ln, ln_gamma, LnGammaTable};

/// Which likelihood is maximized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Model {
    /// One free increment per block and interval.
    A,
    /// Increments shared by intervals of the same time cluster.
    B,
}

/// Order in which node and interval passes are run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Strategy {
    /// Node exchanges then node merges (model A).
    NodesOnly,
    /// Nodes (exchange + merge), then intervals (exchange + merge). "TN".
    NodesThenTimes,
    /// Intervals first, then nodes. "NT".
    TimesThenNodes,
    /// Alternate single node and interval sweeps until neither moves
    /// anything, then merge on both axes. "M".
    Alternating,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    Nodes,
    Intervals,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchConfig {
    pub model: Model,
    pub k_max: usize,
    /// Initial number of time clusters; ignored by model A.
    pub d_max: usize,
    pub n_restarts: usize,
    pub strategy: Strategy,
    pub seed: u64,
    /// A move is accepted only if it raises the ICL by more than this.
    pub epsilon: f64,
    pub priors: Priors,
}

/// `ceil(N / 2)`.
pub fn default_k_max(n_nodes: usize) -> usize {
    n_nodes.div_ceil(2).max(1)
}

/// `ceil(sqrt(U))`.
pub fn default_d_max(n_intervals: usize) -> usize {
    let mut d = libm::sqrt(n_intervals as f64) as usize;
    while d * d < n_intervals {
        d += 1;
    }
    d.max(1)
}

impl SearchConfig {
    pub fn model_a(n_nodes: usize) -> Self {
        Self {
            model: Model::A,
            k_max: default_k_max(n_nodes),
            d_max: 1,
            n_restarts: 10,
            strategy: Strategy::NodesOnly,
            seed: 0,
            epsilon: 0.0,
            priors: Priors::default(),
        }
    }

    pub fn model_b(n_nodes: usize, n_intervals: usize) -> Self {
        Self {
            model: Model::B,
            d_max: default_d_max(n_intervals),
            strategy: Strategy::NodesThenTimes,
            ..Self::model_a(n_nodes)
        }
    }

    pub fn validate(&self, tensor: &InteractionTensor) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        let n = tensor.n_nodes();
        let u = tensor.n_intervals();
        if n == 0 {
            return bad("the tensor has no nodes".into());
        }
        if self.k_max == 0 || self.k_max > n {
            return bad(format!("k_max must be in 1..={n}, got {}", self.k_max));
        }
        if self.n_restarts == 0 {
            return bad("n_restarts must be positive".into());
        }
        if !(self.epsilon >= 0.0) || !self.epsilon.is_finite() {
            return bad(format!(
                "epsilon must be finite and >= 0, got {}",
                self.epsilon
            ));
        }
        match (self.model, self.strategy) {
            (Model::A, Strategy::NodesOnly) => {}
            (Model::A, s) => return bad(format!("model A only supports node passes, got {s:?}")),
            (Model::B, Strategy::NodesOnly) => {
                return bad("model B needs a strategy that also clusters intervals".into())
            }
            (Model::B, _) => {
                if self.d_max == 0 || self.d_max > u {
                    return bad(format!("d_max must be in 1..={u}, got {}", self.d_max));
                }
            }
        }
        self.priors.validate()
    }
}

/// Accepted operations during one restart.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MoveCounts {
    pub node_moves: usize,
    pub node_merges: usize,
    pub interval_moves: usize,
    pub interval_merges: usize,
}

/// A maintained table disagreeing with its from-scratch reconstruction.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("search state integrity: {table} differs from reconstruction ({detail})")]
pub struct IntegrityError {
    pub table: &'static str,
    pub detail: String,
}

/// Absolute tolerance for floating-point tables checked by
/// [`SearchState::verify`], scaled by `max(1, |value|)`.
pub const FLOAT_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct SearchState<'a> {
    tensor: &'a InteractionTensor,
    priors: Priors,
    model: Model,
    n: usize,
    nu: usize,
    k_max: usize,
    d_max: usize,

    z: Vec<usize>,
    node_size: Vec<u64>,
    node_active: Vec<usize>,
    y: Vec<usize>,
    time_size: Vec<u64>,
    time_active: Vec<usize>,

    counts: Vec<u64>,
    log_fact: Vec<f64>,
    out_counts: Vec<u64>,
    in_counts: Vec<u64>,
    out_log_fact: Vec<f64>,
    in_log_fact: Vec<f64>,
    interval_counts: Vec<u64>,
    interval_log_fact: Vec<f64>,
    block_term: Vec<f64>,

    lgamma_a: LnGammaTable,
    ln_fact: LnGammaTable,
    occ_alpha: Vec<f64>,
    occ_beta: Vec<f64>,
    cell_const: f64,
    log_fact_total: f64,

    log_icl: f64,
    trace: Vec<f64>,
    moves: MoveCounts,
}

impl<'a> SearchState<'a> {
    /// Builds the state for node labels `z` (and time labels `y` for model
    /// B). Label slots may be empty; the slot counts become `K_max` and
    /// `D_max` for the rest of the search.
    pub fn new(
        tensor: &'a InteractionTensor,
        z: &NodePartition,
        y: Option<&TimePartition>,
        priors: Priors,
    ) -> Result<Self> {
        priors.validate()?;
        let n = tensor.n_nodes();
        let nu = tensor.n_intervals();
        if z.len() != n {
            return Err(Error::LengthMismatch {
                what: "node partition",
                expected: n,
                actual: z.len(),
            });
        }
        let (model, y_labels, d_max) = match y {
            Some(y) => {
                if y.len() != nu {
                    return Err(Error::LengthMismatch {
                        what: "time partition",
                        expected: nu,
                        actual: y.len(),
                    });
                }
                (Model::B, y.labels().to_vec(), y.n_clusters())
            }
            None => (Model::A, (0..nu).collect(), nu),
        };
        let k_max = z.n_clusters();
        let max_cell = tensor.nonzero().map(|c| c.3 as u64).max().unwrap_or(0);

        let mut state = Self {
            tensor,
            priors,
            model,
            n,
            nu,
            k_max,
            d_max,
            z: z.labels().to_vec(),
            node_size: vec![0; k_max],
            node_active: Vec::new(),
            y: y_labels,
            time_size: vec![0; d_max],
            time_active: Vec::new(),
            counts: Vec::new(),
            log_fact: Vec::new(),
            out_counts: Vec::new(),
            in_counts: Vec::new(),
            out_log_fact: Vec::new(),
            in_log_fact: Vec::new(),
            interval_counts: Vec::new(),
            interval_log_fact: Vec::new(),
            block_term: Vec::new(),
            lgamma_a: LnGammaTable::new(priors.a, tensor.total()),
            ln_fact: LnGammaTable::new(1.0, max_cell),
            occ_alpha: (0..=n).map(|c| ln_gamma(c as f64 + priors.alpha)).collect(),
            occ_beta: (0..=nu).map(|c| ln_gamma(c as f64 + priors.beta)).collect(),
            cell_const: priors.a * ln(priors.b) - ln_gamma(priors.a),
            log_fact_total: tensor.total_log_factorial(),
            log_icl: 0.0,
            trace: Vec::new(),
            moves: MoveCounts::default(),
        };
        state.rebuild();
        state.trace.push(state.log_icl);
        Ok(state)
    }

    /// Random multinomial initialization: each node uniformly among
    /// `k_max` slots and, for model B, each interval among `d_max` slots.
    pub fn random<R: Rng + ?Sized>(
        tensor: &'a InteractionTensor,
        config: &SearchConfig,
        rng: &mut R,
    ) -> Result<Self> {
        config.validate(tensor)?;
        let z: Vec<usize> = (0..tensor.n_nodes())
            .map(|_| rng.random_range(0..config.k_max))
            .collect();
        let z = Partition::new(z, config.k_max)?;
        match config.model {
            Model::A => Self::new(tensor, &z, None, config.priors),
            Model::B => {
                let y: Vec<usize> = (0..tensor.n_intervals())
                    .map(|_| rng.random_range(0..config.d_max))
                    .collect();
                let y = Partition::new(y, config.d_max)?;
                Self::new(tensor, &z, Some(&y), config.priors)
            }
        }
    }

    fn rebuild(&mut self) {
        let (n, nu, km, dm) = (self.n, self.nu, self.k_max, self.d_max);
        self.node_size = vec![0; km];
        for &k in &self.z {
            self.node_size[k] += 1;
        }
        self.node_active = (0..km).filter(|&k| self.node_size[k] > 0).collect();
        self.time_size = vec![0; dm];
        for &d in &self.y {
            self.time_size[d] += 1;
        }
        self.time_active = (0..dm).filter(|&d| self.time_size[d] > 0).collect();

        self.counts = vec![0; km * km * dm];
        self.log_fact = vec![0.0; km * km * dm];
        self.out_counts = vec![0; n * km * dm];
        self.in_counts = vec![0; n * km * dm];
        self.out_log_fact = vec![0.0; n * km * dm];
        self.in_log_fact = vec![0.0; n * km * dm];
        let with_intervals = self.model == Model::B;
        let interval_len = if with_intervals { km * km * nu } else { 0 };
        self.interval_counts = vec![0; interval_len];
        self.interval_log_fact = vec![0.0; interval_len];

        for i in 0..n {
            let zi = self.z[i];
            for j in 0..n {
                if i == j {
                    continue;
                }
                let zj = self.z[j];
                for (u, &c) in self.tensor.pair(i, j).iter().enumerate() {
                    if c == 0 {
                        continue;
                    }
                    let c = c as u64;
                    let lf = self.ln_fact.get(c);
                    let d = self.y[u];
                    let b = self.blk(zi, zj) + d;
                    self.counts[b] += c;
                    self.log_fact[b] += lf;
                    let o = self.agg(i, zj) + d;
                    self.out_counts[o] += c;
                    self.out_log_fact[o] += lf;
                    let p = self.agg(j, zi) + d;
                    self.in_counts[p] += c;
                    self.in_log_fact[p] += lf;
                    if with_intervals {
                        let q = (zi * km + zj) * nu + u;
                        self.interval_counts[q] += c;
                        self.interval_log_fact[q] += lf;
                    }
                }
            }
        }

        self.block_term = vec![0.0; km * km];
        self.refresh_all_block_terms();
        self.log_icl = self.icl_from_block_terms();
    }

    #[inline]
    fn blk(&self, k: usize, g: usize) -> usize {
        (k * self.k_max + g) * self.d_max
    }

    #[inline]
    fn agg(&self, i: usize, g: usize) -> usize {
        (i * self.k_max + g) * self.d_max
    }

    #[inline]
    fn ival(&self, k: usize, g: usize) -> usize {
        (k * self.k_max + g) * self.nu
    }

    #[inline]
    fn pairs(&self, k: usize, g: usize) -> u64 {
        pair_count(self.node_size[k], self.node_size[g], k == g)
    }

    /// Likelihood of one `(layer, exposure)` cell without its `ln P` part.
    #[inline]
    fn cell_term(&self, s: u64, exposure: u64) -> f64 {
        if exposure == 0 {
            return 0.0;
        }
        self.cell_const + self.lgamma_a.get(s)
            - (s as f64 + self.priors.a) * ln(exposure as f64 + self.priors.b)
    }

    /// Likelihood of a block with `pairs` ordered node pairs whose layer
    /// totals are given by `count`, summed over the active layers.
    #[inline]
    fn layer_sum(&self, pairs: u64, count: impl Fn(usize) -> u64) -> f64 {
        if pairs == 0 {
            return 0.0;
        }
        match self.model {
            Model::A => {
                let mut acc = 0.0;
                let mut total = 0u64;
                for d in 0..self.nu {
                    let s = count(d);
                    total += s;
                    acc += self.lgamma_a.get(s);
                }
                let layers = self.nu as f64;
                acc + layers * self.cell_const
                    - (total as f64 + layers * self.priors.a) * ln(pairs as f64 + self.priors.b)
            }
            Model::B => self
                .time_active
                .iter()
                .map(|&d| self.cell_term(count(d), pairs * self.time_size[d]))
                .sum(),
        }
    }

    fn compute_block_term(&self, k: usize, g: usize) -> f64 {
        let b = self.blk(k, g);
        self.layer_sum(self.pairs(k, g), |d| self.counts[b + d])
    }

    fn refresh_all_block_terms(&mut self) {
        for k in 0..self.k_max {
            for g in 0..self.k_max {
                self.block_term[k * self.k_max + g] = self.compute_block_term(k, g);
            }
        }
    }

    fn refresh_cross(&mut self, k: usize) {
        for idx in 0..self.node_active.len() {
            let g = self.node_active[idx];
            self.block_term[k * self.k_max + g] = self.compute_block_term(k, g);
            self.block_term[g * self.k_max + k] = self.compute_block_term(g, k);
        }
    }

    #[inline]
    fn cached(&self, k: usize, g: usize) -> f64 {
        self.block_term[k * self.k_max + g]
    }

    fn occupancy_term(table: &[f64], size: u64) -> f64 {
        if size == 0 {
            0.0
        } else {
            table[size as usize]
        }
    }

    /// `ln Γ(cK) - K ln Γ(c) - ln Γ(n + cK)`.
    fn prior_norm(n_items: usize, n_clusters: usize, concentration: f64) -> f64 {
        let k = n_clusters as f64;
        ln_gamma(concentration * k)
            - k * ln_gamma(concentration)
            - ln_gamma(n_items as f64 + concentration * k)
    }

    fn node_prior(&self) -> f64 {
        Self::prior_norm(self.n, self.node_active.len(), self.priors.alpha)
            + self
                .node_active
                .iter()
                .map(|&k| self.occ_alpha[self.node_size[k] as usize])
                .sum::<f64>()
    }

    fn time_prior(&self) -> f64 {
        match self.model {
            Model::A => 0.0,
            Model::B => {
                Self::prior_norm(self.nu, self.time_active.len(), self.priors.beta)
                    + self
                        .time_active
                        .iter()
                        .map(|&d| self.occ_beta[self.time_size[d] as usize])
                        .sum::<f64>()
            }
        }
    }

    fn icl_from_block_terms(&self) -> f64 {
        let mut lik = 0.0;
        for &k in &self.node_active {
            for &g in &self.node_active {
                lik += self.cached(k, g);
            }
        }
        lik - self.log_fact_total + self.node_prior() + self.time_prior()
    }

    pub fn model(&self) -> Model {
        self.model
    }

    pub fn priors(&self) -> &Priors {
        &self.priors
    }

    /// Cached ICL, updated by each accepted move.
    pub fn log_icl(&self) -> f64 {
        self.log_icl
    }

    /// ICL after initialization and after every accepted move.
    pub fn trace(&self) -> &[f64] {
        &self.trace
    }

    pub fn moves(&self) -> MoveCounts {
        self.moves
    }

    /// Current node cluster of `i` (a slot index below `K_max`).
    pub fn node_label(&self, i: usize) -> usize {
        self.z[i]
    }

    pub fn interval_label(&self, u: usize) -> usize {
        self.y[u]
    }

    /// Non-empty node cluster slots, ascending.
    pub fn node_clusters(&self) -> &[usize] {
        &self.node_active
    }

    /// Non-empty time cluster slots, ascending (the intervals for model A).
    pub fn time_clusters(&self) -> &[usize] {
        &self.time_active
    }

    /// Exported node partition with empty slots removed.
    pub fn node_partition(&self) -> NodePartition {
        Partition::new(self.z.clone(), self.k_max)
            .expect("labels below k_max")
            .compact()
    }

    /// Exported time partition (model B only).
    pub fn time_partition(&self) -> Option<TimePartition> {
        match self.model {
            Model::A => None,
            Model::B => Some(
                Partition::new(self.y.clone(), self.d_max)
                    .expect("labels below d_max")
                    .compact(),
            ),
        }
    }

    /// ICL of the current partitions computed from scratch.
    pub fn full_log_icl(&self) -> Result<f64> {
        let z = self.node_partition();
        match self.time_partition() {
            None => log_icl_a(&block_stats_a(self.tensor, &z)?, &z, &self.priors),
            Some(y) => log_icl_b(&block_stats_b(self.tensor, &z, &y)?, &z, &y, &self.priors),
        }
    }

    // ---------------------------------------------------------------------
    // Node moves

    fn node_move_delta(&self, i: usize, l: usize) -> f64 {
        let kp = self.z[i];
        let nk = self.node_size[kp];
        let nl = self.node_size[l];
        let (nk1, nl1) = (nk - 1, nl + 1);
        let ai = |g: usize| self.agg(i, g);
        let out = &self.out_counts;
        let inn = &self.in_counts;
        let s = &self.counts;

        let mut new = 0.0;
        let mut old = 0.0;
        for &g in &self.node_active {
            if g == kp || g == l {
                continue;
            }
            let ng = self.node_size[g];
            let (a, b_kg, b_lg, b_gk, b_gl) = (
                ai(g),
                self.blk(kp, g),
                self.blk(l, g),
                self.blk(g, kp),
                self.blk(g, l),
            );
            new += self.layer_sum(nk1 * ng, |d| s[b_kg + d] - out[a + d]);
            new += self.layer_sum(nl1 * ng, |d| s[b_lg + d] + out[a + d]);
            new += self.layer_sum(ng * nk1, |d| s[b_gk + d] - inn[a + d]);
            new += self.layer_sum(ng * nl1, |d| s[b_gl + d] + inn[a + d]);
            old += self.cached(kp, g) + self.cached(l, g) + self.cached(g, kp) + self.cached(g, l);
        }
        let (ak, al) = (ai(kp), ai(l));
        let (b_kk, b_ll, b_kl, b_lk) = (
            self.blk(kp, kp),
            self.blk(l, l),
            self.blk(kp, l),
            self.blk(l, kp),
        );
        new += self.layer_sum(pair_count(nk1, nk1, true), |d| {
            s[b_kk + d] - out[ak + d] - inn[ak + d]
        });
        new += self.layer_sum(pair_count(nl1, nl1, true), |d| {
            s[b_ll + d] + out[al + d] + inn[al + d]
        });
        new += self.layer_sum(nk1 * nl1, |d| s[b_kl + d] + inn[ak + d] - out[al + d]);
        new += self.layer_sum(nl1 * nk1, |d| s[b_lk + d] + out[ak + d] - inn[al + d]);
        old += self.cached(kp, kp) + self.cached(l, l) + self.cached(kp, l) + self.cached(l, kp);

        let occ = &self.occ_alpha;
        let mut prior = Self::occupancy_term(occ, nk1) - Self::occupancy_term(occ, nk)
            + Self::occupancy_term(occ, nl1)
            - Self::occupancy_term(occ, nl);
        if nk1 == 0 {
            let k = self.node_active.len();
            prior += Self::prior_norm(self.n, k - 1, self.priors.alpha)
                - Self::prior_norm(self.n, k, self.priors.alpha);
        }
        new - old + prior
    }

    fn check_node_target(&self, i: usize, l: usize) -> Result<()> {
        if i >= self.n {
            return Err(Error::InvalidMove(format!(
                "node {i} outside 0..{}",
                self.n
            )));
        }
        if l >= self.k_max || self.node_size[l] == 0 {
            return Err(Error::InvalidMove(format!(
                "cluster {l} is not an active node cluster"
            )));
        }
        if self.z[i] == l {
            return Err(Error::InvalidMove(format!(
                "node {i} is already in cluster {l}"
            )));
        }
        Ok(())
    }

    /// ICL change from moving node `i` into the existing cluster `l`. If `i`
    /// is alone in its cluster, that cluster is retired and `K` drops by one.
    pub fn delta_exchange_node(&self, i: usize, l: usize) -> Result<f64> {
        self.check_node_target(i, l)?;
        Ok(self.node_move_delta(i, l))
    }

    /// Applies a node move and returns its delta.
    pub fn exchange_node(&mut self, i: usize, l: usize) -> Result<f64> {
        self.check_node_target(i, l)?;
        let delta = self.node_move_delta(i, l);
        self.apply_node_move(i, l, delta);
        Ok(delta)
    }

    fn apply_node_move(&mut self, i: usize, l: usize, delta: f64) {
        let kp = self.z[i];
        let (nu, km) = (self.nu, self.k_max);
        for gi in 0..self.node_active.len() {
            let g = self.node_active[gi];
            let a = self.agg(i, g);
            let (b_kg, b_lg, b_gk, b_gl) = (
                self.blk(kp, g),
                self.blk(l, g),
                self.blk(g, kp),
                self.blk(g, l),
            );
            for ti in 0..self.time_active.len() {
                let d = self.time_active[ti];
                let (oc, ol) = (self.out_counts[a + d], self.out_log_fact[a + d]);
                let (ic, il) = (self.in_counts[a + d], self.in_log_fact[a + d]);
                self.counts[b_kg + d] -= oc;
                self.counts[b_lg + d] += oc;
                self.counts[b_gk + d] -= ic;
                self.counts[b_gl + d] += ic;
                self.log_fact[b_kg + d] -= ol;
                self.log_fact[b_lg + d] += ol;
                self.log_fact[b_gk + d] -= il;
                self.log_fact[b_gl + d] += il;
            }
        }

        let with_intervals = self.model == Model::B;
        for j in 0..self.n {
            if j == i {
                continue;
            }
            let zj = self.z[j];
            let (j_k, j_l) = (self.agg(j, kp), self.agg(j, l));
            let to_j = self.tensor.pair(i, j);
            let from_j = self.tensor.pair(j, i);
            for u in 0..nu {
                let (b, a) = (to_j[u] as u64, from_j[u] as u64);
                if a == 0 && b == 0 {
                    continue;
                }
                let d = self.y[u];
                if a > 0 {
                    let lf = self.ln_fact.get(a);
                    self.out_counts[j_k + d] -= a;
                    self.out_counts[j_l + d] += a;
                    self.out_log_fact[j_k + d] -= lf;
                    self.out_log_fact[j_l + d] += lf;
                    if with_intervals {
                        let (from, to) = ((zj * km + kp) * nu + u, (zj * km + l) * nu + u);
                        self.interval_counts[from] -= a;
                        self.interval_counts[to] += a;
                        self.interval_log_fact[from] -= lf;
                        self.interval_log_fact[to] += lf;
                    }
                }
                if b > 0 {
                    let lf = self.ln_fact.get(b);
                    self.in_counts[j_k + d] -= b;
                    self.in_counts[j_l + d] += b;
                    self.in_log_fact[j_k + d] -= lf;
                    self.in_log_fact[j_l + d] += lf;
                    if with_intervals {
                        let (from, to) = ((kp * km + zj) * nu + u, (l * km + zj) * nu + u);
                        self.interval_counts[from] -= b;
                        self.interval_counts[to] += b;
                        self.interval_log_fact[from] -= lf;
                        self.interval_log_fact[to] += lf;
                    }
                }
            }
        }

        self.z[i] = l;
        self.node_size[kp] -= 1;
        self.node_size[l] += 1;
        if self.node_size[kp] == 0 {
            self.retire_node_cluster(kp);
        } else {
            self.refresh_cross(kp);
        }
        self.refresh_cross(l);
        self.accept(delta);
        self.moves.node_moves += 1;
    }

    fn retire_node_cluster(&mut self, k: usize) {
        self.node_active.retain(|&c| c != k);
        for g in 0..self.k_max {
            self.block_term[k * self.k_max + g] = 0.0;
            self.block_term[g * self.k_max + k] = 0.0;
        }
    }

    fn accept(&mut self, delta: f64) {
        self.log_icl += delta;
        self.trace.push(self.log_icl);
    }

    fn node_merge_delta(&self, k: usize, l: usize) -> f64 {
        let (nk, nl) = (self.node_size[k], self.node_size[l]);
        let nm = nk + nl;
        let s = &self.counts;
        let mut new = 0.0;
        let mut old = 0.0;
        for &g in &self.node_active {
            if g == k || g == l {
                continue;
            }
            let ng = self.node_size[g];
            let (b_kg, b_lg, b_gk, b_gl) = (
                self.blk(k, g),
                self.blk(l, g),
                self.blk(g, k),
                self.blk(g, l),
            );
            new += self.layer_sum(nm * ng, |d| s[b_kg + d] + s[b_lg + d]);
            new += self.layer_sum(ng * nm, |d| s[b_gk + d] + s[b_gl + d]);
            old += self.cached(k, g) + self.cached(l, g) + self.cached(g, k) + self.cached(g, l);
        }
        let (b_kk, b_ll, b_kl, b_lk) = (
            self.blk(k, k),
            self.blk(l, l),
            self.blk(k, l),
            self.blk(l, k),
        );
        new += self.layer_sum(pair_count(nm, nm, true), |d| {
            s[b_kk + d] + s[b_ll + d] + s[b_kl + d] + s[b_lk + d]
        });
        old += self.cached(k, k) + self.cached(l, l) + self.cached(k, l) + self.cached(l, k);

        let occ = &self.occ_alpha;
        let kk = self.node_active.len();
        let prior = Self::occupancy_term(occ, nm)
            - Self::occupancy_term(occ, nk)
            - Self::occupancy_term(occ, nl)
            + Self::prior_norm(self.n, kk - 1, self.priors.alpha)
            - Self::prior_norm(self.n, kk, self.priors.alpha);
        new - old + prior
    }

    fn check_node_merge(&self, k: usize, l: usize) -> Result<()> {
        for c in [k, l] {
            if c >= self.k_max || self.node_size[c] == 0 {
                return Err(Error::InvalidMove(format!(
                    "cluster {c} is not an active node cluster"
                )));
            }
        }
        if k == l {
            return Err(Error::InvalidMove(format!(
                "cannot merge cluster {k} with itself"
            )));
        }
        Ok(())
    }

    /// ICL change from merging node cluster `k` into `l` (`K` drops by one).
    pub fn delta_merge_nodes(&self, k: usize, l: usize) -> Result<f64> {
        self.check_node_merge(k, l)?;
        Ok(self.node_merge_delta(k, l))
    }

    pub fn merge_nodes(&mut self, k: usize, l: usize) -> Result<f64> {
        self.check_node_merge(k, l)?;
        let delta = self.node_merge_delta(k, l);
        self.apply_node_merge(k, l, delta);
        Ok(delta)
    }

    fn apply_node_merge(&mut self, k: usize, l: usize, delta: f64) {
        let (dm, nu) = (self.d_max, self.nu);
        let merge_into = |v: &mut [u64], from: usize, to: usize, len: usize| {
            for d in 0..len {
                v[to + d] += v[from + d];
                v[from + d] = 0;
            }
        };
        let merge_into_f = |v: &mut [f64], from: usize, to: usize, len: usize| {
            for d in 0..len {
                v[to + d] += v[from + d];
                v[from + d] = 0.0;
            }
        };
        // Rows first, then columns: the (k, k) block lands in (l, l).
        for gi in 0..self.node_active.len() {
            let g = self.node_active[gi];
            let (from, to) = (self.blk(k, g), self.blk(l, g));
            merge_into(&mut self.counts, from, to, dm);
            merge_into_f(&mut self.log_fact, from, to, dm);
            if self.model == Model::B {
                let (from, to) = (self.ival(k, g), self.ival(l, g));
                merge_into(&mut self.interval_counts, from, to, nu);
                merge_into_f(&mut self.interval_log_fact, from, to, nu);
            }
        }
        for gi in 0..self.node_active.len() {
            let g = self.node_active[gi];
            let (from, to) = (self.blk(g, k), self.blk(g, l));
            merge_into(&mut self.counts, from, to, dm);
            merge_into_f(&mut self.log_fact, from, to, dm);
            if self.model == Model::B {
                let (from, to) = (self.ival(g, k), self.ival(g, l));
                merge_into(&mut self.interval_counts, from, to, nu);
                merge_into_f(&mut self.interval_log_fact, from, to, nu);
            }
        }
        for i in 0..self.n {
            let (from, to) = (self.agg(i, k), self.agg(i, l));
            merge_into(&mut self.out_counts, from, to, dm);
            merge_into(&mut self.in_counts, from, to, dm);
            merge_into_f(&mut self.out_log_fact, from, to, dm);
            merge_into_f(&mut self.in_log_fact, from, to, dm);
            if self.z[i] == k {
                self.z[i] = l;
            }
        }
        self.node_size[l] += self.node_size[k];
        self.node_size[k] = 0;
        self.retire_node_cluster(k);
        self.refresh_cross(l);
        self.accept(delta);
        self.moves.node_merges += 1;
    }

    // ---------------------------------------------------------------------
    // Interval moves (model B)

    fn require_model_b(&self) -> Result<()> {
        match self.model {
            Model::B => Ok(()),
            Model::A => Err(Error::InvalidMove("interval moves need model B".into())),
        }
    }

    fn time_norm_change(&self, removed: bool) -> f64 {
        if !removed {
            return 0.0;
        }
        let d = self.time_active.len();
        Self::prior_norm(self.nu, d - 1, self.priors.beta)
            - Self::prior_norm(self.nu, d, self.priors.beta)
    }

    fn interval_move_delta(&self, u: usize, e: usize) -> f64 {
        let d = self.y[u];
        let (cd, ce) = (self.time_size[d], self.time_size[e]);
        let mut change = 0.0;
        for &k in &self.node_active {
            for &g in &self.node_active {
                let p = self.pairs(k, g);
                if p == 0 {
                    continue;
                }
                let v = self.interval_counts[self.ival(k, g) + u];
                let b = self.blk(k, g);
                let (sd, se) = (self.counts[b + d], self.counts[b + e]);
                change += self.cell_term(sd - v, p * (cd - 1))
                    + self.cell_term(se + v, p * (ce + 1))
                    - self.cell_term(sd, p * cd)
                    - self.cell_term(se, p * ce);
            }
        }
        let occ = &self.occ_beta;
        change + Self::occupancy_term(occ, cd - 1) - Self::occupancy_term(occ, cd)
            + Self::occupancy_term(occ, ce + 1)
            - Self::occupancy_term(occ, ce)
            + self.time_norm_change(cd == 1)
    }

    fn check_interval_target(&self, u: usize, e: usize) -> Result<()> {
        self.require_model_b()?;
        if u >= self.nu {
            return Err(Error::InvalidMove(format!(
                "interval {u} outside 0..{}",
                self.nu
            )));
        }
        if e >= self.d_max || self.time_size[e] == 0 {
            return Err(Error::InvalidMove(format!(
                "time cluster {e} is not active"
            )));
        }
        if self.y[u] == e {
            return Err(Error::InvalidMove(format!(
                "interval {u} is already in time cluster {e}"
            )));
        }
        Ok(())
    }

    /// ICL change from moving interval `u` into the existing time cluster `e`.
    pub fn delta_exchange_interval(&self, u: usize, e: usize) -> Result<f64> {
        self.check_interval_target(u, e)?;
        Ok(self.interval_move_delta(u, e))
    }

    pub fn exchange_interval(&mut self, u: usize, e: usize) -> Result<f64> {
        self.check_interval_target(u, e)?;
        let delta = self.interval_move_delta(u, e);
        self.apply_interval_move(u, e, delta);
        Ok(delta)
    }

    fn apply_interval_move(&mut self, u: usize, e: usize, delta: f64) {
        let d = self.y[u];
        for ki in 0..self.node_active.len() {
            let k = self.node_active[ki];
            for gi in 0..self.node_active.len() {
                let g = self.node_active[gi];
                let q = self.ival(k, g) + u;
                let (v, lf) = (self.interval_counts[q], self.interval_log_fact[q]);
                let b = self.blk(k, g);
                self.counts[b + d] -= v;
                self.counts[b + e] += v;
                self.log_fact[b + d] -= lf;
                self.log_fact[b + e] += lf;
            }
        }
        for i in 0..self.n {
            let zi = self.z[i];
            for j in 0..self.n {
                if i == j {
                    continue;
                }
                let c = self.tensor.get(i, j, u) as u64;
                if c == 0 {
                    continue;
                }
                let lf = self.ln_fact.get(c);
                let (o, p) = (self.agg(i, self.z[j]), self.agg(j, zi));
                self.out_counts[o + d] -= c;
                self.out_counts[o + e] += c;
                self.out_log_fact[o + d] -= lf;
                self.out_log_fact[o + e] += lf;
                self.in_counts[p + d] -= c;
                self.in_counts[p + e] += c;
                self.in_log_fact[p + d] -= lf;
                self.in_log_fact[p + e] += lf;
            }
        }
        self.y[u] = e;
        self.time_size[d] -= 1;
        self.time_size[e] += 1;
        if self.time_size[d] == 0 {
            self.time_active.retain(|&c| c != d);
        }
        self.refresh_all_block_terms();
        self.accept(delta);
        self.moves.interval_moves += 1;
    }

    fn interval_merge_delta(&self, d: usize, e: usize) -> f64 {
        let (cd, ce) = (self.time_size[d], self.time_size[e]);
        let mut change = 0.0;
        for &k in &self.node_active {
            for &g in &self.node_active {
                let p = self.pairs(k, g);
                if p == 0 {
                    continue;
                }
                let b = self.blk(k, g);
                let (sd, se) = (self.counts[b + d], self.counts[b + e]);
                change += self.cell_term(sd + se, p * (cd + ce))
                    - self.cell_term(sd, p * cd)
                    - self.cell_term(se, p * ce);
            }
        }
        let occ = &self.occ_beta;
        change + Self::occupancy_term(occ, cd + ce)
            - Self::occupancy_term(occ, cd)
            - Self::occupancy_term(occ, ce)
            + self.time_norm_change(true)
    }

    fn check_interval_merge(&self, d: usize, e: usize) -> Result<()> {
        self.require_model_b()?;
        for c in [d, e] {
            if c >= self.d_max || self.time_size[c] == 0 {
                return Err(Error::InvalidMove(format!(
                    "time cluster {c} is not active"
                )));
            }
        }
        if d == e {
            return Err(Error::InvalidMove(format!(
                "cannot merge time cluster {d} with itself"
            )));
        }
        Ok(())
    }

    /// ICL change from merging time cluster `d` into `e`.
    pub fn delta_merge_intervals(&self, d: usize, e: usize) -> Result<f64> {
        self.check_interval_merge(d, e)?;
        Ok(self.interval_merge_delta(d, e))
    }

    pub fn merge_intervals(&mut self, d: usize, e: usize) -> Result<f64> {
        self.check_interval_merge(d, e)?;
        let delta = self.interval_merge_delta(d, e);
        self.apply_interval_merge(d, e, delta);
        Ok(delta)
    }

    fn apply_interval_merge(&mut self, d: usize, e: usize, delta: f64) {
        for k in 0..self.k_max {
            for g in 0..self.k_max {
                let b = self.blk(k, g);
                self.counts[b + e] += self.counts[b + d];
                self.counts[b + d] = 0;
                self.log_fact[b + e] += self.log_fact[b + d];
                self.log_fact[b + d] = 0.0;
            }
        }
        for i in 0..self.n {
            for g in 0..self.k_max {
                let a = self.agg(i, g);
                self.out_counts[a + e] += self.out_counts[a + d];
                self.out_counts[a + d] = 0;
                self.in_counts[a + e] += self.in_counts[a + d];
                self.in_counts[a + d] = 0;
                self.out_log_fact[a + e] += self.out_log_fact[a + d];
                self.out_log_fact[a + d] = 0.0;
                self.in_log_fact[a + e] += self.in_log_fact[a + d];
                self.in_log_fact[a + d] = 0.0;
            }
        }
        for label in self.y.iter_mut() {
            if *label == d {
                *label = e;
            }
        }
        self.time_size[e] += self.time_size[d];
        self.time_size[d] = 0;
        self.time_active.retain(|&c| c != d);
        self.refresh_all_block_terms();
        self.accept(delta);
        self.moves.interval_merges += 1;
    }

    // ---------------------------------------------------------------------
    // Passes

    /// Best strictly improving target for one item, lowest slot on ties.
    fn best_target(&self, axis: Axis, item: usize, epsilon: f64) -> Option<(usize, f64)> {
        let (current, candidates) = match axis {
            Axis::Nodes => (self.z[item], &self.node_active),
            Axis::Intervals => (self.y[item], &self.time_active),
        };
        let mut best: Option<(usize, f64)> = None;
        let mut threshold = epsilon;
        for &target in candidates {
            if target == current {
                continue;
            }
            let delta = match axis {
                Axis::Nodes => self.node_move_delta(item, target),
                Axis::Intervals => self.interval_move_delta(item, target),
            };
            if delta > threshold {
                threshold = delta;
                best = Some((target, delta));
            }
        }
        best
    }

    /// One shuffled sweep over every node (or interval); returns accepted moves.
    pub fn exchange_sweep<R: Rng + ?Sized>(
        &mut self,
        axis: Axis,
        epsilon: f64,
        rng: &mut R,
    ) -> usize {
        let n_items = match (axis, self.model) {
            (Axis::Intervals, Model::A) => return 0,
            (Axis::Intervals, Model::B) => self.nu,
            (Axis::Nodes, _) => self.n,
        };
        let mut order: Vec<usize> = (0..n_items).collect();
        order.shuffle(rng);
        let mut accepted = 0;
        for item in order {
            if let Some((target, delta)) = self.best_target(axis, item, epsilon) {
                match axis {
                    Axis::Nodes => self.apply_node_move(item, target, delta),
                    Axis::Intervals => self.apply_interval_move(item, target, delta),
                }
                accepted += 1;
            }
        }
        accepted
    }

    /// Greedy exchange: sweeps until a full sweep accepts nothing.
    pub fn greedy_exchange_pass<R: Rng + ?Sized>(
        &mut self,
        axis: Axis,
        epsilon: f64,
        rng: &mut R,
    ) -> usize {
        let mut total = 0;
        loop {
            let accepted = self.exchange_sweep(axis, epsilon, rng);
            total += accepted;
            if accepted == 0 {
                return total;
            }
        }
    }

    /// Greedy merge: applies the best strictly improving merge until none is
    /// left. The higher slot is merged into the lower one.
    pub fn greedy_merge_pass(&mut self, axis: Axis, epsilon: f64) -> usize {
        if axis == Axis::Intervals && self.model == Model::A {
            return 0;
        }
        let mut merges = 0;
        loop {
            let active = match axis {
                Axis::Nodes => &self.node_active,
                Axis::Intervals => &self.time_active,
            };
            let mut best: Option<(usize, usize, f64)> = None;
            let mut threshold = epsilon;
            for (idx, &keep) in active.iter().enumerate() {
                for &gone in &active[idx + 1..] {
                    let delta = match axis {
                        Axis::Nodes => self.node_merge_delta(gone, keep),
                        Axis::Intervals => self.interval_merge_delta(gone, keep),
                    };
                    if delta > threshold {
                        threshold = delta;
                        best = Some((gone, keep, delta));
                    }
                }
            }
            match best {
                Some((gone, keep, delta)) => {
                    match axis {
                        Axis::Nodes => self.apply_node_merge(gone, keep, delta),
                        Axis::Intervals => self.apply_interval_merge(gone, keep, delta),
                    }
                    merges += 1;
                }
                None => return merges,
            }
        }
    }

    /// Runs `strategy` to convergence.
    pub fn optimize<R: Rng + ?Sized>(&mut self, strategy: Strategy, epsilon: f64, rng: &mut R) {
        let axis_pass = |state: &mut Self, axis: Axis, rng: &mut R| {
            state.greedy_exchange_pass(axis, epsilon, rng);
            state.greedy_merge_pass(axis, epsilon);
        };
        match strategy {
            Strategy::NodesOnly => axis_pass(self, Axis::Nodes, rng),
            Strategy::NodesThenTimes => {
                axis_pass(self, Axis::Nodes, rng);
                axis_pass(self, Axis::Intervals, rng);
            }
            Strategy::TimesThenNodes => {
                axis_pass(self, Axis::Intervals, rng);
                axis_pass(self, Axis::Nodes, rng);
            }
            Strategy::Alternating => {
                loop {
                    let nodes = self.exchange_sweep(Axis::Nodes, epsilon, rng);
                    let times = self.exchange_sweep(Axis::Intervals, epsilon, rng);
                    if nodes == 0 && times == 0 {
                        break;
                    }
                }
                self.greedy_merge_pass(Axis::Nodes, epsilon);
                self.greedy_merge_pass(Axis::Intervals, epsilon);
            }
        }
    }

    /// Compares every maintained table with a from-scratch reconstruction and
    /// the cached ICL with a full recomputation.
    pub fn verify(&self) -> core::result::Result<(), IntegrityError> {
        let z = Partition::new(self.z.clone(), self.k_max).expect("labels below k_max");
        let y = match self.model {
            Model::A => None,
            Model::B => {
                Some(Partition::new(self.y.clone(), self.d_max).expect("labels below d_max"))
            }
        };
        let fresh =
            Self::new(self.tensor, &z, y.as_ref(), self.priors).map_err(|e| IntegrityError {
                table: "rebuild",
                detail: format!("{e}"),
            })?;

        let exact = |table: &'static str, a: &[u64], b: &[u64]| match a
            .iter()
            .zip(b)
            .position(|(x, y)| x != y)
        {
            Some(p) => Err(IntegrityError {
                table,
                detail: format!("entry {p}: {} vs {}", a[p], b[p]),
            }),
            None => Ok(()),
        };
        let close = |table: &'static str, a: &[f64], b: &[f64]| {
            for (p, (x, y)) in a.iter().zip(b).enumerate() {
                if (x - y).abs() > FLOAT_TOLERANCE * x.abs().max(1.0) {
                    return Err(IntegrityError {
                        table,
                        detail: format!("entry {p}: {x} vs {y}"),
                    });
                }
            }
            Ok(())
        };
        exact("node sizes", &self.node_size, &fresh.node_size)?;
        exact("time sizes", &self.time_size, &fresh.time_size)?;
        if self.node_active != fresh.node_active || self.time_active != fresh.time_active {
            return Err(IntegrityError {
                table: "active clusters",
                detail: "slot lists differ".into(),
            });
        }
        exact("block counts", &self.counts, &fresh.counts)?;
        exact(
            "outgoing node aggregates",
            &self.out_counts,
            &fresh.out_counts,
        )?;
        exact(
            "incoming node aggregates",
            &self.in_counts,
            &fresh.in_counts,
        )?;
        exact(
            "interval block counts",
            &self.interval_counts,
            &fresh.interval_counts,
        )?;
        close("block log-factorials", &self.log_fact, &fresh.log_fact)?;
        close(
            "outgoing log-factorials",
            &self.out_log_fact,
            &fresh.out_log_fact,
        )?;
        close(
            "incoming log-factorials",
            &self.in_log_fact,
            &fresh.in_log_fact,
        )?;
        close(
            "interval log-factorials",
            &self.interval_log_fact,
            &fresh.interval_log_fact,
        )?;
        close("block terms", &self.block_term, &fresh.block_term)?;

        let full = self.full_log_icl().map_err(|e| IntegrityError {
            table: "log-ICL",
            detail: format!("{e}"),
        })?;
        close("log-ICL", &[self.log_icl], &[full])
    }
}

// -------------------------------------------------------------------------
// Restarts

/// Outcome of one randomly initialized search.
#[derive(Debug, Clone, PartialEq)]
pub struct RestartOutcome {
    pub restart: usize,
    pub node_partition: NodePartition,
    pub time_partition: Option<TimePartition>,
    /// Final ICL recomputed from scratch.
    pub log_icl: f64,
    /// Final ICL as accumulated by the search.
    pub cached_log_icl: f64,
    pub trace: Vec<f64>,
    pub moves: MoveCounts,
    /// `None` when every maintained table matched its reconstruction.
    pub integrity_error: Option<IntegrityError>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub best: usize,
    pub restarts: Vec<RestartOutcome>,
}

impl FitResult {
    /// Keeps the restart with the highest final ICL (earliest on ties).
    pub fn from_restarts(restarts: Vec<RestartOutcome>) -> Result<Self> {
        let best = restarts
            .iter()
            .enumerate()
            .fold(None::<(usize, f64)>, |acc, (idx, r)| match acc {
                Some((_, v)) if v >= r.log_icl => acc,
                _ => Some((idx, r.log_icl)),
            })
            .map(|(idx, _)| idx)
            .ok_or_else(|| Error::InvalidConfig("no restarts to reduce".into()))?;
        Ok(Self { best, restarts })
    }

    pub fn best_restart(&self) -> &RestartOutcome {
        &self.restarts[self.best]
    }

    pub fn node_partition(&self) -> &NodePartition {
        &self.best_restart().node_partition
    }

    pub fn time_partition(&self) -> Option<&TimePartition> {
        self.best_restart().time_partition.as_ref()
    }

    pub fn log_icl(&self) -> f64 {
        self.best_restart().log_icl
    }
}

/// Random stream for one restart: stream `restart` of the seeded generator,
/// so restarts are reproducible in any order.
pub fn restart_rng(seed: u64, restart: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(restart as u64);
    rng
}

pub fn run_restart(
    tensor: &InteractionTensor,
    config: &SearchConfig,
    restart: usize,
) -> Result<RestartOutcome> {
    let mut rng = restart_rng(config.seed, restart);
    let mut state = SearchState::random(tensor, config, &mut rng)?;
    state.optimize(config.strategy, config.epsilon, &mut rng);
    let log_icl = state.full_log_icl()?;
    Ok(RestartOutcome {
        restart,
        node_partition: state.node_partition(),
        time_partition: state.time_partition(),
        log_icl,
        cached_log_icl: state.log_icl(),
        trace: state.trace.clone(),
        moves: state.moves(),
        integrity_error: state.verify().err(),
    })
}

/// Runs every restart sequentially and keeps the best.
pub fn run(tensor: &InteractionTensor, config: &SearchConfig) -> Result<FitResult> {
    config.validate(tensor)?;
    let restarts = (0..config.n_restarts)
        .map(|r| run_restart(tensor, config, r))
        .collect::<Result<Vec<_>>>()?;
    FitResult::from_restarts(restarts)
}
