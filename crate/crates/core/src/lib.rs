//! Clustering of dynamic directed interaction networks by exact maximization
//! of the integrated classification likelihood (ICL) of a block model whose
//! interactions are non-homogeneous Poisson processes.
//!
//! Interactions are binned into an `N x N x U` count tensor. Model A gives
//! every block pair a free intensity increment per interval; model B ties
//! the increments of intervals that share a time cluster. Both ICLs are
//! closed-form under Gamma and Dirichlet priors and are maximized by greedy
//! node (and interval) exchanges followed by greedy merges.
//!
//! The crate is `no_std` and only needs `alloc`.

#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod error;
pub mod evaluation;
pub mod intensity;
pub mod model;
pub mod search;
pub mod simulate;
mod special;

pub use error::{Error, Result};
pub use evaluation::{adjusted_rand_index, exhaustive_icl_optimum, ExhaustiveOptimum};
pub use intensity::{cumulative, estimate_pi_a, estimate_pi_b, IncrementTable, IntensityEstimate};
pub use model::{
    block_stats_a, block_stats_b, build_tensor, log_icl_a, log_icl_b, log_partition_prior,
    BlockStats, BlockStatsA, BlockStatsB, Event, InteractionTensor, NodePartition, Partition,
    Priors, TimeGrid, TimePartition,
};
pub use search::{
    restart_rng, run, run_restart, Axis, FitResult, IntegrityError, Model, MoveCounts,
    RestartOutcome, SearchConfig, SearchState, Strategy,
};
pub use simulate::{
    sample_events, sample_memberships, sample_tensor, scenario_preset, SimScenario,
};
