//! Result files. Every CSV starts with `#` comment lines carrying the
//! configuration hash and the seed; JSON files carry them as fields.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use dynsbm_core::intensity::all_curves;
use dynsbm_core::{
    block_stats_a, block_stats_b, estimate_pi_a, estimate_pi_b, IncrementTable, InteractionTensor,
    NodePartition, TimePartition,
};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};
use crate::io::NodeDictionary;

/// Reproducibility stamp of one run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Provenance {
    /// Hex SHA-256 of the canonical JSON configuration.
    pub config_hash: String,
    pub seed: u64,
}

impl Provenance {
    pub fn new(config: &impl Serialize, seed: u64) -> Self {
        let bytes = serde_json::to_vec(config).expect("configurations serialize");
        Self {
            config_hash: hex::encode(Sha256::digest(&bytes)),
            seed,
        }
    }

    pub fn write_comments(&self, out: &mut impl Write) -> Result<()> {
        writeln!(
            out,
            "# dynsbm config_sha256={} seed={}",
            self.config_hash, self.seed
        )?;
        Ok(())
    }
}

/// Creates `path` and runs `write` on a buffered handle; IO errors are
/// reported against `path`.
pub fn write_file(
    path: &Path,
    write: impl FnOnce(&mut BufWriter<File>) -> Result<()>,
) -> Result<()> {
    let with_path = |e: CliError| match e {
        CliError::Io { source, .. } => CliError::Io {
            path: path.to_path_buf(),
            source,
        },
        other => other,
    };
    let mut out = BufWriter::new(File::create(path).map_err(CliError::io(path))?);
    write(&mut out).map_err(with_path)?;
    out.flush().map_err(CliError::io(path))
}

/// `node,cluster` with original ids and 1-based clusters.
pub fn write_node_assignments(
    out: &mut impl Write,
    z: &NodePartition,
    nodes: &NodeDictionary,
    provenance: &Provenance,
) -> Result<()> {
    provenance.write_comments(out)?;
    writeln!(out, "node,cluster")?;
    for (i, &k) in z.labels().iter().enumerate() {
        writeln!(out, "{},{}", nodes.id(i), k + 1)?;
    }
    Ok(())
}

/// `interval,start,end,cluster`, 1-based.
pub fn write_time_assignments(
    out: &mut impl Write,
    y: &TimePartition,
    tensor: &InteractionTensor,
    provenance: &Provenance,
) -> Result<()> {
    provenance.write_comments(out)?;
    writeln!(out, "interval,start,end,cluster")?;
    for (u, &d) in y.labels().iter().enumerate() {
        let (lo, hi) = tensor.grid().bounds(u);
        writeln!(out, "{},{},{},{}", u + 1, lo, hi, d + 1)?;
    }
    Ok(())
}

/// Increment estimates and the interval-to-layer map for either model.
pub fn estimate_increments(
    tensor: &InteractionTensor,
    z: &NodePartition,
    y: Option<&TimePartition>,
) -> Result<(IncrementTable, Vec<usize>)> {
    Ok(match y {
        None => (
            estimate_pi_a(&block_stats_a(tensor, z)?),
            (0..tensor.n_intervals()).collect(),
        ),
        Some(y) => (
            estimate_pi_b(&block_stats_b(tensor, z, y)?, y)?,
            y.labels().to_vec(),
        ),
    })
}

/// One row per block pair and interval: `k,g,u,t_u,pi_hat,lambda_hat`
/// (1-based). Blocks without node pairs are written with `NA`.
pub fn write_intensities(
    out: &mut impl Write,
    tensor: &InteractionTensor,
    z: &NodePartition,
    y: Option<&TimePartition>,
    provenance: &Provenance,
) -> Result<()> {
    let (table, layers) = estimate_increments(tensor, z, y)?;
    let curves = all_curves(&table, &layers, tensor.grid())?;
    let grid = tensor.grid();
    provenance.write_comments(out)?;
    writeln!(out, "k,g,u,t_u,pi_hat,lambda_hat")?;
    let k = table.n_clusters();
    for a in 0..k {
        for b in 0..k {
            let curve = curves.iter().find(|c| c.block == (a, b));
            for u in 0..grid.n_intervals() {
                let t = grid.breakpoints()[u + 1];
                match curve {
                    Some(c) => writeln!(
                        out,
                        "{},{},{},{},{},{}",
                        a + 1,
                        b + 1,
                        u + 1,
                        t,
                        c.increments[u],
                        c.cumulative[u + 1]
                    ),
                    None => writeln!(out, "{},{},{},{},NA,NA", a + 1, b + 1, u + 1, t),
                }?;
            }
        }
    }
    Ok(())
}

/// Observed interactions of every block pair accumulated up to each
/// breakpoint, raw and per ordered node pair: `k,g,t,count,per_pair`.
pub fn write_cumulative_counts(
    out: &mut impl Write,
    tensor: &InteractionTensor,
    z: &NodePartition,
    provenance: &Provenance,
) -> Result<()> {
    let stats = block_stats_a(tensor, z)?;
    let grid = tensor.grid();
    provenance.write_comments(out)?;
    writeln!(out, "k,g,t,count,per_pair")?;
    for a in 0..stats.n_clusters() {
        for b in 0..stats.n_clusters() {
            let pairs = stats.pair_count(a, b);
            let mut acc = 0u64;
            for (u, &t) in grid.breakpoints().iter().enumerate() {
                if u > 0 {
                    acc += stats.count(a, b, u - 1);
                }
                let per_pair = if pairs == 0 {
                    "NA".to_string()
                } else {
                    (acc as f64 / pairs as f64).to_string()
                };
                writeln!(out, "{},{},{},{},{}", a + 1, b + 1, t, acc, per_pair)?;
            }
        }
    }
    Ok(())
}

/// Estimated integrated intensities including `Λ(0) = 0`: `k,g,t,lambda_hat`.
pub fn write_intensity_curves(
    out: &mut impl Write,
    tensor: &InteractionTensor,
    z: &NodePartition,
    y: Option<&TimePartition>,
    provenance: &Provenance,
) -> Result<()> {
    let (table, layers) = estimate_increments(tensor, z, y)?;
    let curves = all_curves(&table, &layers, tensor.grid())?;
    provenance.write_comments(out)?;
    writeln!(out, "k,g,t,lambda_hat")?;
    for c in &curves {
        for (t, l) in tensor.grid().breakpoints().iter().zip(&c.cumulative) {
            writeln!(out, "{},{},{},{}", c.block.0 + 1, c.block.1 + 1, t, l)?;
        }
    }
    Ok(())
}

/// Interval colouring by time cluster, with the total interaction count of
/// each interval: `interval,start,end,cluster,total`.
pub fn write_interval_series(
    out: &mut impl Write,
    tensor: &InteractionTensor,
    y: &TimePartition,
    provenance: &Provenance,
) -> Result<()> {
    let mut totals = vec![0u64; tensor.n_intervals()];
    for (_, _, u, c) in tensor.nonzero() {
        totals[u] += c as u64;
    }
    provenance.write_comments(out)?;
    writeln!(out, "interval,start,end,cluster,total")?;
    for (u, &d) in y.labels().iter().enumerate() {
        let (lo, hi) = tensor.grid().bounds(u);
        writeln!(out, "{},{},{},{},{}", u + 1, lo, hi, d + 1, totals[u])?;
    }
    Ok(())
}

/// `index,node`: dense 1-based index of every original node id.
pub fn write_dictionary(
    out: &mut impl Write,
    nodes: &NodeDictionary,
    provenance: &Provenance,
) -> Result<()> {
    provenance.write_comments(out)?;
    writeln!(out, "index,node")?;
    for (i, id) in nodes.ids().iter().enumerate() {
        writeln!(out, "{},{}", i + 1, id)?;
    }
    Ok(())
}

/// `restart,step,log_icl` for every accepted move of every restart.
pub fn write_traces(
    out: &mut impl Write,
    traces: &[(usize, &[f64])],
    provenance: &Provenance,
) -> Result<()> {
    provenance.write_comments(out)?;
    writeln!(out, "restart,step,log_icl")?;
    for (r, trace) in traces {
        for (s, v) in trace.iter().enumerate() {
            writeln!(out, "{},{},{}", r + 1, s, v)?;
        }
    }
    Ok(())
}
