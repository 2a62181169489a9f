use std::path::{Path, PathBuf};
use std::time::Instant;

use dynsbm_core::{FitResult, MoveCounts, NodePartition, TimePartition};
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::fit::fit_parallel;
use crate::io::{read_events, records_to_dataset, Dataset, GridSpec, InputFormat};
use crate::output::{
    write_cumulative_counts, write_dictionary, write_file, write_intensities,
    write_intensity_curves, write_interval_series, write_node_assignments, write_time_assignments,
    write_traces, Provenance,
};
use crate::tensor_file::read_tensor;

/// Reads any supported input into a tensor.
pub fn load_dataset(
    path: &Path,
    format: InputFormat,
    columns: Option<&[usize]>,
    grid: &GridSpec,
    interval_base: u64,
) -> Result<Dataset> {
    match format {
        InputFormat::Tensor => {
            if columns.is_some() || *grid != GridSpec::default() {
                return Err(CliError::Usage(
                    "tensor files carry their own layout; drop the column and grid options".into(),
                ));
            }
            read_tensor(path)
        }
        _ => {
            let records = read_events(path, format, columns)?;
            records_to_dataset(&records, grid, interval_base).map_err(|e| e.in_file(path))
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RestartSummary {
    pub restart: usize,
    pub log_icl: f64,
    pub n_clusters: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_time_clusters: Option<usize>,
    pub seconds: f64,
    pub node_moves: usize,
    pub node_merges: usize,
    pub interval_moves: usize,
    pub interval_merges: usize,
    /// Empty when every maintained table matched its reconstruction.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub integrity_error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunMetadata {
    pub config_hash: String,
    pub seed: u64,
    pub model: String,
    pub strategy: String,
    pub n_nodes: usize,
    pub n_intervals: usize,
    pub total_interactions: u64,
    pub k_max: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d_max: Option<usize>,
    pub best_restart: usize,
    pub log_icl: f64,
    pub n_clusters: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_time_clusters: Option<usize>,
    pub total_seconds: f64,
    pub restarts: Vec<RestartSummary>,
}

/// Everything a fit produced, for callers that want more than the files.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub data: Dataset,
    pub fit: FitResult,
    pub metadata: RunMetadata,
    pub files: Vec<PathBuf>,
}

impl RunOutcome {
    pub fn node_partition(&self) -> &NodePartition {
        self.fit.node_partition()
    }

    pub fn time_partition(&self) -> Option<&TimePartition> {
        self.fit.time_partition()
    }
}

/// Loads the input, runs every restart and writes the requested outputs
/// into `config.output_dir`.
pub fn run_pipeline(config: &RunConfig) -> Result<RunOutcome> {
    config.validate()?;
    let start = Instant::now();
    let data = load_dataset(
        &config.input,
        config.format,
        config.columns.as_deref(),
        &config.grid,
        config.interval_base,
    )?;
    if data.tensor.n_nodes() < 2 {
        return Err(CliError::Data(format!(
            "{}: need at least two nodes, found {}",
            config.input.display(),
            data.tensor.n_nodes()
        )));
    }
    let search = config.search_config(data.tensor.n_nodes(), data.tensor.n_intervals())?;
    search
        .validate(&data.tensor)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let (fit, seconds) = fit_parallel(&data.tensor, &search)?;
    if let Some(r) = fit.restarts.iter().find(|r| r.integrity_error.is_some()) {
        return Err(CliError::Data(format!(
            "restart {}: {}",
            r.restart + 1,
            r.integrity_error.as_ref().unwrap()
        )));
    }

    let provenance = Provenance::new(&config.hashed_view(), config.seed);
    let metadata = metadata(
        &data,
        &fit,
        &seconds,
        &search,
        &provenance,
        start.elapsed().as_secs_f64(),
    );
    let files = write_outputs(config, &data, &fit, &metadata, &provenance)?;
    Ok(RunOutcome {
        data,
        fit,
        metadata,
        files,
    })
}

fn metadata(
    data: &Dataset,
    fit: &FitResult,
    seconds: &[f64],
    search: &dynsbm_core::SearchConfig,
    provenance: &Provenance,
    total_seconds: f64,
) -> RunMetadata {
    let restarts = fit
        .restarts
        .iter()
        .zip(seconds)
        .map(|(r, &s)| {
            let MoveCounts {
                node_moves,
                node_merges,
                interval_moves,
                interval_merges,
            } = r.moves;
            RestartSummary {
                restart: r.restart + 1,
                log_icl: r.log_icl,
                n_clusters: r.node_partition.n_clusters(),
                n_time_clusters: r.time_partition.as_ref().map(|y| y.n_clusters()),
                seconds: s,
                node_moves,
                node_merges,
                interval_moves,
                interval_merges,
                integrity_error: r.integrity_error.as_ref().map(|e| e.to_string()),
            }
        })
        .collect();
    let model_b = search.model == dynsbm_core::Model::B;
    RunMetadata {
        config_hash: provenance.config_hash.clone(),
        seed: provenance.seed,
        model: format!("{:?}", search.model),
        strategy: format!("{:?}", search.strategy),
        n_nodes: data.tensor.n_nodes(),
        n_intervals: data.tensor.n_intervals(),
        total_interactions: data.tensor.total(),
        k_max: search.k_max,
        d_max: model_b.then_some(search.d_max),
        best_restart: fit.best + 1,
        log_icl: fit.log_icl(),
        n_clusters: fit.node_partition().n_clusters(),
        n_time_clusters: fit.time_partition().map(|y| y.n_clusters()),
        total_seconds,
        restarts,
    }
}

fn write_outputs(
    config: &RunConfig,
    data: &Dataset,
    fit: &FitResult,
    metadata: &RunMetadata,
    provenance: &Provenance,
) -> Result<Vec<PathBuf>> {
    let dir = &config.output_dir;
    std::fs::create_dir_all(dir).map_err(CliError::io(dir))?;
    let mut files = Vec::new();
    let mut emit =
        |name: &str, write: &dyn Fn(&mut std::io::BufWriter<std::fs::File>) -> Result<()>| {
            let path = dir.join(name);
            write_file(&path, |out| write(out))?;
            files.push(path);
            Ok::<_, CliError>(())
        };
    let (t, z, y) = (&data.tensor, fit.node_partition(), fit.time_partition());
    let p = provenance;
    emit("nodes.csv", &|o| write_dictionary(o, &data.nodes, p))?;
    if config.emit.assignments {
        emit("node_clusters.csv", &|o| {
            write_node_assignments(o, z, &data.nodes, p)
        })?;
        if let Some(y) = y {
            emit("time_clusters.csv", &|o| write_time_assignments(o, y, t, p))?;
        }
    }
    if config.emit.intensities {
        emit("intensities.csv", &|o| write_intensities(o, t, z, y, p))?;
    }
    if config.emit.trace {
        let traces: Vec<(usize, &[f64])> = fit
            .restarts
            .iter()
            .map(|r| (r.restart, &r.trace[..]))
            .collect();
        emit("icl_trace.csv", &|o| write_traces(o, &traces, p))?;
    }
    if config.emit.plots {
        emit("plot_cumulative_counts.csv", &|o| {
            write_cumulative_counts(o, t, z, p)
        })?;
        emit("plot_intensity_curves.csv", &|o| {
            write_intensity_curves(o, t, z, y, p)
        })?;
        if let Some(y) = y {
            emit("plot_time_clusters.csv", &|o| {
                write_interval_series(o, t, y, p)
            })?;
        }
    }
    let path = dir.join("metadata.json");
    let text = serde_json::to_string_pretty(metadata).map_err(CliError::json(&path))?;
    std::fs::write(&path, text + "\n").map_err(CliError::io(&path))?;
    files.push(path);
    Ok(files)
}
