//! The `dynsbm` command line.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use dynsbm_core::{adjusted_rand_index, build_tensor, restart_rng, sample_events, Partition};
use serde::Serialize;

use crate::config::{ModelChoice, RunConfig, StrategyChoice};
use crate::error::{CliError, Result};
use crate::io::{
    read_labels, write_events, Dataset, GridSpec, InputFormat, LabelRecord, NodeDictionary,
};
use crate::output::{
    write_file, write_intensities, write_node_assignments, write_time_assignments, Provenance,
};
use crate::pipeline::{load_dataset, run_pipeline};
use crate::scenario::ScenarioFile;
use crate::tensor_file::{tensor_paths, write_tensor};

#[derive(Debug, Parser)]
#[command(
    name = "dynsbm",
    version,
    about = "Clustering of dynamic interaction networks by exact ICL"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Cluster nodes (and, for model B, time intervals) of an interaction file.
    Fit(FitArgs),
    /// Draw a synthetic network from a preset or a scenario file.
    Simulate(SimulateArgs),
    /// Adjusted Rand index between two assignment files.
    Evaluate(EvaluateArgs),
    /// Integrated intensities for given node (and time) clusters.
    Estimate(EstimateArgs),
}

/// Where the interactions come from and how they are binned.
#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct InputArgs {
    /// Interaction file, or the stem of a tensor file pair.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<InputFormat>,
    /// 0-based positions of the logical columns, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub columns: Option<Vec<usize>>,
    /// Index of the first interval in binned files.
    #[arg(long)]
    pub interval_base: Option<u64>,
    /// Number of equal intervals.
    #[arg(long)]
    pub n_intervals: Option<usize>,
    /// Length of each equal interval (default 1).
    #[arg(long)]
    pub interval_length: Option<f64>,
    /// Explicit breakpoints, comma separated, starting at 0.
    #[arg(long, value_delimiter = ',')]
    pub breakpoints: Option<Vec<f64>>,
}

impl InputArgs {
    fn grid(&self) -> Option<GridSpec> {
        (self.n_intervals.is_some() || self.interval_length.is_some() || self.breakpoints.is_some())
            .then(|| GridSpec {
                breakpoints: self.breakpoints.clone(),
                n_intervals: self.n_intervals,
                interval_length: self.interval_length,
            })
    }

    fn load(&self) -> Result<Dataset> {
        let input = self
            .input
            .as_ref()
            .ok_or_else(|| CliError::Usage("--input is required".into()))?;
        let format = self
            .format
            .ok_or_else(|| CliError::Usage("--format is required".into()))?;
        load_dataset(
            input,
            format,
            self.columns.as_deref(),
            &self.grid().unwrap_or_default(),
            self.interval_base.unwrap_or(1),
        )
    }
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// JSON run configuration; flags below override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub input: InputArgs,
    /// A: free intensity per interval; B: intervals grouped into time clusters.
    #[arg(long, value_enum)]
    pub model: Option<ModelChoice>,
    /// Initial number of node clusters (default ceil(N/2)).
    #[arg(long)]
    pub k_max: Option<usize>,
    /// Initial number of time clusters, model B only (default ceil(sqrt(U))).
    #[arg(long)]
    pub d_max: Option<usize>,
    /// Random restarts (default 10).
    #[arg(long)]
    pub restarts: Option<usize>,
    #[arg(long, value_enum)]
    pub strategy: Option<StrategyChoice>,
    /// Base seed; restart r uses stream r of it.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Minimum ICL gain for a move to be accepted.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Directory for the result files.
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
}

impl FitArgs {
    /// The configuration file with the flags applied on top.
    pub fn run_config(&self) -> Result<RunConfig> {
        let mut c = match &self.config {
            Some(path) => RunConfig::from_file(path)?,
            None => {
                let missing =
                    |flag: &str| CliError::Usage(format!("{flag} is required without --config"));
                RunConfig {
                    input: self.input.input.clone().ok_or_else(|| missing("--input"))?,
                    format: self.input.format.ok_or_else(|| missing("--format"))?,
                    columns: None,
                    interval_base: 1,
                    grid: GridSpec::default(),
                    model: self.model.ok_or_else(|| missing("--model"))?,
                    k_max: None,
                    d_max: None,
                    n_restarts: 10,
                    strategy: None,
                    seed: 0,
                    epsilon: 0.0,
                    priors: Default::default(),
                    output_dir: self
                        .output_dir
                        .clone()
                        .ok_or_else(|| missing("--output-dir"))?,
                    emit: Default::default(),
                }
            }
        };
        let i = &self.input;
        if let Some(v) = &i.input {
            c.input = v.clone();
        }
        if let Some(v) = i.format {
            c.format = v;
        }
        if let Some(v) = &i.columns {
            c.columns = Some(v.clone());
        }
        if let Some(v) = i.interval_base {
            c.interval_base = v;
        }
        if let Some(g) = i.grid() {
            c.grid = g;
        }
        if let Some(v) = self.model {
            c.model = v;
        }
        c.k_max = self.k_max.or(c.k_max);
        c.d_max = self.d_max.or(c.d_max);
        c.strategy = self.strategy.or(c.strategy);
        if let Some(v) = self.restarts {
            c.n_restarts = v;
        }
        if let Some(v) = self.seed {
            c.seed = v;
        }
        if let Some(v) = self.epsilon {
            c.epsilon = v;
        }
        if let Some(v) = &self.output_dir {
            c.output_dir = v.clone();
        }
        c.validate()?;
        Ok(c)
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Named preset (scenario1, overfit, scenario2, scenario2-k3).
    #[arg(
        long,
        conflicts_with = "scenario",
        required_unless_present = "scenario"
    )]
    pub preset: Option<String>,
    /// JSON scenario file.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    /// Contrast override.
    #[arg(long)]
    pub psi: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output stem: writes STEM.csv and STEM.json (tensor), STEM.nodes.csv
    /// and STEM.times.csv (true clusters).
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the timestamped events to this file.
    #[arg(long)]
    pub events: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Reference assignment file (`id,...,cluster`).
    #[arg(long)]
    pub truth: PathBuf,
    /// Assignment file to compare.
    #[arg(long)]
    pub estimate: PathBuf,
    /// Print a JSON object instead of plain text.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Node assignment file (`node,cluster`).
    #[arg(long)]
    pub nodes: PathBuf,
    /// Interval assignment file (`interval,...,cluster`); model B estimates.
    #[arg(long)]
    pub times: Option<PathBuf>,
    /// Output CSV; standard output by default.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn run_from_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match run(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Fit(args) => fit(&args),
        Command::Simulate(args) => simulate(&args),
        Command::Evaluate(args) => evaluate(&args),
        Command::Estimate(args) => estimate(&args),
    }
}

fn fit(args: &FitArgs) -> Result<()> {
    let config = args.run_config()?;
    let out = run_pipeline(&config)?;
    let m = &out.metadata;
    let mut line = format!("K={}", m.n_clusters);
    if let Some(d) = m.n_time_clusters {
        line += &format!(" D={d}");
    }
    println!(
        "{line} log_icl={} best_restart={}/{} output={}",
        m.log_icl,
        m.best_restart,
        m.restarts.len(),
        config.output_dir.display()
    );
    Ok(())
}

fn simulate(args: &SimulateArgs) -> Result<()> {
    let mut file = match (&args.preset, &args.scenario) {
        (Some(name), _) => ScenarioFile::from_preset(name, None),
        (None, Some(path)) => ScenarioFile::from_file(path)?,
        (None, None) => return Err(CliError::Usage("--preset or --scenario is required".into())),
    };
    if args.psi.is_some() {
        file.psi = args.psi;
    }
    let scenario = file.build()?;
    let provenance = Provenance::new(&file, args.seed);

    let mut rng = restart_rng(args.seed, 0);
    let (z, y) = scenario.sample_labels(&mut rng)?;
    let events = sample_events(&scenario, &z, &y, &mut rng)?;
    let tensor = build_tensor(&events, scenario.grid.clone(), scenario.n_nodes)?;
    let nodes = NodeDictionary::numbered(scenario.n_nodes);
    let z = Partition::new(z, scenario.n_clusters())?;
    let y = Partition::new(y, scenario.n_regimes())?;

    let (csv, _) = tensor_paths(&args.out);
    let stem = csv.with_extension("");
    let sibling = |suffix: &str| {
        let mut s = stem.clone().into_os_string();
        s.push(suffix);
        PathBuf::from(s)
    };
    let data = Dataset { tensor, nodes };
    write_tensor(&stem, &data, &provenance)?;
    write_file(&sibling(".nodes.csv"), |o| {
        write_node_assignments(o, &z, &data.nodes, &provenance)
    })?;
    write_file(&sibling(".times.csv"), |o| {
        write_time_assignments(o, &y, &data.tensor, &provenance)
    })?;
    if let Some(path) = &args.events {
        write_file(path, |o| write_events(o, &events, &data.nodes, &provenance))?;
    }
    println!(
        "{}: {} nodes, {} intervals, {} interactions",
        scenario.name,
        scenario.n_nodes,
        scenario.grid.n_intervals(),
        data.tensor.total()
    );
    Ok(())
}

/// Relabels cluster values densely in increasing order.
fn dense(values: impl IntoIterator<Item = u64>) -> Vec<usize> {
    let values: Vec<u64> = values.into_iter().collect();
    let mut map = BTreeMap::new();
    for &v in &values {
        map.insert(v, 0);
    }
    for (i, slot) in map.values_mut().enumerate() {
        *slot = i;
    }
    values.iter().map(|v| map[v]).collect()
}

fn evaluate(args: &EvaluateArgs) -> Result<()> {
    let truth = read_labels(&args.truth)?;
    let estimate = read_labels(&args.estimate)?;
    let by_id: BTreeMap<&str, u64> = estimate
        .iter()
        .map(|r| (r.id.as_str(), r.cluster))
        .collect();
    if truth.len() != estimate.len() {
        return Err(CliError::Data(format!(
            "{} lists {} items, {} lists {}",
            args.truth.display(),
            truth.len(),
            args.estimate.display(),
            estimate.len()
        )));
    }
    let mut paired = Vec::with_capacity(truth.len());
    for r in &truth {
        let other = by_id.get(r.id.as_str()).ok_or_else(|| {
            CliError::Data(format!(
                "{}: no assignment for {}",
                args.estimate.display(),
                r.id
            ))
        })?;
        paired.push((r.cluster, *other));
    }
    if paired.is_empty() {
        return Err(CliError::Data(format!(
            "{}: no assignments",
            args.truth.display()
        )));
    }
    let a = dense(paired.iter().map(|p| p.0));
    let b = dense(paired.iter().map(|p| p.1));
    let ari = adjusted_rand_index(&a, &b)?;
    if args.json {
        println!("{}", serde_json::json!({ "ari": ari, "n_items": a.len() }));
    } else {
        println!("ari={ari} n_items={}", a.len());
    }
    Ok(())
}

/// Labels of every item of `nodes`, from an assignment file.
fn labels_for(records: &[LabelRecord], nodes: &NodeDictionary, path: &Path) -> Result<Partition> {
    if records.len() != nodes.len() {
        return Err(CliError::Data(format!(
            "{}: {} assignments for {} items",
            path.display(),
            records.len(),
            nodes.len()
        )));
    }
    let mut clusters = vec![0; nodes.len()];
    for r in records {
        let i = nodes.index_of(&r.id).ok_or_else(|| CliError::Parse {
            path: path.display().to_string(),
            line: r.line,
            message: format!("unknown id {}", r.id),
        })?;
        clusters[i] = r.cluster;
    }
    Ok(Partition::from_labels(dense(clusters)))
}

fn estimate(args: &EstimateArgs) -> Result<()> {
    let data = args.input.load()?;
    let z = labels_for(&read_labels(&args.nodes)?, &data.nodes, &args.nodes)?;
    let y = match &args.times {
        Some(path) => {
            let intervals = NodeDictionary::numbered(data.tensor.n_intervals());
            Some(labels_for(&read_labels(path)?, &intervals, path)?)
        }
        None => None,
    };
    let provenance = Provenance::new(args, 0);
    match &args.output {
        Some(path) => write_file(path, |o| {
            write_intensities(o, &data.tensor, &z, y.as_ref(), &provenance)
        }),
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            write_intensities(&mut lock, &data.tensor, &z, y.as_ref(), &provenance)?;
            lock.flush()?;
            Ok(())
        }
    }
}
