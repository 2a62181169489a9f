//! Run configuration, readable from JSON and overridable from the command
//! line.

use std::path::{Path, PathBuf};

use dynsbm_core::search::{default_d_max, default_k_max};
use dynsbm_core::{Model, Priors, SearchConfig, Strategy};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::io::{GridSpec, InputFormat};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
pub enum ModelChoice {
    #[serde(rename = "A", alias = "a")]
    #[value(name = "A", alias = "a")]
    A,
    #[serde(rename = "B", alias = "b")]
    #[value(name = "B", alias = "b")]
    B,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
pub enum StrategyChoice {
    /// Node exchanges and merges only (model A).
    #[serde(rename = "nodes")]
    #[value(name = "nodes")]
    NodesOnly,
    /// Nodes, then intervals.
    #[serde(rename = "TN", alias = "tn")]
    #[value(name = "TN", alias = "tn")]
    NodesThenTimes,
    /// Intervals, then nodes.
    #[serde(rename = "NT", alias = "nt")]
    #[value(name = "NT", alias = "nt")]
    TimesThenNodes,
    /// Alternating node and interval sweeps, then merges.
    #[serde(rename = "M", alias = "m")]
    #[value(name = "M", alias = "m")]
    Alternating,
}

impl From<StrategyChoice> for Strategy {
    fn from(s: StrategyChoice) -> Self {
        match s {
            StrategyChoice::NodesOnly => Strategy::NodesOnly,
            StrategyChoice::NodesThenTimes => Strategy::NodesThenTimes,
            StrategyChoice::TimesThenNodes => Strategy::TimesThenNodes,
            StrategyChoice::Alternating => Strategy::Alternating,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PriorsConfig {
    pub a: f64,
    pub b: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl Default for PriorsConfig {
    fn default() -> Self {
        let p = Priors::default();
        Self {
            a: p.a,
            b: p.b,
            alpha: p.alpha,
            beta: p.beta,
        }
    }
}

/// Which result files a fit writes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EmitFlags {
    pub assignments: bool,
    pub intensities: bool,
    pub trace: bool,
    pub plots: bool,
}

impl Default for EmitFlags {
    fn default() -> Self {
        Self {
            assignments: true,
            intensities: true,
            trace: true,
            plots: true,
        }
    }
}

fn default_restarts() -> usize {
    10
}

fn default_base() -> u64 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub input: PathBuf,
    pub format: InputFormat,
    /// 0-based field positions of `src dst time` / `src dst interval count`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub columns: Option<Vec<usize>>,
    /// Index of the first interval in binned files (0 or 1).
    #[serde(default = "default_base")]
    pub interval_base: u64,
    #[serde(default)]
    pub grid: GridSpec,
    pub model: ModelChoice,
    /// Default `ceil(N / 2)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_max: Option<usize>,
    /// Model B only; default `ceil(sqrt(U))`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d_max: Option<usize>,
    #[serde(default = "default_restarts")]
    pub n_restarts: usize,
    /// Default `nodes` for model A and `TN` for model B.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strategy: Option<StrategyChoice>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub epsilon: f64,
    #[serde(default)]
    pub priors: PriorsConfig,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub emit: EmitFlags,
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }

    /// Checks what can be checked before reading any data.
    pub fn validate(&self) -> Result<()> {
        let usage = |m: String| Err(CliError::Usage(m));
        if self.model == ModelChoice::A {
            if self.d_max.is_some() {
                return usage("d_max only applies to model B".into());
            }
            if self
                .strategy
                .is_some_and(|s| s != StrategyChoice::NodesOnly)
            {
                return usage("model A only supports the `nodes` strategy".into());
            }
        }
        if self.model == ModelChoice::B && self.strategy == Some(StrategyChoice::NodesOnly) {
            return usage("model B needs the TN, NT or M strategy".into());
        }
        if self.interval_base > 1 {
            return usage(format!(
                "interval_base must be 0 or 1, got {}",
                self.interval_base
            ));
        }
        if self.n_restarts == 0 {
            return usage("n_restarts must be positive".into());
        }
        if !(self.epsilon.is_finite() && self.epsilon >= 0.0) {
            return usage(format!(
                "epsilon must be finite and >= 0, got {}",
                self.epsilon
            ));
        }
        self.priors()?;
        Ok(())
    }

    pub fn priors(&self) -> Result<Priors> {
        let p = self.priors;
        Priors::new(p.a, p.b, p.alpha, p.beta).map_err(|e| CliError::Usage(e.to_string()))
    }

    /// Search settings for a tensor of `n_nodes` nodes and `n_intervals`
    /// intervals, filling in the defaults.
    pub fn search_config(&self, n_nodes: usize, n_intervals: usize) -> Result<SearchConfig> {
        let (model, strategy, d_max) = match self.model {
            ModelChoice::A => (Model::A, Strategy::NodesOnly, 1),
            ModelChoice::B => (
                Model::B,
                self.strategy
                    .map_or(Strategy::NodesThenTimes, Strategy::from),
                self.d_max.unwrap_or_else(|| default_d_max(n_intervals)),
            ),
        };
        Ok(SearchConfig {
            model,
            k_max: self.k_max.unwrap_or_else(|| default_k_max(n_nodes)),
            d_max,
            n_restarts: self.n_restarts,
            strategy,
            seed: self.seed,
            epsilon: self.epsilon,
            priors: self.priors()?,
        })
    }

    /// The configuration as hashed for provenance: output location and
    /// emit flags do not change results and are left out.
    pub fn hashed_view(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("configurations serialize");
        if let Some(m) = v.as_object_mut() {
            m.remove("output_dir");
            m.remove("emit");
        }
        v
    }
}
