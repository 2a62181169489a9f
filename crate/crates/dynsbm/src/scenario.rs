//! Scenario files: JSON documents that start from a named preset (or from
//! nothing) and override its fields.
//!
//! ```json
//! { "preset": "scenario1", "psi": 2.5, "n_nodes": 30 }
//! ```
//!
//! Regime labels in `time_regimes` are 1-based, like every label written by
//! this tool.

use std::path::Path;

use dynsbm_core::simulate::TimeRegimes;
use dynsbm_core::{scenario_preset, SimScenario};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::io::GridSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum RegimeSpec {
    /// Regime of every interval.
    Fixed(Vec<usize>),
    /// Regime weights for independent draws.
    Random(Vec<f64>),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_nodes: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub node_weights: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_regimes: Option<RegimeSpec>,
    /// One row-major `K x K` matrix per regime, rates per unit time.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rates: Option<Vec<Vec<f64>>>,
}

impl ScenarioFile {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }

    pub fn from_preset(name: &str, psi: Option<f64>) -> Self {
        Self {
            preset: Some(name.to_string()),
            psi,
            ..Self::default()
        }
    }

    /// Applies the overrides to the preset and validates the result.
    pub fn build(&self) -> Result<SimScenario> {
        let mut s = match &self.preset {
            Some(name) => {
                scenario_preset(name, self.psi).map_err(|e| CliError::Usage(e.to_string()))?
            }
            None => {
                let missing = |what: &str| {
                    CliError::Usage(format!("a scenario without a preset needs `{what}`"))
                };
                let grid = self.grid.as_ref().ok_or_else(|| missing("grid"))?;
                SimScenario {
                    name: self.name.clone().unwrap_or_else(|| "custom".into()),
                    n_nodes: self.n_nodes.ok_or_else(|| missing("n_nodes"))?,
                    grid: grid.resolve(None)?,
                    node_weights: self
                        .node_weights
                        .clone()
                        .ok_or_else(|| missing("node_weights"))?,
                    time_regimes: TimeRegimes::Random(vec![1.0]),
                    rates: self.rates.clone().ok_or_else(|| missing("rates"))?,
                    psi: self.psi,
                }
            }
        };
        if let Some(name) = &self.name {
            s.name = name.clone();
        }
        if let Some(n) = self.n_nodes {
            s.n_nodes = n;
        }
        if let Some(g) = &self.grid {
            s.grid = g.resolve(None)?;
            if self.time_regimes.is_none() {
                if let TimeRegimes::Fixed(y) = &s.time_regimes {
                    if y.len() != s.grid.n_intervals() {
                        return Err(CliError::Usage(
                            "changing the number of intervals of a preset needs new `time_regimes`"
                                .into(),
                        ));
                    }
                }
            }
        }
        if let Some(w) = &self.node_weights {
            s.node_weights = w.clone();
        }
        if let Some(r) = &self.rates {
            s.rates = r.clone();
        }
        match &self.time_regimes {
            Some(RegimeSpec::Fixed(y)) => {
                if y.contains(&0) {
                    return Err(CliError::Usage("time regimes are numbered from 1".into()));
                }
                s.time_regimes = TimeRegimes::Fixed(y.iter().map(|r| r - 1).collect());
            }
            Some(RegimeSpec::Random(w)) => s.time_regimes = TimeRegimes::Random(w.clone()),
            None if self.preset.is_none() => {
                let n = s.rates.len().max(1);
                s.time_regimes = TimeRegimes::Random(vec![1.0 / n as f64; n]);
            }
            None => {}
        }
        s.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(s)
    }
}
