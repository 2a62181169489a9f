//! Tensor interchange: a CSV of nonzero cells `i,j,u,count` (all 1-based)
//! next to a JSON header holding the node count, the breakpoints and the
//! node ids. `data/run` names the pair `data/run.csv` + `data/run.json`.

use std::io::Write;
use std::path::{Path, PathBuf};

use dynsbm_core::{InteractionTensor, TimeGrid};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::io::{parse_events, Dataset, InputFormat, NodeDictionary, Records};
use crate::output::{write_file, Provenance};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorHeader {
    pub n_nodes: usize,
    pub n_intervals: usize,
    pub breakpoints: Vec<f64>,
    /// Original id of each node, in index order.
    pub node_ids: Vec<String>,
    pub config_hash: String,
    pub seed: u64,
}

/// `(csv, json)` paths for a stem given with or without an extension.
pub fn tensor_paths(stem: &Path) -> (PathBuf, PathBuf) {
    let base = match stem.extension().and_then(|e| e.to_str()) {
        Some("csv") | Some("json") => stem.with_extension(""),
        _ => stem.to_path_buf(),
    };
    let with = |ext: &str| {
        let mut s = base.clone().into_os_string();
        s.push(".");
        s.push(ext);
        PathBuf::from(s)
    };
    (with("csv"), with("json"))
}

pub fn write_cells(
    out: &mut impl Write,
    tensor: &InteractionTensor,
    provenance: &Provenance,
) -> Result<()> {
    provenance.write_comments(out)?;
    writeln!(out, "i,j,u,count")?;
    for (i, j, u, c) in tensor.nonzero() {
        writeln!(out, "{},{},{},{}", i + 1, j + 1, u + 1, c)?;
    }
    Ok(())
}

pub fn write_tensor(stem: &Path, data: &Dataset, provenance: &Provenance) -> Result<()> {
    let (csv, json) = tensor_paths(stem);
    let header = TensorHeader {
        n_nodes: data.tensor.n_nodes(),
        n_intervals: data.tensor.n_intervals(),
        breakpoints: data.tensor.grid().breakpoints().to_vec(),
        node_ids: data.nodes.ids().to_vec(),
        config_hash: provenance.config_hash.clone(),
        seed: provenance.seed,
    };
    write_file(&csv, |out| write_cells(out, &data.tensor, provenance))?;
    let text = serde_json::to_string_pretty(&header).map_err(CliError::json(&json))?;
    std::fs::write(&json, text + "\n").map_err(CliError::io(&json))
}

pub fn read_tensor(stem: &Path) -> Result<Dataset> {
    let (csv, json) = tensor_paths(stem);
    let text = std::fs::read_to_string(&json).map_err(CliError::io(&json))?;
    let header: TensorHeader = serde_json::from_str(&text).map_err(CliError::json(&json))?;
    if header.breakpoints.len() != header.n_intervals + 1 {
        return Err(CliError::Data(format!(
            "{}: {} breakpoints for {} intervals",
            json.display(),
            header.breakpoints.len(),
            header.n_intervals
        )));
    }
    let nodes = if header.node_ids.is_empty() {
        NodeDictionary::numbered(header.n_nodes)
    } else {
        NodeDictionary::in_order(header.node_ids.clone())
            .ok_or_else(|| CliError::Data(format!("{}: repeated node id", json.display())))?
    };
    if nodes.len() != header.n_nodes {
        return Err(CliError::Data(format!(
            "{}: {} node ids for {} nodes",
            json.display(),
            nodes.len(),
            header.n_nodes
        )));
    }
    let grid = TimeGrid::new(header.breakpoints)?;
    let mut tensor = InteractionTensor::zeros(header.n_nodes, grid);

    let text = std::fs::read_to_string(&csv).map_err(CliError::io(&csv))?;
    let name = csv.display().to_string();
    let Records::Binned(rows) =
        parse_events(&text, InputFormat::Tensor, None).map_err(|e| e.in_file(&name))?
    else {
        unreachable!("tensor rows are binned");
    };
    for r in rows {
        let bad = |message: String| CliError::Parse {
            path: name.clone(),
            line: r.line,
            message,
        };
        let index = |field: &str| -> Result<usize> {
            field
                .parse::<usize>()
                .ok()
                .filter(|&v| (1..=header.n_nodes).contains(&v))
                .map(|v| v - 1)
                .ok_or_else(|| bad(format!("node {field} outside 1..={}", header.n_nodes)))
        };
        let (i, j) = (index(&r.source)?, index(&r.target)?);
        if r.interval == 0 || r.interval as usize > header.n_intervals {
            return Err(bad(format!(
                "interval {} outside 1..={}",
                r.interval, header.n_intervals
            )));
        }
        let count =
            u32::try_from(r.count).map_err(|_| bad(format!("count {} too large", r.count)))?;
        tensor
            .add(i, j, r.interval as usize - 1, count)
            .map_err(|e| bad(e.to_string()))?;
    }
    Ok(Dataset { tensor, nodes })
}
