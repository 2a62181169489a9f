//! Raw interaction files and their conversion to a count tensor.
//!
//! Two row layouts are read:
//!
//! * timestamped: `src dst time`, one row per interaction;
//! * binned: `src dst interval count`, one row per node pair and interval.
//!
//! Fields may be separated by whitespace, commas or semicolons. Lines that
//! are blank or start with `#` are ignored, and a first row whose numeric
//! fields do not parse is taken for a header. Node ids are arbitrary tokens
//! mapped to a dense index by [`NodeDictionary`].

use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use dynsbm_core::{InteractionTensor, TimeGrid};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, ParseError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum InputFormat {
    /// `src dst time` rows.
    Timestamped,
    /// `src dst interval count` rows.
    Binned,
    /// The nonzero-cell CSV plus JSON header written by this tool.
    Tensor,
}

impl InputFormat {
    fn n_fields(self) -> usize {
        match self {
            InputFormat::Timestamped => 3,
            InputFormat::Binned | InputFormat::Tensor => 4,
        }
    }
}

impl fmt::Display for InputFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InputFormat::Timestamped => "timestamped",
            InputFormat::Binned => "binned",
            InputFormat::Tensor => "tensor",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimedRecord {
    pub line: usize,
    pub source: String,
    pub target: String,
    pub time: f64,
}

/// One binned row; `interval` is kept as written in the file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinnedRecord {
    pub line: usize,
    pub source: String,
    pub target: String,
    pub interval: u64,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Records {
    Timestamped(Vec<TimedRecord>),
    Binned(Vec<BinnedRecord>),
}

impl Records {
    pub fn len(&self) -> usize {
        match self {
            Records::Timestamped(r) => r.len(),
            Records::Binned(r) => r.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub(crate) fn fields(line: &str) -> Vec<&str> {
    line.split(|c: char| c == ',' || c == ';' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .collect()
}

fn is_skipped(line: &str) -> bool {
    let t = line.trim();
    t.is_empty() || t.starts_with('#')
}

fn parse_number<T: FromStr>(field: &str, what: &str, line: usize) -> Result<T, ParseError> {
    field.parse().map_err(|_| ParseError {
        line,
        message: format!("{what} {field:?} is not a valid number"),
    })
}

fn parse_count(field: &str, line: usize) -> Result<u64, ParseError> {
    let value: i64 = parse_number(field, "count", line)?;
    u64::try_from(value).map_err(|_| ParseError {
        line,
        message: format!("negative count {value}"),
    })
}

/// Parses `text` as `format` rows. `columns` gives the 0-based field
/// position of each logical column (`src dst time` or
/// `src dst interval count`); by default they are the leading fields.
pub fn parse_events(
    text: &str,
    format: InputFormat,
    columns: Option<&[usize]>,
) -> Result<Records, ParseError> {
    let n_fields = format.n_fields();
    let default: Vec<usize> = (0..n_fields).collect();
    let columns = columns.unwrap_or(&default);
    if columns.len() != n_fields {
        return Err(ParseError {
            line: 0,
            message: format!(
                "{format} rows need {n_fields} column positions, got {}",
                columns.len()
            ),
        });
    }
    let width = columns.iter().max().map_or(0, |m| m + 1);

    let mut timed = Vec::new();
    let mut binned = Vec::new();
    let mut seen_data = false;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        if is_skipped(raw) {
            continue;
        }
        let f = fields(raw);
        if f.len() < width {
            return Err(ParseError {
                line,
                message: format!("expected at least {width} fields, found {}", f.len()),
            });
        }
        let pick = |c: usize| f[columns[c]];
        let row = match format {
            InputFormat::Timestamped => parse_number::<f64>(pick(2), "time", line).map(|time| {
                timed.push(TimedRecord {
                    line,
                    source: pick(0).to_string(),
                    target: pick(1).to_string(),
                    time,
                })
            }),
            InputFormat::Binned | InputFormat::Tensor => {
                parse_number::<u64>(pick(2), "interval", line)
                    .and_then(|interval| Ok((interval, parse_count(pick(3), line)?)))
                    .map(|(interval, count)| {
                        binned.push(BinnedRecord {
                            line,
                            source: pick(0).to_string(),
                            target: pick(1).to_string(),
                            interval,
                            count,
                        })
                    })
            }
        };
        match row {
            Ok(()) => seen_data = true,
            // A non-numeric first row is a header.
            Err(_) if !seen_data && looks_like_header(&f, columns, format) => seen_data = true,
            Err(e) => return Err(e),
        }
    }
    Ok(match format {
        InputFormat::Timestamped => Records::Timestamped(timed),
        _ => Records::Binned(binned),
    })
}

fn looks_like_header(f: &[&str], columns: &[usize], format: InputFormat) -> bool {
    let numeric = |c: usize| f[columns[c]].parse::<f64>().is_ok();
    match format {
        InputFormat::Timestamped => !numeric(2),
        _ => !numeric(2) && !numeric(3),
    }
}

pub fn read_events(path: &Path, format: InputFormat, columns: Option<&[usize]>) -> Result<Records> {
    let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
    parse_events(&text, format, columns).map_err(|e| e.in_file(path.display().to_string()))
}

/// Dense index for the node ids found in a file. Ids that all parse as
/// integers are ordered numerically, otherwise lexicographically.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct NodeDictionary {
    ids: Vec<String>,
    index: HashMap<String, usize>,
}

impl NodeDictionary {
    pub fn from_ids<I, S>(ids: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut ids: Vec<String> = ids.into_iter().map(Into::into).collect();
        ids.sort();
        ids.dedup();
        if ids.iter().all(|s| s.parse::<i128>().is_ok()) {
            ids.sort_by(|a, b| {
                let (x, y) = (a.parse::<i128>().unwrap(), b.parse::<i128>().unwrap());
                x.cmp(&y).then_with(|| a.cmp(b))
            });
        }
        Self::in_order(ids).expect("ids deduplicated")
    }

    /// Keeps the given order; `None` if an id repeats.
    pub fn in_order(ids: Vec<String>) -> Option<Self> {
        let index: HashMap<String, usize> = ids
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i))
            .collect();
        (index.len() == ids.len()).then_some(Self { ids, index })
    }

    /// Ids `1..=n`, used when a tensor carries no dictionary.
    pub fn numbered(n: usize) -> Self {
        Self::from_ids((1..=n).map(|i| i.to_string()))
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn id(&self, index: usize) -> &str {
        &self.ids[index]
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }
}

/// How intervals are laid out when building a tensor.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    /// Explicit breakpoints `0 = t_0 < ... < t_U`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub breakpoints: Option<Vec<f64>>,
    /// Number of equal intervals.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_intervals: Option<usize>,
    /// Length of each equal interval (default 1).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interval_length: Option<f64>,
}

impl GridSpec {
    /// Resolves the grid; `inferred_intervals` is used when neither
    /// breakpoints nor a count were given.
    pub fn resolve(&self, inferred_intervals: Option<usize>) -> Result<TimeGrid> {
        if let Some(b) = &self.breakpoints {
            if self.n_intervals.is_some_and(|u| u + 1 != b.len()) {
                return Err(CliError::Usage(format!(
                    "{} breakpoints do not describe {} intervals",
                    b.len(),
                    self.n_intervals.unwrap()
                )));
            }
            return Ok(TimeGrid::new(b.clone())?);
        }
        let u = self.n_intervals.or(inferred_intervals).ok_or_else(|| {
            CliError::Usage("the time grid needs breakpoints or a number of intervals".into())
        })?;
        Ok(TimeGrid::uniform(u, self.interval_length.unwrap_or(1.0))?)
    }
}

/// A tensor and the ids of its nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub tensor: InteractionTensor,
    pub nodes: NodeDictionary,
}

fn node_pair(
    nodes: &NodeDictionary,
    r_source: &str,
    r_target: &str,
    line: usize,
) -> Result<(usize, usize), ParseError> {
    let i = nodes
        .index_of(r_source)
        .expect("dictionary built from these records");
    let j = nodes
        .index_of(r_target)
        .expect("dictionary built from these records");
    if i == j {
        return Err(ParseError {
            line,
            message: format!("self-interaction of node {r_source}"),
        });
    }
    Ok((i, j))
}

/// Builds the tensor of `records`. Binned intervals are numbered from
/// `interval_base` (0 or 1); when the grid gives no interval count, the
/// largest interval in the file sets it.
pub fn records_to_dataset(
    records: &Records,
    grid: &GridSpec,
    interval_base: u64,
) -> Result<Dataset, ParseOrUsage> {
    if interval_base > 1 {
        return Err(ParseOrUsage::Usage(format!(
            "interval base must be 0 or 1, got {interval_base}"
        )));
    }
    match records {
        Records::Timestamped(rows) => {
            let nodes = NodeDictionary::from_ids(
                rows.iter()
                    .flat_map(|r| [r.source.as_str(), r.target.as_str()]),
            );
            let grid = grid.resolve(None).map_err(ParseOrUsage::from)?;
            let mut tensor = InteractionTensor::zeros(nodes.len(), grid);
            for r in rows {
                let (i, j) = node_pair(&nodes, &r.source, &r.target, r.line)?;
                let u = tensor
                    .grid()
                    .interval_of(r.time)
                    .ok_or_else(|| ParseError {
                        line: r.line,
                        message: format!(
                            "time {} outside [0, {}]",
                            r.time,
                            tensor.grid().horizon()
                        ),
                    })?;
                tensor.add(i, j, u, 1).map_err(ParseOrUsage::from)?;
            }
            Ok(Dataset { tensor, nodes })
        }
        Records::Binned(rows) => {
            let nodes = NodeDictionary::from_ids(
                rows.iter()
                    .flat_map(|r| [r.source.as_str(), r.target.as_str()]),
            );
            for r in rows {
                if r.interval < interval_base {
                    return Err(ParseError {
                        line: r.line,
                        message: format!(
                            "interval {} below the first index {interval_base}",
                            r.interval
                        ),
                    }
                    .into());
                }
            }
            let inferred = rows
                .iter()
                .map(|r| (r.interval - interval_base) as usize + 1)
                .max()
                .unwrap_or(1);
            let grid = grid.resolve(Some(inferred)).map_err(ParseOrUsage::from)?;
            let nu = grid.n_intervals();
            let mut tensor = InteractionTensor::zeros(nodes.len(), grid);
            for r in rows {
                let (i, j) = node_pair(&nodes, &r.source, &r.target, r.line)?;
                let u = (r.interval - interval_base) as usize;
                if u >= nu {
                    return Err(ParseError {
                        line: r.line,
                        message: format!(
                            "interval {} beyond the {nu} intervals of the grid",
                            r.interval
                        ),
                    }
                    .into());
                }
                let count = u32::try_from(r.count)
                    .ok()
                    .filter(|&c| tensor.get(i, j, u).checked_add(c).is_some());
                let count = count.ok_or_else(|| ParseError {
                    line: r.line,
                    message: format!("count {} overflows a cell", r.count),
                })?;
                tensor.add(i, j, u, count).map_err(ParseOrUsage::from)?;
            }
            Ok(Dataset { tensor, nodes })
        }
    }
}

/// Failure of [`records_to_dataset`]: either a bad row or a bad grid.
#[derive(Debug, thiserror::Error)]
pub enum ParseOrUsage {
    #[error(transparent)]
    Row(#[from] ParseError),
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Other(CliError),
}

impl From<CliError> for ParseOrUsage {
    fn from(e: CliError) -> Self {
        match e {
            CliError::Usage(m) => ParseOrUsage::Usage(m),
            other => ParseOrUsage::Other(other),
        }
    }
}

impl From<dynsbm_core::Error> for ParseOrUsage {
    fn from(e: dynsbm_core::Error) -> Self {
        ParseOrUsage::Other(e.into())
    }
}

impl ParseOrUsage {
    pub fn in_file(self, path: &Path) -> CliError {
        match self {
            ParseOrUsage::Row(e) => e.in_file(path.display().to_string()),
            ParseOrUsage::Usage(m) => CliError::Usage(m),
            ParseOrUsage::Other(e) => e,
        }
    }
}

/// Writes events as `src dst time` rows; times use the shortest exact
/// decimal form so that reading them back is lossless.
pub fn write_events(
    out: &mut impl std::io::Write,
    events: &[dynsbm_core::Event],
    nodes: &NodeDictionary,
    provenance: &crate::output::Provenance,
) -> Result<()> {
    provenance.write_comments(out)?;
    writeln!(out, "src dst time")?;
    for e in events {
        writeln!(
            out,
            "{} {} {}",
            nodes.id(e.source),
            nodes.id(e.target),
            e.time
        )?;
    }
    Ok(())
}

/// One row of a label file: an item id and its cluster as written.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelRecord {
    pub line: usize,
    pub id: String,
    pub cluster: u64,
}

/// Parses an assignment file such as `node,cluster` or
/// `interval,start,end,cluster`: the first field is the id and the last
/// field the cluster. A non-numeric first row is a header.
pub fn parse_labels(text: &str) -> Result<Vec<LabelRecord>, ParseError> {
    let mut out: Vec<LabelRecord> = Vec::new();
    let mut ids = std::collections::HashSet::new();
    let mut seen_row = false;
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        if is_skipped(raw) {
            continue;
        }
        let f = fields(raw);
        let first_row = !seen_row;
        seen_row = true;
        if f.len() < 2 {
            return Err(ParseError {
                line,
                message: format!("expected an id and a cluster, found {} field(s)", f.len()),
            });
        }
        let last = f[f.len() - 1];
        if first_row && last.parse::<u64>().is_err() {
            continue;
        }
        let cluster = parse_count(last, line)?;
        if !ids.insert(f[0]) {
            return Err(ParseError {
                line,
                message: format!("id {} listed twice", f[0]),
            });
        }
        out.push(LabelRecord {
            line,
            id: f[0].to_string(),
            cluster,
        });
    }
    Ok(out)
}

pub fn read_labels(path: &Path) -> Result<Vec<LabelRecord>> {
    let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
    parse_labels(&text).map_err(|e| e.in_file(path.display().to_string()))
}
