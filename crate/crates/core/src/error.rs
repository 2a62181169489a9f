use alloc::string::String;

/// Everything that can go wrong when building inputs or running a fit.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid time grid: {0}")]
    InvalidGrid(String),

    #[error("event {index}: timestamp {time} outside [0, {horizon}]")]
    TimestampOutOfRange {
        index: usize,
        time: f64,
        horizon: f64,
    },

    #[error("event {index}: node {node} outside 0..{n_nodes}")]
    NodeOutOfRange {
        index: usize,
        node: usize,
        n_nodes: usize,
    },

    #[error("event {index}: self-loop on node {node}")]
    SelfLoop { index: usize, node: usize },

    #[error("invalid tensor cell: {0}")]
    InvalidCell(String),

    #[error("{what}: expected length {expected}, got {actual}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("label {label} at position {position} is not below {n_clusters}")]
    LabelOutOfRange {
        position: usize,
        label: usize,
        n_clusters: usize,
    },

    #[error("invalid priors: {0}")]
    InvalidPriors(String),

    #[error("invalid search configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid move: {0}")]
    InvalidMove(String),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("unknown scenario preset `{0}`")]
    UnknownPreset(String),

    #[error("exhaustive enumeration limited to {max} items, got {actual}")]
    TooLargeForEnumeration { max: usize, actual: usize },

    #[error("non-finite log-likelihood term")]
    NonFinite,
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
