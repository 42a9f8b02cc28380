use std::path::PathBuf;

use crate::env_model::SliceType;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("no latency entry for infrastructure pair ({0}, {1})")]
    UnknownLinkPair(usize, usize),

    #[error("placement is incomplete: slice {slice} vnf {vnf} is unassigned")]
    IncompletePlacement { slice: usize, vnf: usize },

    #[error("placement does not match the scenario shape")]
    PlacementShape,

    #[error("slice {0} has an unassigned user-plane VNF")]
    MissingUserPlane(usize),

    #[error("assignment space {size} exceeds enumeration limit {limit}")]
    EnumerationLimit { size: u128, limit: u128 },

    #[error("queue of {len} slices exceeds the state capacity of {q_max}")]
    QueueTooLong { len: usize, q_max: usize },

    #[error("step called on a finished episode")]
    EpisodeDone,

    #[error("action {action} out of range for {m} infrastructures")]
    InvalidAction { action: usize, m: usize },

    #[error("input width {got} does not match network input width {expected}")]
    WidthMismatch { expected: usize, got: usize },

    #[error("training diverged: {0}")]
    Diverged(String),

    #[error("no agent for slice type {0}")]
    NoAgent(SliceType),

    #[error("missing checkpoint: {0}")]
    MissingCheckpoint(PathBuf),

    #[error("malformed checkpoint {path}: {reason}")]
    Checkpoint { path: PathBuf, reason: String },

    #[error("trace error: {0}")]
    Trace(String),

    #[error("lookup table has no series for ({0}, {1})")]
    UnknownSeries(SliceType, String),

    #[error("{0}")]
    Experiment(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}
