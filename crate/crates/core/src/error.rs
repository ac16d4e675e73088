use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value produced by {0}")]
    NonFinite(&'static str),

    #[error("loss node is not scalar (dims {0:?})")]
    NonScalarSeed(Vec<usize>),

    #[error("node {0} is not recorded on this tape")]
    UnknownNode(usize),

    #[error("vertex ({lat}, {lon}) lies outside the bounding box")]
    OutsideBbox { lat: f64, lon: f64 },

    #[error("spearman correlation undefined for a constant series")]
    ConstantSeries,

    #[error("cannot reach {target} regions: no adjacent pair left at {remaining}")]
    Disconnected { target: usize, remaining: usize },

    #[error("transition cube is empty")]
    EmptyCube,

    #[error("insufficient history: {0} view")]
    InsufficientHistory(&'static str),

    #[error("series too short: {have} timesteps, need more than {need}")]
    SpanTooShort { have: usize, need: usize },

    #[error("unknown weather code {code} (vocabulary size {vocab})")]
    UnknownWeather { code: usize, vocab: usize },

    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),

    #[error("checkpoint tensor `{name}` has dims {found:?}, expected {expected:?}")]
    CheckpointDims {
        name: String,
        found: Vec<usize>,
        expected: Vec<usize>,
    },

    #[error("training diverged at epoch {epoch}: non-finite loss")]
    Diverged { epoch: usize },

    #[error("no matching history for timestep {0}")]
    NoHistory(usize),

    #[error("timestep {t} out of range (0..{len})")]
    OutOfRange { t: usize, len: usize },

    #[error("missing model for horizon {0}")]
    MissingHorizon(usize),

    #[error("config error: {0}")]
    Config(String),

    #[error("parse error in {path}: {msg}")]
    Parse { path: PathBuf, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Shape {
            op,
            detail: detail.into(),
        }
    }
}
