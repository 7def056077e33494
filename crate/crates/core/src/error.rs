use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{op}: shape mismatch, expected {expected:?}, got {actual:?}")]
    ShapeMismatch {
        op: &'static str,
        expected: Vec<usize>,
        actual: Vec<usize>,
    },
    #[error("{op}: {detail}")]
    InvalidShape { op: &'static str, detail: String },
    #[error("tensor data length {len} does not match shape {shape:?}")]
    DataLength { shape: Vec<usize>, len: usize },
    #[error("maxpool2 needs even spatial dims, got {height}x{width}")]
    OddSpatial { height: usize, width: usize },
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },

    #[error("layer {index} ({layer}): {reason}")]
    LayerChain {
        index: usize,
        layer: String,
        reason: String,
    },
    #[error("layer {layer_id} is not a conv layer")]
    NotConv { layer_id: usize },
    #[error("layer id {layer_id} out of range (model has {layer_count} layers)")]
    LayerOutOfRange { layer_id: usize, layer_count: usize },
    #[error("filter {filter_id} out of range for layer {layer_id} with {filter_count} filters")]
    FilterOutOfRange {
        layer_id: usize,
        filter_id: usize,
        filter_count: usize,
    },
    #[error("captured activations do not match the model (stale capture at layer {layer_id})")]
    StaleCapture { layer_id: usize },
    #[error("non-finite value encountered in {context}")]
    NonFinite { context: String },
    #[error("training diverged at step {step} (non-finite loss); last good checkpoint: {}", last_good.as_ref().map_or("none".to_string(), |p| p.display().to_string()))]
    Diverged { step: u64, last_good: Option<PathBuf> },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("checkpoint: bad magic {found:?}")]
    BadMagic { found: [u8; 4] },
    #[error("checkpoint: unsupported version {found}, expected {expected}")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("checkpoint: truncated ({context})")]
    Truncated { context: String },
    #[error("checkpoint: header describes {expected} parameter bytes but blob has {actual}")]
    SizeDisagreement { expected: usize, actual: usize },
    #[error("checkpoint: malformed header: {0}")]
    Header(String),

    #[error("{path}: {reason}")]
    Data { path: PathBuf, reason: String },

    #[error("cannot prune {requested} filters, at most {max_feasible} are feasible")]
    Infeasible {
        requested: usize,
        max_feasible: usize,
    },
    #[error("prune plan does not match the model: {0}")]
    PlanMismatch(String),

    #[error("config: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
