use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{op}: shape mismatch between {lhs:?} and {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },

    #[error("{op}: non-finite input")]
    NonFinite { op: &'static str },

    #[error("backward requires a scalar loss, got shape {shape:?}")]
    NonScalarLoss { shape: Vec<usize> },

    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },

    #[error("batch normalization in training mode requires batch size >= 2, got {batch}")]
    BatchTooSmall { batch: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("row {row}: {reason}")]
    MalformedRow { row: usize, reason: String },

    #[error("row {row}: unknown level {value:?} for field {field:?}")]
    UnknownLevel {
        row: usize,
        field: String,
        value: String,
    },

    #[error("missing image file: {0}")]
    MissingImage(String),

    #[error("bad image: {0}")]
    BadImage(String),

    #[error("trace not recorded with gradients")]
    MissingTraceGradients,

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("training diverged at epoch {epoch}: loss is not finite")]
    Diverged { epoch: usize },

    #[error("class {class} has no samples")]
    EmptyClass { class: usize },

    #[error("data: {0}")]
    Data(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
