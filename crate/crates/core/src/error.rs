use thiserror::Error;

/// Errors produced by the simulator, its diagnostics and the scenario layer.
#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite sample {value} at index ({}, {})", index.0, index.1)]
    NonFinite { index: (usize, usize), value: f64 },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: (n={}, L={}) vs (n={}, L={})", left.0, left.1, right.0, right.1)]
    GridMismatch {
        left: (usize, f64),
        right: (usize, f64),
    },

    #[error("inverse Laplacian needs a zero-mean field, mean is {mean:e}")]
    NonZeroMean { mean: f64 },

    #[error("dyadic block j={j} outside [{min}, {max}]")]
    BlockOutOfRange { j: i32, min: i32, max: i32 },

    #[error("invariant violated: {invariant} (got {value})")]
    Invariant { invariant: &'static str, value: f64 },

    #[error("negative time {0}")]
    NegativeTime(f64),

    #[error("blow-up after step {step} at t={time}: max-norm trace {trace:?}")]
    BlowUp {
        step: usize,
        time: f64,
        trace: Vec<f64>,
    },

    #[error("observer failed at t={time}: {message}")]
    Observer { time: f64, message: String },

    #[error("channel {channel} has non-positive value {value} at index {index}")]
    NonPositive {
        channel: String,
        index: usize,
        value: f64,
    },

    #[error("unknown channel {0:?}")]
    UnknownChannel(String),

    #[error("empty fit window [{0}, {1}]")]
    EmptyWindow(f64, f64),

    #[error("sample times differ at index {index}: {left} vs {right}")]
    TimeGridMismatch {
        index: usize,
        left: f64,
        right: f64,
    },

    #[error("initial-data template is identically zero")]
    DegenerateTemplate,

    #[error("frequency index N={requested} too large for this grid (max admissible N={max})")]
    FrequencyTooLarge { requested: u32, max: u32 },

    #[error("profile support does not fit: a*L = {scaled_length} < {required}")]
    SupportOverflow { scaled_length: f64, required: f64 },

    #[error("configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
