use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("csv parse error at line {line}: {message}")]
    CsvParse { line: u64, message: String },

    #[error("inconsistent column count at line {line}: expected {expected}, got {got}")]
    InconsistentColumns { line: u64, expected: usize, got: usize },

    #[error("insufficient data: {got} usable rows, need at least {need}")]
    InsufficientData { need: usize, got: usize },

    #[error("profile resolution {resolution_minutes} min x {steps} steps does not cover one day")]
    BadResolution { resolution_minutes: u32, steps: usize },

    #[error("degenerate row for meter {meter_id}: {reason}")]
    DegenerateRow { meter_id: String, reason: String },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("parameter out of range: {0}")]
    InvalidParameter(String),

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("model error: {0}")]
    Model(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}
