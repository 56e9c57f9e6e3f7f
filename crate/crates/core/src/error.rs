use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("direction undefined: points are {distance:e} m apart")]
    DegenerateDirection { distance: f64 },

    #[error("invalid low-pass design: cutoff {cutoff_hz} Hz, sample rate {sample_hz} Hz, order {order}")]
    InvalidCutoff { cutoff_hz: f64, sample_hz: f64, order: usize },

    #[error("timestamps must be strictly increasing (sample {index}: {t} after {prev})")]
    NonMonotoneInput { index: usize, t: f64, prev: f64 },

    #[error("pooled covariance is not invertible after regularization")]
    SingularCovariance,

    #[error("insufficient training data: {0}")]
    InsufficientData(String),

    #[error("goal index {index} out of range for {len} goals")]
    GoalIndex { index: usize, len: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("incomplete trial log: {0}")]
    IncompleteLog(String),

    #[error("malformed record: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
