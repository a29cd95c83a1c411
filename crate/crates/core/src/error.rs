use thiserror::Error;

/// Everything that can go wrong between reading a config and writing a sweep.
#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("PilotOverheadExceedsCoherence: pilot length {pilot_length} >= coherence block {coherence_block}")]
    PilotOverheadExceedsCoherence {
        pilot_length: usize,
        coherence_block: usize,
    },

    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: String, found: String },

    #[error("DegenerateEstimate: zero estimate variance for user {user} of cell {cell}")]
    DegenerateEstimate { cell: usize, user: usize },

    #[error("InsufficientAntennas: zero-forcing needs M > K (M = {antennas}, K = {users})")]
    InsufficientAntennas { antennas: usize, users: usize },

    #[error("SingularGram: cell {cell} Gram matrix condition number {condition:e} exceeds limit")]
    SingularGram { cell: usize, condition: f64 },

    #[error("pre-log factor {0} outside [0, 1)")]
    InvalidPrelog(f64),

    #[error("invalid sweep: {0}")]
    InvalidSweep(String),

    #[error("config parse error: {0}")]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl SimError {
    /// Config problems are the user's to fix; everything else is a runtime failure.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            SimError::InvalidConfig(_)
                | SimError::PilotOverheadExceedsCoherence { .. }
                | SimError::InvalidSweep(_)
                | SimError::Json(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, SimError>;
