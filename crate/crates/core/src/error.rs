use thiserror::Error;

/// Errors produced anywhere in the grasp-prediction pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("malformed frame: {0}")]
    Frame(String),

    #[error("requested {requested} samples but the pose grid only has {available} cells")]
    GridExhausted { requested: usize, available: usize },

    #[error("object roster overlap between roles: {0}")]
    RosterOverlap(String),

    #[error("feature layout mismatch: model expects {expected}, got {got}")]
    LayoutMismatch { expected: String, got: String },

    #[error("missing data: {0}")]
    Missing(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("model file: {0}")]
    ModelFormat(String),

    #[error("unknown preset `{0}`")]
    UnknownPreset(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
