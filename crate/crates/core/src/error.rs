use thiserror::Error;

pub type Result<T> = std::result::Result<T, MvuError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MvuError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("point {point:?} is not on model `{model}`")]
    NotOnModel { model: String, point: Vec<f64> },

    #[error("model `{0}` has no reference isometry to a Euclidean domain")]
    NoIsometry(String),

    #[error("model `{0}` has no intrinsic-distance oracle")]
    NoOracle(String),

    #[error("neighborhood graph is disconnected ({components} components)")]
    DisconnectedGraph { components: usize },

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("requested dimension {requested} exceeds numerical rank {rank}")]
    RankDeficient { requested: usize, rank: usize },

    #[error("probe sample was drawn from `{probe}` but the cloud comes from `{cloud}`")]
    ProbeMismatch { probe: String, cloud: String },

    #[error("config error at line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for MvuError {
    fn from(e: std::io::Error) -> Self {
        MvuError::Io(e.to_string())
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> MvuError {
    MvuError::InvalidParameter(msg.into())
}

impl MvuError {
    /// Process exit code: 2 for numerical failures, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            MvuError::NumericalFailure(_) | MvuError::RankDeficient { .. } | MvuError::DisconnectedGraph { .. } => 2,
            _ => 1,
        }
    }
}
