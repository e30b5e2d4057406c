use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("ReLU preactivation {preactivation:e} within kink tolerance {tolerance:e}")]
    KinkProximity { preactivation: f64, tolerance: f64 },

    #[error("activation {activation} is not smooth to order {order}")]
    UnsupportedOrder { activation: String, order: usize },

    #[error("networks cannot be combined: {0}")]
    Incompatible(String),

    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("depth extension refused: {0}")]
    DepthExtension(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("nodes too close: minimum separation {separation:e} admits no plateau")]
    NodesTooClose { separation: f64 },

    #[error("unsupported dimension {0}")]
    UnsupportedDimension(usize),

    #[error("Hermite system ill-conditioned: condition estimate {condition:e} exceeds {limit:e}")]
    IllConditioned { condition: f64, limit: f64 },

    #[error("no separating direction found after {attempts} attempts")]
    NoSeparatingDirection { attempts: usize },

    #[error("trial networks are not linearly independent (smallest singular value {sigma_min:e})")]
    DependentTrials { sigma_min: f64 },

    #[error("kernel extraction failed: {0}")]
    Kernel(String),

    #[error("refused: {0}")]
    Refused(String),

    #[error("invalid probe: {0}")]
    InvalidProbe(String),

    #[error("serialization: {0}")]
    Serialization(String),
}

pub type Result<T> = std::result::Result<T, Error>;
