use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("qubit count {0} is outside the supported range")]
    QubitCount(usize),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("state is not normalized (squared norm {0})")]
    NotNormalized(f64),

    #[error("invalid density operator: {0}")]
    InvalidDensity(String),

    #[error("noise fraction {0} is outside [0, 1]")]
    NoiseFraction(f64),

    #[error("direction is not a unit vector (norm {0})")]
    NonUnitDirection(f64),

    #[error("side swap is only defined for family-one settings (set {0})")]
    SwapUndefined(u8),

    #[error("invalid grid: {0}")]
    Grid(String),

    #[error("margin does not change sign on [{lo}, {hi}]")]
    NoSignChange { lo: f64, hi: f64 },

    #[error("unknown {kind} `{value}`")]
    Unknown { kind: &'static str, value: String },

    #[error("{0}")]
    Domain(String),
}
