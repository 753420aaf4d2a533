use thiserror::Error;

/// Errors raised by the simulator.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid configuration: {}", .0.join("; "))]
    InvalidConfig(Vec<String>),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("integer overflow evaluating ({product})^{order}")]
    Overflow { product: u64, order: u32 },

    #[error("matrix is not Hermitian (defect {0:e})")]
    NotHermitian(f64),

    #[error("matrix is not PSD (min eigenvalue {0:e})")]
    NotPsd(f64),

    #[error("invalid trace {0}")]
    InvalidTrace(f64),

    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("vanishing norm: conditional probability {0:e}")]
    VanishingNorm(f64),

    #[error("no factor pairs of {0} in window")]
    NoFactors(u64),

    #[error("insufficient dimension {dim}: truncation deficit {deficit:e}")]
    InsufficientDimension { dim: usize, deficit: f64 },

    #[error("step too large: {0}")]
    StepTooLarge(String),

    #[error("empty grid")]
    EmptyGrid,

    #[error("{stage}: {source}")]
    Stage { stage: &'static str, source: Box<Error> },
}

impl Error {
    /// Tags an error with the protocol stage it came from.
    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage { stage, source: Box::new(self) }
    }

    /// The error with stage labels stripped.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            e => e,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
