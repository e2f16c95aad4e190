use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Tensor or matrix dimensions are inconsistent with each other.
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("weights sum to {sum}, expected 1")]
    WeightSum { sum: String },

    #[error("dimension {needed} exceeds the cap of {cap} ({context})")]
    DimensionCap { needed: u128, cap: usize, context: String },

    #[error("{count} deterministic vertices exceed the cap of {cap}")]
    VertexCap { count: u128, cap: usize },

    #[error("no denominator up to {max_den} meets the tolerance; {}", match .needed {
        Some(n) => format!("denominator {n} would be needed"),
        None => "the needed denominator is beyond the search range".to_string(),
    })]
    DenominatorInfeasible { max_den: u64, needed: Option<u64> },

    #[error("state is not maximally entangled: {0}")]
    NotMaximallyEntangled(String),

    #[error("correlation is signalling: defect {defect:e} exceeds tolerance {tol:e}")]
    Signalling { defect: f64, tol: f64 },

    #[error("measure elements do not commute: worst commutator norm {worst:e}")]
    NonCommuting { worst: f64 },

    #[error("eigenvalue {value} of element {element} has no rational within 1e-9 with denominator <= {max_den}")]
    IrrationalSpectrum { value: f64, element: usize, max_den: u64 },

    #[error("expected a {expected} representation")]
    KindMismatch { expected: &'static str },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
