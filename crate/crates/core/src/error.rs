use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("inadmissible state at node {node}: {reason}")]
    InadmissibleState { node: usize, reason: String },

    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid port parametrization: {0}")]
    InvalidParametrization(String),

    #[error("Gram matrix M^T M is numerically singular (reciprocal condition {rcond:e})")]
    SingularGram { rcond: f64 },

    #[error("P1 is not invertible")]
    SingularP1,

    #[error("dense operator requested for {nodes} nodes, cap is {cap}")]
    TooLarge { nodes: usize, cap: usize },

    #[error("step rejected: {0}")]
    StepRejected(String),

    #[error("invalid kinetics: {0}")]
    InvalidKinetics(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("boundary input {port} cannot be enforced: {reason}")]
    UnsupportedInput { port: usize, reason: String },
}
