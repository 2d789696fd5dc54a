use thiserror::Error;

/// Errors produced by the solver library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("porosity value {value} at vertex {vertex} lies outside [{eps0}, 1]")]
    PorosityRange { vertex: usize, value: f64, eps0: f64 },

    #[error("refinement overflow: {produced} triangles exceed the budget of {budget}")]
    RefinementOverflow { produced: usize, budget: usize },

    #[error("shape mismatch: expected {expected} entries, got {actual}")]
    Shape { expected: usize, actual: usize },

    #[error("singular linear system at Picard iterate {iterate}: {detail}")]
    SingularSystem { iterate: usize, detail: String },

    #[error("metric `{0}` requires an exact solution")]
    UnsupportedMetric(&'static str),

    #[error("mesh format error on line {line}: {message}")]
    MeshFormat { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures of the numerical pipeline (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::SingularSystem { .. } | Error::RefinementOverflow { .. } | Error::Shape { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
