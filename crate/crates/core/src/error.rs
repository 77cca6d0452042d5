use thiserror::Error;

/// Errors raised anywhere in the solver pipeline.
#[derive(Debug, Error)]
pub enum WgError {
    #[error("unsupported quadrature degree {degree} (supported range 1..={max})")]
    UnsupportedDegree { degree: usize, max: usize },

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("degenerate geometry in cell {cell}: {reason}")]
    DegenerateCell { cell: usize, reason: String },

    #[error("Gram matrix is not positive definite ({context})")]
    SingularGram { context: String },

    #[error("empty test space for cell {cell}: constraint nullspace has dimension 0")]
    EmptyLambdaSpace { cell: usize },

    #[error(
        "ambiguous numerical rank in cell {cell}: singular value ratio {ratio:.3e} lies in the deadband"
    )]
    RankDeadband { cell: usize, ratio: f64 },

    #[error("injectivity certificate failed in cell {cell}: relative sigma_min = {sigma_min:.3e}")]
    CertificateFailure { cell: usize, sigma_min: f64 },

    #[error("linear solve failed: {0}")]
    SolveFailed(String),

    #[error("invalid configuration for `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("mesh file parse error at line {line}: {reason}")]
    MeshParse { line: usize, reason: String },

    #[error("level {level} failed: {source}")]
    Level {
        level: u32,
        #[source]
        source: Box<WgError>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, WgError>;
