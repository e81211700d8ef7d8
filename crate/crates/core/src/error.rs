use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument fell outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// AoLP requested for a Stokes vector with no linear component.
    #[error("angle of linear polarization undefined: s1 and s2 are both zero")]
    UndefinedAolp,

    /// An inverse problem has no solution for the given input.
    #[error("no solution: {0}")]
    NoSolution(String),

    /// Degenerate geometric configuration (rank-deficient, vanishing projection, ...).
    #[error("degenerate configuration: {0}")]
    Degenerate(String),

    /// Iterative root finding ran out of iterations without meeting tolerance.
    #[error("iteration did not converge: {0}")]
    NoConvergence(String),

    /// Isosurface extraction found no zero crossing.
    #[error("empty level set")]
    EmptyLevelSet,

    /// Tensor/image dimensions do not match.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// Invalid configuration file or option.
    #[error("config error: {0}")]
    Config(String),

    /// A numerical failure during optimization (NaN loss, divergence).
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Graph construction used a primitive the autodiff tape does not support.
    #[error("unsupported primitive in graph: {0}")]
    UnsupportedPrimitive(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// File contents could not be parsed.
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
