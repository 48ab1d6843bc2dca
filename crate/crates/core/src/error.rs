use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("schema violation: {0}")]
    Schema(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("matrix is not stable")]
    NotStable,
    /// One generator index per row.
    #[error("unstable selection found: {selection:?}")]
    UnstableSelection { selection: Vec<usize> },
    #[error("class is not critical (radius {radius})")]
    NotCritical { radius: f64 },
    #[error("node set is not an irreducible class")]
    Reducible,
    #[error("vector is not sub-invariant (excess {excess})")]
    NotSubInvariant { excess: f64 },
    #[error("point is not sub-fixed (excess {excess})")]
    NotSubFixed { excess: f64 },
    #[error("point is not a fixed point (residual {residual})")]
    NotFixedPoint { residual: f64 },
    #[error("fixed point is not tangentially stable")]
    UnstableFixedPoint,
    #[error("{what} did not converge within {iterations} iterations")]
    NotConverged { what: &'static str, iterations: usize },
    #[error("iterates exceeded magnitude bound at step {step}")]
    Divergence { step: usize },
    #[error("iterates are unbounded below")]
    UnboundedBelow,
    #[error("term blowup: row {row} would need {terms} terms")]
    TermBlowup { row: usize, terms: usize },
    #[error("operation not supported for log-exp maps")]
    UnsupportedVariant,
    #[error("map has no critical nodes")]
    NoCriticalNodes,
    #[error("block structure violated at ({row}, {col})")]
    BlockStructure { row: usize, col: usize },
    #[error("cone spectral radius {tau} is not below one")]
    RadiusNotBelowOne { tau: f64 },
    #[error("certificate failed sampling check (excess {excess})")]
    CertificateFailed { excess: f64 },
    #[error("no period up to {pmax} detected")]
    NoPeriod { pmax: usize },
    #[error("internal consistency failure: {0}")]
    Internal(String),
}
