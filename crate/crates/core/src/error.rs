//! Error types shared across the library.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid group specification: {0}")]
    InvalidGroup(String),

    #[error("H-potential vanishes on the field range at vertex {vertex} (chart value {value}); |R| = {abs_r:.3e}")]
    PotentialZeroOnRange {
        vertex: usize,
        value: num_complex::Complex64,
        abs_r: f64,
    },

    #[error("H-potential zero classification and numerical search disagree for {context}: classified nonvanishing={classified}, search found |R|min={found_min:.3e}")]
    PotentialClassificationMismatch {
        context: String,
        classified: bool,
        found_min: f64,
    },

    #[error("Newton iteration diverged after {iterations} iterations; last residual {residual:.3e}")]
    NewtonDivergence { iterations: usize, residual: f64 },

    #[error("initial sphere solve failed at H = {h}: {reason}")]
    InitFailure { h: f64, reason: String },

    #[error("continuation step size underflow at H = {h} (step {step:.3e}); last residual {residual:.3e}")]
    StepUnderflow { h: f64, step: f64, residual: f64 },

    #[error("adaptive ODE step underflow at y = {y} (step {step:.3e})")]
    StepFailure { y: f64, step: f64 },

    #[error("path integration closure residual {residual:.3e} exceeds 10x threshold {threshold:.3e}")]
    ClosureFailure { residual: f64, threshold: f64 },

    #[error("integrability residual {residual:.3e} exceeds threshold {threshold:.3e}; field is not integrable")]
    IntegrabilityTooLarge { residual: f64, threshold: f64 },

    #[error("eigenvalue solve failed: {0}")]
    EigenFailure(String),

    #[error("degenerate triangle {triangle} in induced mesh (aspect ratio {aspect:.3e})")]
    DegenerateTriangle { triangle: usize, aspect: f64 },

    #[error("invalid rotation axis: {0}")]
    InvalidAxis(String),

    #[error("family normalization missing: {0}")]
    NormalizationMissing(String),

    #[error("minimal sphere structure residual {residual:.3e} exceeds tolerance {tolerance:.3e} ({context})")]
    StructureResidualTooLarge {
        residual: f64,
        tolerance: f64,
        context: String,
    },

    #[error("group realization does not support this operation: {0}")]
    UnsupportedGroup(String),

    #[error("linear solve failed: {0}")]
    LinearSolveFailure(String),
}

pub type Result<T> = std::result::Result<T, Error>;
