use thiserror::Error;

use crate::measures::Axis;

/// Errors raised by the measure algebra, the chain dynamics and the generators.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("conditioning on a null event: {axis} state {state} has zero marginal mass")]
    ZeroMarginal { axis: Axis, state: usize },

    #[error("kernel conditions on {kernel} but the marginal lives on {marginal}")]
    AxisMismatch { kernel: Axis, marginal: Axis },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("support sets differ")]
    SupportMismatch,

    #[error("expected a {expected} view, got {found}")]
    ViewMismatch {
        expected: &'static str,
        found: &'static str,
    },

    #[error("input must be strictly positive, got {0}")]
    NonPositiveInput(f64),

    #[error("entry ({x}, {y}) is not strictly positive")]
    NonPositiveEntry { x: usize, y: usize },

    #[error("absolute continuity fails at ({x}, {y})")]
    AbsoluteContinuityViolation { x: usize, y: usize },

    #[error("iteration did not converge within {iterations} iterations")]
    NotConverged { iterations: usize },

    #[error("chain is not ergodic (irreducible: {irreducible}, aperiodic: {aperiodic})")]
    NotErgodic { irreducible: bool, aperiodic: bool },

    #[error("kernels admit no common coupling (max disintegration violation {max_violation:e})")]
    CompatibilityViolation { max_violation: f64 },

    #[error("{what} exceeds cap {cap}")]
    CapExceeded { what: String, cap: usize },

    #[error("input lacks full support on the support set")]
    DegenerateSupport,

    #[error("no ergodic instance found in {attempts} attempts")]
    GenerationFailed { attempts: usize },

    #[error("invalid support set: {0}")]
    InvalidSupport(String),

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("malformed input: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
