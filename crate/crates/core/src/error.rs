use thiserror::Error;

/// Everything that can go wrong while building a model, stepping it, or running a study.
#[derive(Debug, Error)]
pub enum SsavError {
    /// κΦ(u) + C_H − α|u|² fell below 1, so the auxiliary variable is undefined.
    #[error("auxiliary-variable floor violated at u = {u:?}{}: radicand {radicand} < 1 (C_H too small for this trajectory)", step_suffix(.step))]
    AssumptionViolation {
        u: Vec<f64>,
        radicand: f64,
        step: Option<usize>,
    },
    #[error("fixed-point iteration did not converge within {max_iter} iterations")]
    NoConvergence { max_iter: usize },
    #[error("interval [{start}, {end}] is not aligned to the fine grid")]
    Alignment { start: f64, end: f64 },
    #[error("slope fit needs at least 3 usable rows, got {usable}")]
    Fit { usable: usize },
    #[error("quadrature failed: {0}")]
    Quadrature(String),
    #[error("non-finite potential value at {point:?}")]
    NonFinite { point: Vec<f64> },
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn step_suffix(step: &Option<usize>) -> String {
    match step {
        Some(n) => format!(" (step {n})"),
        None => String::new(),
    }
}

impl SsavError {
    pub(crate) fn at_step(self, n: usize) -> Self {
        match self {
            SsavError::AssumptionViolation { u, radicand, .. } => SsavError::AssumptionViolation {
                u,
                radicand,
                step: Some(n),
            },
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, SsavError>;
