use thiserror::Error;

/// Violations of a distribution parameter invariant.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("{name} must be a positive finite number, got {value}")]
    NotPositive { name: &'static str, value: f64 },
    #[error("p must lie in (0,1), got {0}")]
    WeightOutOfRange(f64),
    #[error("probability {0} must lie in (0,1)")]
    ProbabilityOutOfRange(f64),
}

pub(crate) fn check_positive(name: &'static str, value: f64) -> Result<f64, ParamError> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(ParamError::NotPositive { name, value })
    }
}
