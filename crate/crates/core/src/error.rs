use thiserror::Error;

/// Failures raised by the simulation library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A physical or configuration value is outside its admissible range.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// The grid cannot resolve the requested structure.
    #[error("resolution error: {0}")]
    Resolution(String),

    /// Norm leaks past the domain boundary or out of the interaction region.
    #[error("containment error: {0}")]
    Containment(String),

    /// An argument lies outside the support or validity domain of a function.
    #[error("domain error: {0}")]
    Domain(String),

    /// The scenario is internally inconsistent.
    #[error("scenario error: {0}")]
    Scenario(String),

    /// The time step violates a stability precondition of the propagator.
    #[error("step-size error: {0}")]
    StepSize(String),

    /// Recorded phases are sampled too coarsely to unwrap.
    #[error("sampling error: {0}")]
    Sampling(String),

    /// Two states are too close to orthogonal for their relative phase to mean anything.
    #[error("decoherence error: overlap magnitude {overlap:.3e} is below {threshold}")]
    Decoherence { overlap: f64, threshold: f64 },

    /// A detector or recombiner setting cannot produce a usable signal.
    #[error("configuration error: {0}")]
    Configuration(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn require_positive(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            reason: format!("must be finite and strictly positive, got {value}"),
        })
    }
}

pub(crate) fn require_non_negative(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            reason: format!("must be finite and non-negative, got {value}"),
        })
    }
}
