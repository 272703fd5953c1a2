use serde::{Deserialize, Serialize};

use crate::error::{require_non_negative, require_positive, Error, Result};

/// Largest `M / (R c^2)` accepted as weak field.
pub const WEAK_FIELD_LIMIT: f64 = 0.1;

/// Static weak-field Schwarzschild exterior seen from a fixed areal radius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricParams {
    /// Central mass in units where Newton's constant is one.
    pub mass: f64,
    /// Areal radius of the constant-altitude segment.
    pub radius: f64,
    pub c: f64,
}

impl MetricParams {
    pub fn new(mass: f64, radius: f64, c: f64) -> Result<Self> {
        let metric = Self { mass, radius, c };
        metric.validate()?;
        Ok(metric)
    }

    pub fn validate(&self) -> Result<()> {
        require_non_negative("mass", self.mass)?;
        require_positive("c", self.c)?;
        if !(self.radius.is_finite() && self.radius > 0.0) {
            return Err(Error::Domain(format!(
                "radius must be strictly positive, got {}",
                self.radius
            )));
        }
        Ok(())
    }

    /// `M / (R c^2)`, half the Schwarzschild radius over `R`.
    pub fn compactness(&self) -> f64 {
        self.mass / (self.radius * self.c * self.c)
    }

    pub fn is_weak_field(&self) -> bool {
        self.compactness() < WEAK_FIELD_LIMIT
    }

    pub fn require_weak_field(&self) -> Result<()> {
        if self.is_weak_field() {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "M/(R c^2) = {} is outside the weak-field range (< {WEAK_FIELD_LIMIT})",
                self.compactness()
            )))
        }
    }

    pub fn require_outside_horizon(&self) -> Result<()> {
        let ratio = 2.0 * self.compactness();
        if ratio < 1.0 {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "2M/(R c^2) = {ratio} is at or inside the horizon"
            )))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        assert!(matches!(
            MetricParams::new(1.0, 0.0, 1.0),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            MetricParams::new(1.0, -2.0, 1.0),
            Err(Error::Domain(_))
        ));
        assert!(MetricParams::new(-1.0, 1.0, 1.0).is_err());
        assert!(MetricParams::new(0.0, 1.0, 1.0).is_ok());
    }

    #[test]
    fn weak_field_flag() {
        let m = MetricParams::new(1e-3, 1.0, 1.0).unwrap();
        assert!(m.is_weak_field());
        let strong = MetricParams::new(0.2, 1.0, 1.0).unwrap();
        assert!(!strong.is_weak_field());
        assert!(strong.require_outside_horizon().is_ok());
        assert!(MetricParams::new(0.5, 1.0, 1.0)
            .unwrap()
            .require_outside_horizon()
            .is_err());
    }
}
