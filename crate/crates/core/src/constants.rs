//! Physical constants in the simulation's unit system.
//!
//! Natural units are the default: `hbar = m = e = 1`, with the speed of light
//! left configurable so that the low-velocity ratio `p / (m c)` can be dialled.
//! Newton's constant is fixed to one and never appears explicitly: a central
//! mass `M` enters every formula as the gravitational parameter `G M`.

use serde::{Deserialize, Serialize};

use crate::error::{require_positive, Result};

pub const DEFAULT_SPEED_OF_LIGHT: f64 = 1.0e3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    pub hbar: f64,
    pub c: f64,
    /// Particle mass.
    pub m: f64,
    /// Particle charge.
    pub e: f64,
}

impl Constants {
    pub fn new(hbar: f64, c: f64, m: f64, e: f64) -> Result<Self> {
        let constants = Self { hbar, c, m, e };
        constants.validate()?;
        Ok(constants)
    }

    pub fn validate(&self) -> Result<()> {
        require_positive("hbar", self.hbar)?;
        require_positive("c", self.c)?;
        require_positive("m", self.m)?;
        require_positive("e", self.e)
    }

    pub fn with_speed_of_light(self, c: f64) -> Result<Self> {
        Self::new(self.hbar, c, self.m, self.e)
    }

    /// `m c^2`
    pub fn rest_energy(&self) -> f64 {
        self.m * self.c * self.c
    }
}

impl Default for Constants {
    fn default() -> Self {
        Self {
            hbar: 1.0,
            c: DEFAULT_SPEED_OF_LIGHT,
            m: 1.0,
            e: 1.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_natural_units() {
        let c = Constants::default();
        assert_eq!((c.hbar, c.m, c.e), (1.0, 1.0, 1.0));
        assert_eq!(c.rest_energy(), 1.0e6);
        c.validate().unwrap();
    }

    #[test]
    fn rejects_non_positive_or_non_finite() {
        assert!(Constants::new(0.0, 1.0, 1.0, 1.0).is_err());
        assert!(Constants::new(1.0, -1.0, 1.0, 1.0).is_err());
        assert!(Constants::new(1.0, 1.0, f64::INFINITY, 1.0).is_err());
        assert!(Constants::new(1.0, 1.0, 1.0, f64::NAN).is_err());
    }
}
