//! Builders that turn each experiment into potential programs and
//! Hamiltonian coefficients.
//!
//! Every Hamiltonian here has the shape
//! `H = rest_energy + kinetic_scale * p^2/2m + U(t)` with `U` uniform in space.

use serde::{Deserialize, Serialize};

use crate::analytic::{redshift_factor, RedshiftMode};
use crate::constants::Constants;
use crate::error::{require_non_negative, Error, Result};
use crate::metric::MetricParams;
use crate::program::{PotentialProgram, Segment};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianSpec {
    pub kinetic_scale: f64,
    pub rest_energy: f64,
    /// `None` is the zero potential.
    pub potential: Option<PotentialProgram>,
}

impl HamiltonianSpec {
    pub fn new(
        kinetic_scale: f64,
        rest_energy: f64,
        potential: Option<PotentialProgram>,
    ) -> Result<Self> {
        let spec = Self {
            kinetic_scale,
            rest_energy,
            potential,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kinetic_scale > 0.0 && self.kinetic_scale <= 1.0) {
            return Err(Error::InvalidParameter {
                name: "kinetic_scale",
                reason: format!("must lie in (0, 1], got {}", self.kinetic_scale),
            });
        }
        require_non_negative("rest_energy", self.rest_energy)
    }

    /// `m c^2 + p^2/2m`
    pub fn free(constants: &Constants) -> Self {
        Self {
            kinetic_scale: 1.0,
            rest_energy: constants.rest_energy(),
            potential: None,
        }
    }

    /// `m c^2 + p^2/2m + U(t)`
    pub fn flat(constants: &Constants, potential: PotentialProgram) -> Self {
        Self::free(constants).with_potential(Some(potential))
    }

    pub fn with_potential(mut self, potential: Option<PotentialProgram>) -> Self {
        self.potential = potential;
        self
    }

    /// Total energy of a plane wave with momentum `p` at time `t`.
    pub fn plane_wave_energy(&self, p: f64, t: f64, constants: &Constants) -> Result<f64> {
        let u = match &self.potential {
            Some(program) => program.evaluate(t)?,
            None => 0.0,
        };
        Ok(self.rest_energy + self.kinetic_scale * p * p / (2.0 * constants.m) + u)
    }
}

fn require_duration(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "{name} must be a non-negative duration, got {value}"
        )))
    }
}

/// Builds a program from `(duration, segment)` pairs, dropping empty pieces.
fn assemble(pieces: Vec<Segment>) -> Result<PotentialProgram> {
    let kept: Vec<Segment> = pieces.into_iter().filter(|s| s.duration > 0.0).collect();
    if kept.is_empty() {
        return Err(Error::InvalidParameter {
            name: "duration",
            reason: "program has zero total duration".into(),
        });
    }
    PotentialProgram::with_steps(kept)
}

/// Zero for `lead`, raised-cosine ramp to `amplitude`, hold for `plateau`,
/// ramp back to zero, zero for `tail`.
pub fn tube_pulse_program(
    amplitude: f64,
    ramp: f64,
    plateau: f64,
    lead: f64,
    tail: f64,
) -> Result<PotentialProgram> {
    for (name, v) in [
        ("ramp", ramp),
        ("plateau", plateau),
        ("lead", lead),
        ("tail", tail),
    ] {
        require_duration(name, v)?;
    }
    if !amplitude.is_finite() {
        return Err(Error::InvalidParameter {
            name: "amplitude",
            reason: format!("must be finite, got {amplitude}"),
        });
    }
    let total = lead + 2.0 * ramp + plateau + tail;
    if amplitude == 0.0 {
        return assemble(vec![Segment::constant(total, 0.0)]);
    }
    if ramp == 0.0 {
        return Err(Error::Domain(
            "a non-zero pulse needs a ramp of positive duration".into(),
        ));
    }
    let program = assemble(vec![
        Segment::constant(lead, 0.0),
        Segment::ramp(ramp, 0.0, amplitude),
        Segment::constant(plateau, amplitude),
        Segment::ramp(ramp, amplitude, 0.0),
        Segment::constant(tail, 0.0),
    ])?;
    debug_assert!(program.is_continuous());
    Ok(program)
}

/// Zero for `lead`, `level` for `dwell`, zero for `tail`.
///
/// The jumps stand in for the ascent and descent legs, which both arms share
/// and which therefore drop out of any two-arm phase.
pub fn elevator_program(level: f64, dwell: f64, lead: f64, tail: f64) -> Result<PotentialProgram> {
    for (name, v) in [("dwell", dwell), ("lead", lead), ("tail", tail)] {
        require_duration(name, v)?;
    }
    if !level.is_finite() {
        return Err(Error::InvalidParameter {
            name: "level",
            reason: format!("must be finite, got {level}"),
        });
    }
    if level == 0.0 {
        return assemble(vec![Segment::constant(lead + dwell + tail, 0.0)]);
    }
    assemble(vec![
        Segment::constant(lead, 0.0),
        Segment::constant(dwell, level),
        Segment::constant(tail, 0.0),
    ])
}

/// Elevator program at the Newtonian energy `m * (-M/R)` during the dwell.
pub fn newtonian_program(
    radius: f64,
    mass: f64,
    dwell: f64,
    constants: &Constants,
    lead: f64,
    tail: f64,
) -> Result<PotentialProgram> {
    if !(radius.is_finite() && radius > 0.0) {
        return Err(Error::Domain(format!(
            "radius must be strictly positive, got {radius}"
        )));
    }
    require_non_negative("mass", mass)?;
    let level = if mass == 0.0 {
        0.0
    } else {
        -constants.m * mass / radius
    };
    elevator_program(level, dwell, lead, tail)
}

fn check_metric(metric: &MetricParams, constants: &Constants) -> Result<()> {
    metric.validate()?;
    if metric.c != constants.c {
        return Err(Error::InvalidParameter {
            name: "c",
            reason: format!(
                "metric uses c = {} but the constants use c = {}",
                metric.c, constants.c
            ),
        });
    }
    metric.require_outside_horizon()?;
    metric.require_weak_field()
}

/// Metric-scaled Hamiltonian at constant altitude,
/// `m c^2 + kinetic_scale * p^2/2m - m M / R`.
///
/// With `include_correction` the kinetic term carries the weak-field factor
/// `1 - M/(R c^2)`; without it the low-velocity reduction keeps it at one.
pub fn semi_covariant_spec(
    metric: &MetricParams,
    constants: &Constants,
    include_correction: bool,
) -> Result<HamiltonianSpec> {
    check_metric(metric, constants)?;
    let deficit = metric.compactness();
    let kinetic_scale = if include_correction {
        1.0 - deficit
    } else {
        1.0
    };
    let rest_energy = constants.rest_energy() - constants.m * metric.mass / metric.radius;
    HamiltonianSpec::new(kinetic_scale, rest_energy, None)
}

/// Coordinate-time form of free proper-time evolution:
/// `redshift * (m c^2 + p^2/2m)`.
pub fn proper_time_spec(
    metric: &MetricParams,
    constants: &Constants,
    mode: RedshiftMode,
) -> Result<HamiltonianSpec> {
    check_metric(metric, constants)?;
    let factor = redshift_factor(metric, mode)?;
    let rest_energy = match mode {
        RedshiftMode::WeakField => {
            constants.rest_energy() - constants.m * metric.mass / metric.radius
        }
        RedshiftMode::Exact => constants.rest_energy() * factor,
    };
    HamiltonianSpec::new(factor, rest_energy, None)
}
