//! Scenario files: a TOML tree resolved into a validated [`Scenario`].
//!
//! Every table except `packet` is optional. Missing values take the
//! natural-unit defaults (`hbar = m = e = 1`, `c = 1e3`, 4096 points over a
//! length of 400), and the time step and recording stride are picked to
//! satisfy the propagator's stability and sampling conditions.

use std::f64::consts::PI;
use std::path::Path;

use abphase_core::constants::DEFAULT_SPEED_OF_LIGHT;
use abphase_core::interferometer::{Route, Scenario, DEFAULT_TUBE_FRACTION};
use abphase_core::potentials::{elevator_program, tube_pulse_program};
use abphase_core::solver::{Interval, MAX_KICK_PHASE, MAX_NYQUIST_PHASE};
use abphase_core::{
    Constants, Grid1D, MetricParams, PacketSpec, PotentialProgram, RedshiftMode, Segment,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Fraction of each stability bound the automatic step uses.
const STEP_SAFETY: f64 = 0.5;
/// Automatic recording keeps the predicted phase advance per sample below this.
const MAX_SAMPLE_PHASE: f64 = PI / 2.0;
/// Automatic recording aims for roughly this many samples.
const TARGET_SAMPLES: usize = 500;
const DURATION_TOLERANCE: f64 = 1e-12;
const MAX_STEP_SEARCH: usize = 100_000;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error(transparent)]
    Core(#[from] abphase_core::Error),
}

pub type Result<T> = std::result::Result<T, ConfigError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub route: Route,
    #[serde(default)]
    pub constants: ConstantsConfig,
    #[serde(default)]
    pub grid: GridConfig,
    pub packet: PacketConfig,
    #[serde(default)]
    pub time: TimeConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arm1: Option<ArmConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arm2: Option<ArmConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gravity: Option<GravityConfig>,
    #[serde(default)]
    pub options: OptionsConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConstantsConfig {
    pub hbar: f64,
    pub c: f64,
    pub m: f64,
    pub e: f64,
}

impl Default for ConstantsConfig {
    fn default() -> Self {
        Self {
            hbar: 1.0,
            c: DEFAULT_SPEED_OF_LIGHT,
            m: 1.0,
            e: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub n_points: usize,
    pub length: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            n_points: 4096,
            length: 400.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PacketConfig {
    #[serde(default)]
    pub center: f64,
    pub width: f64,
    #[serde(default)]
    pub momentum: f64,
}

/// Timing. `lead`, `dwell` and `tail` split the run into flat / constant
/// altitude / flat; on the flat-electric route they are bookkeeping only.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub record_stride: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lead: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dwell: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail: Option<f64>,
}

/// Uniform potential energy applied to one arm for the whole run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ArmConfig {
    /// Zero, raised-cosine rise, plateau, fall, zero.
    Pulse {
        amplitude: f64,
        ramp: f64,
        plateau: f64,
        #[serde(default)]
        lead: f64,
        #[serde(default)]
        tail: f64,
    },
    /// Held at electric potential `voltage` (energy `e * voltage`) for `dwell`.
    Elevator {
        voltage: f64,
        dwell: f64,
        #[serde(default)]
        lead: f64,
        #[serde(default)]
        tail: f64,
    },
    /// Explicit segment list.
    Segments { segments: Vec<Segment> },
}

impl ArmConfig {
    pub fn program(&self, constants: &Constants) -> Result<PotentialProgram> {
        Ok(match *self {
            ArmConfig::Pulse {
                amplitude,
                ramp,
                plateau,
                lead,
                tail,
            } => tube_pulse_program(amplitude, ramp, plateau, lead, tail)?,
            ArmConfig::Elevator {
                voltage,
                dwell,
                lead,
                tail,
            } => elevator_program(constants.e * voltage, dwell, lead, tail)?,
            ArmConfig::Segments { ref segments } => PotentialProgram::with_steps(segments.clone())?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GravityConfig {
    pub mass: f64,
    pub r1: f64,
    pub r2: f64,
    #[serde(default)]
    pub include_correction: bool,
    #[serde(default = "weak_field")]
    pub redshift_mode: RedshiftMode,
}

fn weak_field() -> RedshiftMode {
    RedshiftMode::WeakField
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptionsConfig {
    /// Subtract `m c^2` from both arms; defaults per route.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rotating_frame: Option<bool>,
    /// Interaction region `[lo, hi]`; defaults to the central 80% of the grid.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tube: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fringe_kick: Option<f64>,
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.message().to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text)
    }

    /// Applies defaults and validates.
    pub fn resolve(&self) -> Result<Scenario> {
        let k = self.constants;
        let constants = Constants::new(k.hbar, k.c, k.m, k.e)?;
        let grid = Grid1D::new(self.grid.n_points, self.grid.length)?;
        let (arm1_program, arm2_program) = self.programs(&constants)?;
        let total = arm1_program.total_duration();
        let (dwell_start, dwell_time) = self.dwell_window(total)?;

        let (metric1, metric2) = match self.gravity {
            Some(g) => (
                Some(MetricParams::new(g.mass, g.r1, constants.c)?),
                Some(MetricParams::new(g.mass, g.r2, constants.c)?),
            ),
            None if self.route.uses_metric() => {
                return Err(ConfigError::Invalid(format!(
                    "route {} needs a [gravity] table with mass, r1 and r2",
                    self.route
                )))
            }
            None => (None, None),
        };
        let gravity = self.gravity;
        let tube = match self.options.tube {
            Some([lo, hi]) => Interval::new(lo, hi)?,
            None => {
                let half = DEFAULT_TUBE_FRACTION * grid.length();
                Interval::new(-half, half)?
            }
        };
        let packet = PacketSpec {
            center: self.packet.center,
            width: self.packet.width,
            momentum: self.packet.momentum,
        };
        let mut scenario = Scenario {
            constants,
            grid,
            packet,
            arm1_program,
            arm2_program,
            route: self.route,
            dwell_start,
            dwell_time,
            metric1,
            metric2,
            step_size: 0.0,
            record_stride: 1,
            tube,
            include_correction: gravity.map(|g| g.include_correction).unwrap_or(false),
            rotating_frame: self
                .options
                .rotating_frame
                .unwrap_or(self.route.default_rotating_frame()),
            redshift_mode: gravity
                .map(|g| g.redshift_mode)
                .unwrap_or(RedshiftMode::WeakField),
            fringe_kick: self.options.fringe_kick,
        };
        scenario.step_size = match self.time.step {
            Some(step) => step,
            None => automatic_step(&scenario)?,
        };
        scenario.record_stride = match self.time.record_stride {
            Some(stride) => stride,
            None => automatic_stride(&scenario)?,
        };
        scenario.validate()?;
        Ok(scenario)
    }

    fn programs(&self, constants: &Constants) -> Result<(PotentialProgram, PotentialProgram)> {
        let build =
            |arm: &Option<ArmConfig>| arm.as_ref().map(|a| a.program(constants)).transpose();
        match (build(&self.arm1)?, build(&self.arm2)?) {
            (Some(a), Some(b)) => Ok((a, b)),
            (Some(a), None) => {
                let zero = PotentialProgram::zero(a.total_duration())?;
                Ok((a, zero))
            }
            (None, Some(b)) => {
                let zero = PotentialProgram::zero(b.total_duration())?;
                Ok((zero, b))
            }
            (None, None) => {
                let t = self.time;
                match (self.route.uses_metric(), t.dwell) {
                    (true, Some(dwell)) => {
                        let zero = PotentialProgram::zero(
                            t.lead.unwrap_or(0.0) + dwell + t.tail.unwrap_or(0.0),
                        )?;
                        Ok((zero.clone(), zero))
                    }
                    (true, None) => Err(ConfigError::Invalid(
                        "time.dwell is required when no arm programs are given".into(),
                    )),
                    (false, _) => Err(ConfigError::Invalid(
                        "the flat-electric route needs at least one arm program".into(),
                    )),
                }
            }
        }
    }

    fn dwell_window(&self, total: f64) -> Result<(f64, f64)> {
        let t = self.time;
        let lead = t.lead.unwrap_or(0.0);
        let tail = t.tail.unwrap_or(0.0);
        let dwell = match t.dwell {
            Some(d) => d,
            None if self.route.uses_metric() => {
                return Err(ConfigError::Invalid(
                    "time.dwell is required on metric routes".into(),
                ))
            }
            None => total - lead - tail,
        };
        if t.tail.is_some() {
            let sum = lead + dwell + tail;
            if (sum - total).abs() > DURATION_TOLERANCE * total.max(1.0) {
                return Err(ConfigError::Invalid(format!(
                    "time.lead + time.dwell + time.tail = {sum} but the arm programs last {total}"
                )));
            }
        }
        if lead < 0.0
            || dwell < 0.0
            || tail < 0.0
            || lead + dwell > total * (1.0 + DURATION_TOLERANCE)
        {
            return Err(ConfigError::Invalid(format!(
                "dwell window lead = {lead}, dwell = {dwell} does not fit in a run of {total}"
            )));
        }
        Ok((lead, dwell))
    }

    /// Fully explicit configuration that resolves to `scenario` again.
    pub fn echo(scenario: &Scenario) -> Self {
        let c = scenario.constants;
        let total = scenario.total_duration();
        let gravity = match (scenario.metric1, scenario.metric2) {
            (Some(m1), Some(m2)) => Some(GravityConfig {
                mass: m1.mass,
                r1: m1.radius,
                r2: m2.radius,
                include_correction: scenario.include_correction,
                redshift_mode: scenario.redshift_mode,
            }),
            _ => None,
        };
        Self {
            route: scenario.route,
            constants: ConstantsConfig {
                hbar: c.hbar,
                c: c.c,
                m: c.m,
                e: c.e,
            },
            grid: GridConfig {
                n_points: scenario.grid.n_points(),
                length: scenario.grid.length(),
            },
            packet: PacketConfig {
                center: scenario.packet.center,
                width: scenario.packet.width,
                momentum: scenario.packet.momentum,
            },
            time: TimeConfig {
                step: Some(scenario.step_size),
                record_stride: Some(scenario.record_stride),
                lead: Some(scenario.dwell_start),
                dwell: Some(scenario.dwell_time),
                tail: Some(total - scenario.dwell_start - scenario.dwell_time),
            },
            arm1: Some(ArmConfig::Segments {
                segments: scenario.arm1_program.segments().to_vec(),
            }),
            arm2: Some(ArmConfig::Segments {
                segments: scenario.arm2_program.segments().to_vec(),
            }),
            gravity,
            options: OptionsConfig {
                rotating_frame: Some(scenario.rotating_frame),
                tube: Some([scenario.tube.lo, scenario.tube.hi]),
                fringe_kick: scenario.fringe_kick,
            },
        }
    }
}

/// Reads and resolves a scenario file.
pub fn parse_scenario(text: &str) -> Result<Scenario> {
    ScenarioConfig::from_toml(text)?.resolve()
}

/// Upper bound on `|uniform energy|` over the run, frame removed.
fn energy_bound(scenario: &Scenario) -> f64 {
    let c = &scenario.constants;
    let frame = if scenario.rotating_frame {
        c.rest_energy()
    } else {
        0.0
    };
    let program = scenario
        .arm1_program
        .max_abs()
        .max(scenario.arm2_program.max_abs());
    let gravity = match (
        scenario.route.uses_metric(),
        scenario.metric1,
        scenario.metric2,
    ) {
        (true, Some(a), Some(b)) => c.m * a.mass / a.radius.min(b.radius),
        _ => 0.0,
    };
    (c.rest_energy() - frame).abs() + gravity + program
}

/// Largest step `T / n` inside half of both stability bounds that also puts
/// the dwell window on step boundaries.
fn automatic_step(scenario: &Scenario) -> Result<f64> {
    let c = &scenario.constants;
    let k = scenario.grid.nyquist_wavenumber();
    let kinetic = MAX_NYQUIST_PHASE * 2.0 * c.m / (c.hbar * k * k);
    let energy = energy_bound(scenario);
    let kick = if energy > 0.0 {
        MAX_KICK_PHASE * c.hbar / energy
    } else {
        f64::INFINITY
    };
    let limit = STEP_SAFETY * kinetic.min(kick);
    let total = scenario.total_duration();
    let first = (total / limit).ceil().max(1.0) as usize;
    let on_grid = |x: f64, step: f64| {
        let n = (x / step).round();
        (n * step - x).abs() <= 1e-9 * x.max(step)
    };
    for n in first..first + MAX_STEP_SEARCH {
        let step = total / n as f64;
        if !scenario.route.uses_metric()
            || (on_grid(scenario.dwell_start, step) && on_grid(scenario.dwell_time, step))
        {
            return Ok(step);
        }
    }
    Err(ConfigError::Invalid(format!(
        "no step below {limit:.3e} fits the dwell window; set time.step explicitly"
    )))
}

/// Largest divisor of the step count that keeps samples near
/// [`TARGET_SAMPLES`] and the predicted phase advance per sample small.
fn automatic_stride(scenario: &Scenario) -> Result<usize> {
    let n = scenario.total_steps()?;
    if n == 0 {
        return Ok(1);
    }
    let c = &scenario.constants;
    let p = &scenario.packet;
    let spread = c.hbar / (2.0 * p.width);
    let kinetic = (p.momentum * p.momentum + spread * spread) / (2.0 * c.m);
    let per_step = (energy_bound(scenario) + kinetic) * scenario.step_size / c.hbar;
    let by_phase = if per_step > 0.0 {
        (MAX_SAMPLE_PHASE / per_step).floor() as usize
    } else {
        n
    };
    let cap = by_phase.min((n / TARGET_SAMPLES).max(1)).max(1);
    Ok((1..=cap).rev().find(|d| n % d == 0).unwrap_or(1))
}
