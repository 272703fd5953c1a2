//! The work behind each subcommand, independent of argument parsing.

use std::path::Path;
use std::time::Instant;

use abphase_core::analytic::{
    dwell_trajectories, electric_ab_phase, elevator_phase, kinetic_redshift_correction,
    newtonian_phase, proper_time_route_phase, redshift_factor, weakfield_loop_phase, Trajectory,
};
use abphase_core::interferometer::{
    default_fringe_kick, fringe_synthesize, route_equivalence, simulate as run, Scenario,
};
use abphase_core::solver::observables;
use abphase_core::{Constants, MetricParams, RedshiftMode};
use anyhow::{bail, Context, Result};
use clap::ValueEnum;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ArmConfig, ScenarioConfig};
use crate::output::{self, Convergence, RunReport};

/// Samples per leg when tabulating ascent and descent paths.
const LEG_SAMPLES: usize = 400;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LegShape {
    Linear,
    Cosine,
    Cubic,
}

impl LegShape {
    /// Fraction of the climb completed at fraction `s` of the leg time.
    fn progress(self, s: f64) -> f64 {
        match self {
            LegShape::Linear => s,
            LegShape::Cosine => 0.5 * (1.0 - (std::f64::consts::PI * s).cos()),
            LegShape::Cubic => s * s * (3.0 - 2.0 * s),
        }
    }

    /// Ascent from `r_low` to `r_high` over `duration`, and its mirror image.
    pub fn legs(
        self,
        r_low: f64,
        r_high: f64,
        duration: f64,
    ) -> abphase_core::Result<(Trajectory, Trajectory)> {
        let up = Trajectory::sampled(0.0, duration, LEG_SAMPLES, |t| {
            r_low + (r_high - r_low) * self.progress(t / duration)
        })?;
        let down = Trajectory::sampled(0.0, duration, LEG_SAMPLES, |t| {
            r_high + (r_low - r_high) * self.progress(t / duration)
        })?;
        Ok((up, down))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum AnalyticQuery {
    Newtonian {
        r1: f64,
        r2: f64,
        mass: f64,
        dwell: f64,
    },
    Elevator {
        v1: f64,
        v2: f64,
        dwell: f64,
    },
    Redshift {
        mass: f64,
        radius: f64,
    },
    Electric {
        config: Box<ScenarioConfig>,
    },
    Loop {
        r1: f64,
        r2: f64,
        mass: f64,
        dwell: f64,
        leg: f64,
        shape: LegShape,
    },
    ProperTime {
        r1: f64,
        r2: f64,
        mass: f64,
        dwell: f64,
        momentum: f64,
        mode: RedshiftMode,
    },
}

/// Named values printed by `analytic`.
pub fn analytic(query: &AnalyticQuery, constants: &Constants) -> Result<Vec<(&'static str, f64)>> {
    let c = constants;
    Ok(match query {
        &AnalyticQuery::Newtonian {
            r1,
            r2,
            mass,
            dwell,
        } => {
            vec![("phase", newtonian_phase(r1, r2, dwell, mass, c)?)]
        }
        &AnalyticQuery::Elevator { v1, v2, dwell } => {
            vec![("phase", elevator_phase(v1, v2, dwell, c)?)]
        }
        &AnalyticQuery::Redshift { mass, radius } => {
            let metric = MetricParams::new(mass, radius, c.c)?;
            let exact = redshift_factor(&metric, RedshiftMode::Exact)?;
            let weak = redshift_factor(&metric, RedshiftMode::WeakField)?;
            vec![
                ("exact", exact),
                ("weak-field", weak),
                ("difference", exact - weak),
            ]
        }
        AnalyticQuery::Electric { config } => {
            let s = config.resolve()?;
            vec![(
                "phase",
                electric_ab_phase(&s.arm1_program, &s.arm2_program, &s.constants)?,
            )]
        }
        &AnalyticQuery::Loop {
            r1,
            r2,
            mass,
            dwell,
            leg,
            shape,
        } => {
            let (up, down) = shape.legs(r1, r2, leg)?;
            let (t1, t2) = dwell_trajectories(&up, &down, dwell)?;
            let looped = weakfield_loop_phase(&t1, &t2, mass, c)?;
            let direct = newtonian_phase(r1, r2, dwell, mass, c)?;
            vec![
                ("loop-phase", looped),
                ("newtonian-phase", direct),
                ("difference", looped - direct),
            ]
        }
        &AnalyticQuery::ProperTime {
            r1,
            r2,
            mass,
            dwell,
            momentum,
            mode,
        } => {
            let tau = proper_time_route_phase(r1, r2, dwell, mass, momentum, mode, c)?;
            let direct = newtonian_phase(r1, r2, dwell, mass, c)?;
            let kinetic = kinetic_redshift_correction(r1, r2, dwell, mass, momentum * momentum, c)?;
            vec![
                ("phase", tau),
                ("newtonian-phase", direct),
                ("kinetic-correction", kinetic),
                ("difference", tau - direct),
            ]
        }
    })
}

/// Runs a scenario, writes `report.json`, `history.csv`, `fringes.csv` and
/// `scenario.toml` (the resolved configuration) into `out`.
pub fn simulate(config: &ScenarioConfig, out: &Path, convergence: bool) -> Result<RunReport> {
    let scenario = config.resolve()?;
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let started = Instant::now();
    let result = run(&scenario)?;
    let timing_seconds = started.elapsed().as_secs_f64();

    let kick = scenario
        .fringe_kick
        .unwrap_or_else(|| default_fringe_kick(&result.arm1, &scenario.constants));
    let pattern = fringe_synthesize(&result.arm1, &result.arm2, kick, &scenario.constants)?;

    let convergence = if convergence {
        let mut half = scenario.clone();
        half.step_size = 0.5 * scenario.step_size;
        half.record_stride = 2 * scenario.record_stride;
        let fine = run(&half)?.comparison.residual;
        let coarse = result.comparison.residual;
        Some(Convergence {
            step: scenario.step_size,
            residual: coarse,
            half_step: half.step_size,
            half_residual: fine,
            ratio: coarse.abs() / fine.abs(),
        })
    } else {
        None
    };

    let echo = ScenarioConfig::echo(&scenario);
    std::fs::write(out.join("scenario.toml"), echo.to_toml())?;
    output::write_history(&out.join("history.csv"), &result.history)?;
    output::write_fringes(&out.join("fringes.csv"), &pattern)?;
    let report = RunReport {
        scenario_echo: echo,
        comparison: result.comparison,
        fringe_kick: kick,
        fringe_shift: pattern.extracted_shift,
        timing_seconds,
        convergence,
    };
    output::write_report(&out.join("report.json"), &report)?;
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepParameter {
    /// Dwell time (metric routes), elevator dwell or pulse plateau.
    #[value(name = "dwell")]
    Dwell,
    /// Radius of arm 2.
    #[value(name = "R2")]
    R2,
    /// Central mass.
    #[value(name = "M")]
    M,
    /// Arm 1 pulse amplitude or elevator voltage.
    #[value(name = "amplitude")]
    Amplitude,
    /// Time step.
    #[value(name = "step")]
    Step,
}

impl SweepParameter {
    /// Copy of `config` with this parameter set to `value`.
    pub fn apply(self, config: &ScenarioConfig, value: f64) -> Result<ScenarioConfig> {
        let mut c = config.clone();
        c.time.record_stride = None;
        match self {
            SweepParameter::Dwell => {
                let mut touched = false;
                if c.route.uses_metric() {
                    c.time.dwell = Some(value);
                    touched = true;
                } else {
                    c.time.dwell = None;
                    c.time.tail = None;
                }
                for arm in [&mut c.arm1, &mut c.arm2].into_iter().flatten() {
                    match arm {
                        ArmConfig::Elevator { dwell, .. } => {
                            *dwell = value;
                            touched = true;
                        }
                        ArmConfig::Pulse { plateau, .. } => {
                            *plateau = value;
                            touched = true;
                        }
                        ArmConfig::Segments { .. } => {}
                    }
                }
                if !touched {
                    bail!("this scenario has nothing for `dwell` to change");
                }
            }
            SweepParameter::R2 | SweepParameter::M => {
                let gravity = c
                    .gravity
                    .as_mut()
                    .context("sweeping R2 or M needs a [gravity] table")?;
                if self == SweepParameter::R2 {
                    gravity.r2 = value;
                } else {
                    gravity.mass = value;
                }
            }
            SweepParameter::Amplitude => match c.arm1.as_mut() {
                Some(ArmConfig::Pulse { amplitude, .. }) => *amplitude = value,
                Some(ArmConfig::Elevator { voltage, .. }) => *voltage = value,
                _ => bail!("sweeping amplitude needs a pulse or elevator program on arm 1"),
            },
            SweepParameter::Step => c.time.step = Some(value),
        }
        Ok(c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub numeric_phase: f64,
    pub analytic_phase: f64,
    pub residual: f64,
}

/// One run per value on up to `workers` threads; rows keep the input order.
pub fn sweep(
    config: &ScenarioConfig,
    parameter: SweepParameter,
    values: &[f64],
    workers: usize,
    out: &Path,
) -> Result<Vec<SweepRow>> {
    let configs = values
        .iter()
        .map(|&v| parameter.apply(config, v))
        .collect::<Result<Vec<_>>>()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()?;
    let rows = pool.install(|| {
        configs
            .par_iter()
            .zip(values)
            .map(|(c, &value)| {
                let scenario = c.resolve().with_context(|| format!("value {value}"))?;
                let r = run(&scenario)
                    .with_context(|| format!("value {value}"))?
                    .comparison;
                Ok(SweepRow {
                    value,
                    numeric_phase: r.numeric_phase,
                    analytic_phase: r.analytic_phase,
                    residual: r.residual,
                })
            })
            .collect::<Result<Vec<_>>>()
    })?;
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    output::write_csv(
        &out.join("sweep.csv"),
        &["value", "numeric_phase", "analytic_phase", "residual"],
        rows.iter()
            .map(|r| [r.value, r.numeric_phase, r.analytic_phase, r.residual]),
    )?;
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RouteReport {
    pub semi_covariant: f64,
    pub proper_time: f64,
    pub difference: f64,
    /// Two-arm kinetic correction `(<p^2>/2m)(M/c^2)(1/R2 - 1/R1) dwell / hbar`,
    /// the expected difference when only one route carries it.
    pub kinetic_correction: f64,
}

pub fn compare_routes(config: &ScenarioConfig) -> Result<RouteReport> {
    let scenario: Scenario = config.resolve()?;
    let (m1, m2) = match (scenario.metric1, scenario.metric2) {
        (Some(a), Some(b)) => (a, b),
        _ => bail!("compare-routes needs a [gravity] table"),
    };
    let r = route_equivalence(&scenario)?;
    let mean_sq = observables(&scenario.initial_state()?, &scenario.constants).mean_p_sq;
    let kinetic = kinetic_redshift_correction(
        m1.radius,
        m2.radius,
        scenario.dwell_time,
        m1.mass,
        mean_sq,
        &scenario.constants,
    )?;
    Ok(RouteReport {
        semi_covariant: r.phase_semi_covariant,
        proper_time: r.phase_proper_time,
        difference: r.difference,
        kinetic_correction: kinetic,
    })
}
