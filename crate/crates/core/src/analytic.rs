//! Closed-form phase predictions, used as oracles for the dynamical solver.
//!
//! Sign convention: states evolve as `i hbar d/dt psi = H psi`, so an arm that
//! spends time at higher energy lags in phase. Every two-arm phase here is the
//! lag of arm 1 behind arm 2, `(1/hbar) * integral of (E_1 - E_2) dt`, which is
//! also `arg <psi_1|psi_2>` for the simulated states.

use serde::{Deserialize, Serialize};

use crate::constants::Constants;
use crate::error::{require_non_negative, Error, Result};
use crate::metric::MetricParams;
use crate::program::PotentialProgram;

const SPAN_TOLERANCE: f64 = 1e-12;

/// Electric loop phase `(1/hbar) * closed-loop integral of U dt`.
///
/// Program levels are potential energies `U = e phi`, so this equals
/// `(e/hbar)(integral phi_1 dt - integral phi_2 dt)`.
pub fn electric_ab_phase(
    program1: &PotentialProgram,
    program2: &PotentialProgram,
    constants: &Constants,
) -> Result<f64> {
    require_equal_spans(
        "arm programs",
        (0.0, program1.total_duration()),
        (0.0, program2.total_duration()),
    )?;
    Ok((program1.integral() - program2.integral()) / constants.hbar)
}

/// `(e/hbar)(V1 - V2) dwell` for arms held at electric potentials `V1`, `V2`.
pub fn elevator_phase(v1: f64, v2: f64, dwell: f64, constants: &Constants) -> Result<f64> {
    require_non_negative("dwell", dwell)?;
    Ok(constants.e * (v1 - v2) * dwell / constants.hbar)
}

/// `(m M / hbar)(1/R2 - 1/R1) dwell`: arm 1 waits at `R1`, arm 2 at `R2`.
pub fn newtonian_phase(
    r1: f64,
    r2: f64,
    dwell: f64,
    mass: f64,
    constants: &Constants,
) -> Result<f64> {
    require_radius(r1)?;
    require_radius(r2)?;
    require_non_negative("dwell", dwell)?;
    require_non_negative("mass", mass)?;
    Ok(constants.m * mass * (1.0 / r2 - 1.0 / r1) * dwell / constants.hbar)
}

/// Altitude history `R(t)` of one arm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(f64, f64)>", into = "Vec<(f64, f64)>")]
pub struct Trajectory {
    samples: Vec<(f64, f64)>,
}

impl Trajectory {
    pub fn new(samples: Vec<(f64, f64)>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::InvalidParameter {
                name: "samples",
                reason: "a trajectory needs at least two samples".into(),
            });
        }
        for &(t, r) in &samples {
            if !t.is_finite() {
                return Err(Error::InvalidParameter {
                    name: "samples",
                    reason: format!("non-finite time {t}"),
                });
            }
            require_radius(r)?;
        }
        if samples.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::InvalidParameter {
                name: "samples",
                reason: "sample times must be strictly increasing".into(),
            });
        }
        Ok(Self { samples })
    }

    /// Samples `radius(t)` at `n + 1` evenly spaced times on `[t0, t1]`.
    pub fn sampled(t0: f64, t1: f64, n: usize, radius: impl Fn(f64) -> f64) -> Result<Self> {
        let n = n.max(1);
        let h = (t1 - t0) / n as f64;
        Self::new(
            (0..=n)
                .map(|i| {
                    let t = if i == n { t1 } else { t0 + i as f64 * h };
                    (t, radius(t))
                })
                .collect(),
        )
    }

    pub fn constant(t0: f64, t1: f64, radius: f64) -> Result<Self> {
        Self::new(vec![(t0, radius), (t1, radius)])
    }

    pub fn samples(&self) -> &[(f64, f64)] {
        &self.samples
    }

    pub fn start(&self) -> (f64, f64) {
        self.samples[0]
    }

    pub fn end(&self) -> (f64, f64) {
        self.samples[self.samples.len() - 1]
    }

    pub fn span(&self) -> (f64, f64) {
        (self.start().0, self.end().0)
    }

    /// Trapezoid rule for `integral of 1/R(t) dt`.
    pub fn inverse_radius_integral(&self) -> f64 {
        self.samples
            .windows(2)
            .map(|w| 0.5 * (w[1].0 - w[0].0) * (1.0 / w[0].1 + 1.0 / w[1].1))
            .sum()
    }

    /// Same path delayed by `dt`.
    pub fn shifted(&self, dt: f64) -> Self {
        Self {
            samples: self.samples.iter().map(|&(t, r)| (t + dt, r)).collect(),
        }
    }

    /// Appends `next`, whose first sample must coincide with this path's last.
    pub fn then(&self, next: &Trajectory) -> Result<Self> {
        let (t_end, r_end) = self.end();
        let (t_next, r_next) = next.start();
        let scale = t_end.abs().max(1.0);
        if (t_end - t_next).abs() > SPAN_TOLERANCE * scale || r_end != r_next {
            return Err(Error::Scenario(format!(
                "trajectory pieces do not join: ({t_end}, {r_end}) vs ({t_next}, {r_next})"
            )));
        }
        let mut samples = self.samples.clone();
        samples.extend_from_slice(&next.samples[1..]);
        Self::new(samples)
    }

    /// Splits at an existing sample time; both halves keep that sample.
    pub fn split_at(&self, t: f64) -> Result<(Self, Self)> {
        let i = self
            .samples
            .iter()
            .position(|&(ts, _)| ts == t)
            .ok_or_else(|| Error::Domain(format!("t = {t} is not a sample time")))?;
        if i == 0 || i + 1 == self.samples.len() {
            return Err(Error::Domain(format!("t = {t} is an endpoint")));
        }
        Ok((
            Self::new(self.samples[..=i].to_vec())?,
            Self::new(self.samples[i..].to_vec())?,
        ))
    }
}

impl TryFrom<Vec<(f64, f64)>> for Trajectory {
    type Error = Error;

    fn try_from(samples: Vec<(f64, f64)>) -> Result<Self> {
        Self::new(samples)
    }
}

impl From<Trajectory> for Vec<(f64, f64)> {
    fn from(t: Trajectory) -> Self {
        t.samples
    }
}

/// The two arm histories of the elevator experiment.
///
/// Both arms ride the same `ascent` (from `R1` up to `R2`) and `descent` (back
/// to `R1`). Arm 1 descends at once and then waits `dwell` at `R1`; arm 2 waits
/// `dwell` at `R2` before descending. The legs are identical copies shifted in
/// time, so in the loop integral they cancel and only the waits survive.
pub fn dwell_trajectories(
    ascent: &Trajectory,
    descent: &Trajectory,
    dwell: f64,
) -> Result<(Trajectory, Trajectory)> {
    if !(dwell.is_finite() && dwell > 0.0) {
        return Err(Error::InvalidParameter {
            name: "dwell",
            reason: format!("must be strictly positive, got {dwell}"),
        });
    }
    let (r_low, r_high) = (ascent.start().1, ascent.end().1);
    if descent.start().1 != r_high || descent.end().1 != r_low {
        return Err(Error::Scenario(
            "descent must retrace the ascent's radii in reverse".into(),
        ));
    }
    let ascent = ascent.shifted(-ascent.start().0);
    let t_top = ascent.end().0;
    let descent = descent.shifted(-descent.start().0);
    let t_down = descent.end().0;

    let arm1 = ascent
        .then(&descent.shifted(t_top))?
        .then(&Trajectory::constant(
            t_top + t_down,
            t_top + t_down + dwell,
            r_low,
        )?)?;
    let arm2 = ascent
        .then(&Trajectory::constant(t_top, t_top + dwell, r_high)?)?
        .then(&descent.shifted(t_top + dwell))?;
    Ok((arm1, arm2))
}

/// `-(m/hbar) * closed-loop integral of M/R(t) dt`, out along `traj1` and back along `traj2`.
pub fn weakfield_loop_phase(
    traj1: &Trajectory,
    traj2: &Trajectory,
    mass: f64,
    constants: &Constants,
) -> Result<f64> {
    require_non_negative("mass", mass)?;
    require_equal_spans("trajectories", traj1.span(), traj2.span())?;
    let loop_integral = traj1.inverse_radius_integral() - traj2.inverse_radius_integral();
    Ok(-constants.m * mass * loop_integral / constants.hbar)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RedshiftMode {
    /// `sqrt(1 - 2M/(R c^2))`
    Exact,
    /// `1 - M/(R c^2)`
    WeakField,
}

/// Ratio of proper time to coordinate time for a static clock, `sqrt(-g_tt)`.
pub fn redshift_factor(metric: &MetricParams, mode: RedshiftMode) -> Result<f64> {
    metric.validate()?;
    metric.require_outside_horizon()?;
    let x = metric.compactness();
    Ok(match mode {
        RedshiftMode::Exact => (1.0 - 2.0 * x).sqrt(),
        RedshiftMode::WeakField => 1.0 - x,
    })
}

/// `redshift_factor(a) - redshift_factor(b)` without cancellation.
pub fn redshift_difference(a: &MetricParams, b: &MetricParams, mode: RedshiftMode) -> Result<f64> {
    let fa = redshift_factor(a, mode)?;
    let fb = redshift_factor(b, mode)?;
    Ok(match mode {
        RedshiftMode::WeakField => redshift_deficit_difference(b, a),
        RedshiftMode::Exact => 2.0 * redshift_deficit_difference(b, a) / (fa + fb),
    })
}

/// `M_a/(R_a c^2) - M_b/(R_b c^2)` evaluated as one expression when `c` agrees.
fn redshift_deficit_difference(a: &MetricParams, b: &MetricParams) -> f64 {
    if a.c == b.c {
        (a.mass / a.radius - b.mass / b.radius) / (a.c * a.c)
    } else {
        a.compactness() - b.compactness()
    }
}

/// Phase of the proper-time route: each arm runs the free Hamiltonian
/// `m c^2 + p^2/2m` for its own proper time `redshift(R_i) * dwell`.
pub fn proper_time_route_phase(
    r1: f64,
    r2: f64,
    dwell: f64,
    mass: f64,
    momentum: f64,
    mode: RedshiftMode,
    constants: &Constants,
) -> Result<f64> {
    require_non_negative("dwell", dwell)?;
    let m1 = MetricParams::new(mass, r1, constants.c)?;
    let m2 = MetricParams::new(mass, r2, constants.c)?;
    m1.require_weak_field()?;
    m2.require_weak_field()?;
    let energy = constants.rest_energy() + momentum * momentum / (2.0 * constants.m);
    Ok(energy * redshift_difference(&m1, &m2, mode)? * dwell / constants.hbar)
}

/// Velocity-dependent part of the weak-field two-arm phase,
/// `(p^2/2m)(M/c^2)(1/R2 - 1/R1) dwell / hbar`; it is what separates the
/// full metric-scaled kinetic term from its low-velocity reduction.
pub fn kinetic_redshift_correction(
    r1: f64,
    r2: f64,
    dwell: f64,
    mass: f64,
    mean_sq_momentum: f64,
    constants: &Constants,
) -> Result<f64> {
    require_radius(r1)?;
    require_radius(r2)?;
    require_non_negative("mean_sq_momentum", mean_sq_momentum)?;
    let c2 = constants.c * constants.c;
    Ok(
        mean_sq_momentum / (2.0 * constants.m) * (mass / c2) * (1.0 / r2 - 1.0 / r1) * dwell
            / constants.hbar,
    )
}

fn require_radius(r: f64) -> Result<()> {
    if r.is_finite() && r > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "radius must be strictly positive, got {r}"
        )))
    }
}

fn require_equal_spans(what: &str, a: (f64, f64), b: (f64, f64)) -> Result<()> {
    let scale = a.0.abs().max(a.1.abs()).max(1.0);
    if (a.0 - b.0).abs() > SPAN_TOLERANCE * scale || (a.1 - b.1).abs() > SPAN_TOLERANCE * scale {
        return Err(Error::Scenario(format!(
            "{what} cover different time spans: [{}, {}] vs [{}, {}]",
            a.0, a.1, b.0, b.1
        )));
    }
    Ok(())
}
