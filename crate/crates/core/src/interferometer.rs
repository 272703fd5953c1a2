//! The two-arm experiment: split one packet, evolve each half under its own
//! history, recombine, and compare the relative phase with its closed form.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::analytic::{
    electric_ab_phase, kinetic_redshift_correction, newtonian_phase, proper_time_route_phase,
    redshift_factor, RedshiftMode,
};
use crate::constants::Constants;
use crate::error::{Error, Result};
use crate::grid::Grid1D;
use crate::metric::MetricParams;
use crate::potentials::{semi_covariant_spec, HamiltonianSpec};
use crate::program::PotentialProgram;
use crate::solver::{
    wrap_phase, Evolution, EvolvePlan, Interval, Propagator, Stage, DECOHERENCE_THRESHOLD,
};
use crate::wavefunction::{make_gaussian_packet, PacketSpec, Wavefunction};

/// Minimum norm fraction inside the tube while a potential or field acts.
pub const CONTAINMENT_THRESHOLD: f64 = 1.0 - 1e-8;
/// Default tube half-width as a fraction of the grid length.
pub const DEFAULT_TUBE_FRACTION: f64 = 0.4;
/// Smallest admissible `kick * extent / hbar`.
pub const MIN_FRINGE_PHASE: f64 = 4.0 * PI;
/// Default recombiner kick is this many radians over one packet width.
pub const DEFAULT_FRINGE_PHASE: f64 = 8.0 * PI;

const STEP_TOLERANCE: f64 = 1e-9;
const DURATION_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Route {
    /// `m c^2 + p^2/2m + U_i(t)` on each arm.
    FlatElectric,
    /// Adds the Newtonian energy `-m M / R_i` while the arms dwell.
    Newtonian,
    /// Metric-scaled Hamiltonian in coordinate time while the arms dwell.
    SemiCovariant,
    /// Free Hamiltonian advanced in each arm's proper time while the arms dwell.
    ProperTime,
}

impl Route {
    pub const ALL: [Route; 4] = [
        Route::FlatElectric,
        Route::Newtonian,
        Route::SemiCovariant,
        Route::ProperTime,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Route::FlatElectric => "flat-electric",
            Route::Newtonian => "newtonian",
            Route::SemiCovariant => "semi-covariant",
            Route::ProperTime => "proper-time",
        }
    }

    pub fn uses_metric(self) -> bool {
        !matches!(self, Route::FlatElectric)
    }

    /// Whether `m c^2` is removed from both arms by default. The red-shifted
    /// rest energy is the signal on the metric routes, so it stays there.
    pub fn default_rotating_frame(self) -> bool {
        matches!(self, Route::FlatElectric | Route::Newtonian)
    }
}

impl fmt::Display for Route {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Route {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Route::ALL
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| Error::InvalidParameter {
                name: "route",
                reason: format!("unknown route `{s}`"),
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Arm {
    One,
    Two,
}

/// Everything needed to run one two-arm experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub constants: Constants,
    pub grid: Grid1D,
    pub packet: PacketSpec,
    /// Uniform potential energy on each arm over the whole run.
    pub arm1_program: PotentialProgram,
    pub arm2_program: PotentialProgram,
    pub route: Route,
    /// Start of the constant-altitude interval (metric routes only).
    pub dwell_start: f64,
    pub dwell_time: f64,
    pub metric1: Option<MetricParams>,
    pub metric2: Option<MetricParams>,
    pub step_size: f64,
    pub record_stride: usize,
    /// Interaction region that must hold the packet while anything acts on it.
    pub tube: Interval,
    /// Keep the weak-field factor on the kinetic term (semi-covariant route).
    pub include_correction: bool,
    pub rotating_frame: bool,
    pub redshift_mode: RedshiftMode,
    /// Recombiner momentum kick; `None` picks one from the final packet width.
    pub fringe_kick: Option<f64>,
}

impl Scenario {
    /// Flat-space scenario driven only by the two arm programs.
    pub fn flat_electric(
        constants: Constants,
        grid: Grid1D,
        packet: PacketSpec,
        arm1_program: PotentialProgram,
        arm2_program: PotentialProgram,
        step_size: f64,
        record_stride: usize,
    ) -> Result<Self> {
        let dwell_time = arm1_program.total_duration();
        let scenario = Self {
            constants,
            grid,
            packet,
            arm1_program,
            arm2_program,
            route: Route::FlatElectric,
            dwell_start: 0.0,
            dwell_time,
            metric1: None,
            metric2: None,
            step_size,
            record_stride,
            tube: default_tube(&grid),
            include_correction: false,
            rotating_frame: Route::FlatElectric.default_rotating_frame(),
            redshift_mode: RedshiftMode::WeakField,
            fringe_kick: None,
        };
        scenario.validate()?;
        Ok(scenario)
    }

    /// Arms at rest in flat space for `lead`, at `R1` / `R2` for `dwell`,
    /// then flat again for `tail`; no electric programs.
    #[allow(clippy::too_many_arguments)]
    pub fn gravitational(
        route: Route,
        constants: Constants,
        grid: Grid1D,
        packet: PacketSpec,
        metric1: MetricParams,
        metric2: MetricParams,
        (lead, dwell, tail): (f64, f64, f64),
        step_size: f64,
        record_stride: usize,
    ) -> Result<Self> {
        let total = lead + dwell + tail;
        let zero = PotentialProgram::zero(total)?;
        let scenario = Self {
            constants,
            grid,
            packet,
            arm1_program: zero.clone(),
            arm2_program: zero,
            route,
            dwell_start: lead,
            dwell_time: dwell,
            metric1: Some(metric1),
            metric2: Some(metric2),
            step_size,
            record_stride,
            tube: default_tube(&grid),
            include_correction: false,
            rotating_frame: route.default_rotating_frame(),
            redshift_mode: RedshiftMode::WeakField,
            fringe_kick: None,
        };
        scenario.validate()?;
        Ok(scenario)
    }

    /// Same scenario on another route, with that route's default frame.
    pub fn with_route(mut self, route: Route) -> Self {
        self.route = route;
        self.rotating_frame = route.default_rotating_frame();
        self
    }

    pub fn total_duration(&self) -> f64 {
        self.arm1_program.total_duration()
    }

    pub fn total_steps(&self) -> Result<usize> {
        whole_steps("total duration", self.total_duration(), self.step_size)
    }

    pub fn validate(&self) -> Result<()> {
        self.constants.validate()?;
        let (t1, t2) = (
            self.arm1_program.total_duration(),
            self.arm2_program.total_duration(),
        );
        if (t1 - t2).abs() > DURATION_TOLERANCE * t1.max(t2) {
            return Err(Error::Scenario(format!(
                "arm programs must have equal total duration, got {t1} and {t2}"
            )));
        }
        if !(self.step_size.is_finite() && self.step_size > 0.0) {
            return Err(Error::Scenario(format!(
                "step_size must be positive, got {}",
                self.step_size
            )));
        }
        let steps = self.total_steps()?;
        if self.record_stride == 0 || steps % self.record_stride != 0 {
            return Err(Error::Scenario(format!(
                "record_stride {} must divide the step count {steps}",
                self.record_stride
            )));
        }
        for (name, v) in [
            ("dwell_start", self.dwell_start),
            ("dwell_time", self.dwell_time),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Scenario(format!(
                    "{name} must be non-negative, got {v}"
                )));
            }
        }
        if self.dwell_start + self.dwell_time > t1 * (1.0 + DURATION_TOLERANCE) {
            return Err(Error::Scenario(format!(
                "dwell [{}, {}] extends past the end of the run at {t1}",
                self.dwell_start,
                self.dwell_start + self.dwell_time
            )));
        }
        if self.route.uses_metric() {
            whole_steps("dwell_start", self.dwell_start, self.step_size)?;
            whole_steps("dwell_time", self.dwell_time, self.step_size)?;
            let (m1, m2) = self.metrics()?;
            for m in [m1, m2] {
                m.validate()?;
                if m.c != self.constants.c {
                    return Err(Error::Scenario(format!(
                        "metric uses c = {} but the constants use c = {}",
                        m.c, self.constants.c
                    )));
                }
            }
            if m1.mass != m2.mass {
                return Err(Error::Scenario(format!(
                    "both arms orbit one central mass, got {} and {}",
                    m1.mass, m2.mass
                )));
            }
        }
        let whole = Interval::whole(&self.grid);
        if self.tube.lo < whole.lo || self.tube.hi > whole.hi || self.tube.lo >= self.tube.hi {
            return Err(Error::Scenario(format!(
                "tube [{}, {}] must be a non-empty part of the grid [{}, {}]",
                self.tube.lo, self.tube.hi, whole.lo, whole.hi
            )));
        }
        if let Some(kick) = self.fringe_kick {
            if !(kick.is_finite() && kick > 0.0) {
                return Err(Error::Configuration(format!(
                    "fringe kick must be positive, got {kick}"
                )));
            }
        }
        Ok(())
    }

    fn metrics(&self) -> Result<(MetricParams, MetricParams)> {
        match (self.metric1, self.metric2) {
            (Some(a), Some(b)) => Ok((a, b)),
            _ => Err(Error::Scenario(format!(
                "route {} needs metric parameters for both arms",
                self.route
            ))),
        }
    }

    pub fn initial_state(&self) -> Result<Wavefunction> {
        let p = &self.packet;
        make_gaussian_packet(&self.grid, p.center, p.width, p.momentum, &self.constants)
    }

    fn frame_energy(&self) -> f64 {
        if self.rotating_frame {
            self.constants.rest_energy()
        } else {
            0.0
        }
    }

    fn plan(&self, arm: Arm) -> Result<EvolvePlan> {
        let (program, metric) = match arm {
            Arm::One => (&self.arm1_program, self.metric1),
            Arm::Two => (&self.arm2_program, self.metric2),
        };
        let flat = HamiltonianSpec::flat(&self.constants, program.clone());
        let total = self.total_steps()?;
        let stages = if self.route.uses_metric() {
            let metric = metric.expect("validated");
            let lead = whole_steps("dwell_start", self.dwell_start, self.step_size)?;
            let dwell = whole_steps("dwell_time", self.dwell_time, self.step_size)?;
            let tail = total
                .checked_sub(lead + dwell)
                .ok_or_else(|| Error::Scenario("dwell extends past the end of the run".into()))?;
            vec![
                Stage::new(flat.clone(), lead),
                self.dwell_stage(&metric, program, dwell)?.interacting(true),
                Stage::new(flat, tail),
            ]
        } else {
            vec![Stage::new(flat, total)]
        };
        Ok(EvolvePlan {
            step: self.step_size,
            t_start: 0.0,
            record_stride: self.record_stride,
            frame_energy: self.frame_energy(),
            stages,
            containment: Some((self.tube, CONTAINMENT_THRESHOLD)),
        })
    }

    fn dwell_stage(
        &self,
        metric: &MetricParams,
        program: &PotentialProgram,
        n: usize,
    ) -> Result<Stage> {
        let c = &self.constants;
        let potential = Some(program.clone());
        Ok(match self.route {
            Route::FlatElectric => unreachable!("flat route has no dwell stage"),
            Route::Newtonian => {
                let level = if metric.mass == 0.0 {
                    0.0
                } else {
                    -c.m * metric.mass / metric.radius
                };
                Stage::new(HamiltonianSpec::free(c).with_potential(potential), n).with_level(level)
            }
            Route::SemiCovariant => {
                let spec = semi_covariant_spec(metric, c, self.include_correction)?;
                Stage::new(spec.with_potential(potential), n)
            }
            Route::ProperTime => {
                metric.require_weak_field()?;
                let rate = redshift_factor(metric, self.redshift_mode)?;
                Stage::new(HamiltonianSpec::free(c).with_potential(potential), n)
                    .with_clock_rate(rate)
            }
        })
    }

    /// Closed-form relative phase for this scenario's route, given the
    /// packet's `<p^2>`.
    pub fn analytic_phase(&self, mean_sq_momentum: f64) -> Result<f64> {
        let c = &self.constants;
        let electric = electric_ab_phase(&self.arm1_program, &self.arm2_program, c)?;
        if !self.route.uses_metric() {
            return Ok(electric);
        }
        let (m1, m2) = self.metrics()?;
        let (r1, r2, mass, dwell) = (m1.radius, m2.radius, m1.mass, self.dwell_time);
        let gravity = match self.route {
            Route::FlatElectric => 0.0,
            Route::Newtonian => newtonian_phase(r1, r2, dwell, mass, c)?,
            Route::SemiCovariant => {
                let correction = if self.include_correction {
                    kinetic_redshift_correction(r1, r2, dwell, mass, mean_sq_momentum, c)?
                } else {
                    0.0
                };
                newtonian_phase(r1, r2, dwell, mass, c)? + correction
            }
            Route::ProperTime => proper_time_route_phase(
                r1,
                r2,
                dwell,
                mass,
                mean_sq_momentum.sqrt(),
                self.redshift_mode,
                c,
            )?,
        };
        Ok(electric + gravity)
    }
}

fn default_tube(grid: &Grid1D) -> Interval {
    let half = DEFAULT_TUBE_FRACTION * grid.length();
    Interval {
        lo: -half,
        hi: half,
    }
}

fn whole_steps(name: &str, duration: f64, step: f64) -> Result<usize> {
    let n = (duration / step).round();
    if (n * step - duration).abs() > STEP_TOLERANCE * duration.max(step) {
        return Err(Error::Scenario(format!(
            "{name} {duration} is not a whole number of steps of {step}"
        )));
    }
    Ok(n as usize)
}

/// Numeric phase against its closed form, with transport diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseComparison {
    pub numeric_phase: f64,
    pub analytic_phase: f64,
    pub residual: f64,
    pub residual_wrapped: f64,
    pub momentum_drift: f64,
    pub norm_drift: f64,
}

impl PhaseComparison {
    pub fn new(
        numeric_phase: f64,
        analytic_phase: f64,
        momentum_drift: f64,
        norm_drift: f64,
    ) -> Self {
        let residual = numeric_phase - analytic_phase;
        Self {
            numeric_phase,
            analytic_phase,
            residual,
            residual_wrapped: wrap_phase(residual),
            momentum_drift,
            norm_drift,
        }
    }
}

/// Per-sample diagnostics of both arms.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TwoArmHistory {
    pub times: Vec<f64>,
    pub norm1: Vec<f64>,
    pub norm2: Vec<f64>,
    pub mean_p1: Vec<f64>,
    pub mean_p2: Vec<f64>,
    pub phase1: Vec<f64>,
    pub phase2: Vec<f64>,
    /// Unwrapped `arg <psi_1|psi_2>`.
    pub dphi: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoArmRun {
    pub comparison: PhaseComparison,
    pub history: TwoArmHistory,
    pub arm1: Wavefunction,
    pub arm2: Wavefunction,
}

/// Runs the experiment and returns only the phase comparison.
pub fn run_two_arm(scenario: &Scenario) -> Result<PhaseComparison> {
    simulate(scenario).map(|run| run.comparison)
}

/// Runs the experiment, keeping histories and final arm states.
pub fn simulate(scenario: &Scenario) -> Result<TwoArmRun> {
    scenario.validate()?;
    let psi0 = scenario.initial_state()?;
    let propagator = Propagator::new(scenario.grid, scenario.constants);
    let mean_sq_momentum = propagator.observables(psi0.amplitudes()).mean_p_sq;
    let analytic = scenario.analytic_phase(mean_sq_momentum)?;

    let plan1 = scenario.plan(Arm::One)?;
    let plan2 = scenario.plan(Arm::Two)?;
    let mut arm1 = Evolution::start(&propagator, &psi0, &plan1)?;
    let mut arm2 = Evolution::start(&propagator, &psi0, &plan2)?;

    let stride = scenario.record_stride;
    let chunks = scenario.total_steps()? / stride;
    let mut dphi = Vec::with_capacity(chunks + 1);
    let mut last_wrapped = relative_phase(&arm1, &arm2)?;
    let mut last_predicted = 0.0;
    dphi.push(last_wrapped);
    for _ in 0..chunks {
        let (a, b) = rayon::join(|| arm1.advance(stride), || arm2.advance(stride));
        a?;
        b?;
        let predicted = arm2.predicted_phase() - arm1.predicted_phase();
        if (predicted - last_predicted).abs() >= PI {
            return Err(Error::Sampling(format!(
                "predicted inter-arm phase advance {:.3} rad between samples at t = {} is not below pi; reduce record_stride",
                (predicted - last_predicted).abs(),
                arm1.time()
            )));
        }
        last_predicted = predicted;
        let wrapped = relative_phase(&arm1, &arm2)?;
        let previous = *dphi.last().expect("seeded");
        dphi.push(previous + wrap_phase(wrapped - last_wrapped));
        last_wrapped = wrapped;
    }

    let (arm1, r1) = arm1.finish();
    let (arm2, r2) = arm2.finish();
    let numeric = *dphi.last().expect("seeded");
    let comparison = PhaseComparison::new(
        numeric,
        analytic,
        r1.max_momentum_drift().max(r2.max_momentum_drift()),
        r1.max_norm_drift().max(r2.max_norm_drift()),
    );
    let history = TwoArmHistory {
        times: r1.times,
        norm1: r1.norms,
        norm2: r2.norms,
        mean_p1: r1.mean_momenta,
        mean_p2: r2.mean_momenta,
        phase1: r1.global_phases,
        phase2: r2.global_phases,
        dphi,
    };
    Ok(TwoArmRun {
        comparison,
        history,
        arm1,
        arm2,
    })
}

/// `arg <psi_1|psi_2>`, evaluated on the Fourier amplitudes (Parseval).
fn relative_phase(arm1: &Evolution, arm2: &Evolution) -> Result<f64> {
    let (a, b) = (arm1.raw_spectrum(), arm2.raw_spectrum());
    let (mut overlap, mut na, mut nb) = (Complex64::new(0.0, 0.0), 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        overlap += x.conj() * y;
        na += x.norm_sqr();
        nb += y.norm_sqr();
    }
    let magnitude = overlap.norm() / (na * nb).sqrt();
    if !(magnitude.is_finite() && magnitude > DECOHERENCE_THRESHOLD) {
        return Err(Error::Decoherence {
            overlap: magnitude,
            threshold: DECOHERENCE_THRESHOLD,
        });
    }
    Ok(wrap_phase(
        overlap.arg() + (arm1.uniform_phase() - arm2.uniform_phase()),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RouteEquivalence {
    pub phase_semi_covariant: f64,
    pub phase_proper_time: f64,
    pub difference: f64,
}

/// Runs `scenario` on the semi-covariant and proper-time routes.
pub fn route_equivalence(scenario: &Scenario) -> Result<RouteEquivalence> {
    let mut semi = scenario.clone();
    semi.route = Route::SemiCovariant;
    let mut tau = scenario.clone();
    tau.route = Route::ProperTime;
    let (a, b) = rayon::join(|| run_two_arm(&semi), || run_two_arm(&tau));
    let (a, b) = (a?.numeric_phase, b?.numeric_phase);
    Ok(RouteEquivalence {
        phase_semi_covariant: a,
        phase_proper_time: b,
        difference: a - b,
    })
}

/// Interference pattern of two recombined arms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FringePattern {
    pub screen_positions: Vec<f64>,
    pub intensities: Vec<f64>,
    /// Fringe displacement expressed as a phase in `(-pi, pi]`.
    pub extracted_shift: f64,
}

/// Root-mean-square width of `|psi|^2`.
pub fn rms_width(psi: &Wavefunction) -> f64 {
    let grid = psi.grid();
    let (mut w, mut m1, mut m2) = (0.0, 0.0, 0.0);
    for (i, z) in psi.amplitudes().iter().enumerate() {
        let (p, x) = (z.norm_sqr(), grid.position(i));
        w += p;
        m1 += p * x;
        m2 += p * x * x;
    }
    let mean = m1 / w;
    (m2 / w - mean * mean).max(0.0).sqrt()
}

/// Recombiner kick giving [`DEFAULT_FRINGE_PHASE`] radians across one width
/// of `psi`, capped at a quarter of the grid's Nyquist momentum.
pub fn default_fringe_kick(psi: &Wavefunction, constants: &Constants) -> f64 {
    let wanted = DEFAULT_FRINGE_PHASE / rms_width(psi);
    constants.hbar * wanted.min(0.25 * psi.grid().nyquist_wavenumber())
}

/// Kicks the arms by `+kick` and `-kick`, superposes them with equal weight,
/// and reads the relative phase off the fringes.
///
/// The intensity is `B(x) + A(x) cos(2 kick x / hbar - shift)` with
/// `B = (|psi_1|^2 + |psi_2|^2)/2` and `A = |psi_1||psi_2|`; the shift comes from
/// a least-squares fit of the pattern onto `B`, `A cos` and `A sin`.
pub fn fringe_synthesize(
    arm1: &Wavefunction,
    arm2: &Wavefunction,
    kick: f64,
    constants: &Constants,
) -> Result<FringePattern> {
    if arm1.grid() != arm2.grid() {
        return Err(Error::Configuration(format!(
            "arms live on different grids ({} and {})",
            arm1.grid(),
            arm2.grid()
        )));
    }
    let grid = arm1.grid();
    let hbar = constants.hbar;
    let extent = rms_width(arm1);
    if !(kick.is_finite() && kick * extent / hbar >= MIN_FRINGE_PHASE) {
        return Err(Error::Configuration(format!(
            "kick {kick} over packet width {extent} gives fewer than two fringes (need kick * width / hbar >= 4 pi)"
        )));
    }
    if kick / hbar > 0.5 * grid.nyquist_wavenumber() {
        return Err(Error::Configuration(format!(
            "kick {kick} puts the fringe wavenumber above the grid's Nyquist limit"
        )));
    }
    let weight = std::f64::consts::FRAC_1_SQRT_2;
    let n = grid.n_points();
    let screen_positions = grid.positions();
    let mut intensities = Vec::with_capacity(n);
    let mut basis = Vec::with_capacity(n);
    for (i, x) in screen_positions.iter().enumerate() {
        let (a, b) = (arm1.amplitudes()[i], arm2.amplitudes()[i]);
        let theta = kick * x / hbar;
        let psi = weight
            * (a * Complex64::from_polar(1.0, theta) + b * Complex64::from_polar(1.0, -theta));
        intensities.push(psi.norm_sqr());
        let envelope = a.norm() * b.norm();
        basis.push([
            0.5 * (a.norm_sqr() + b.norm_sqr()),
            envelope * (2.0 * theta).cos(),
            envelope * (2.0 * theta).sin(),
        ]);
    }
    let coefficients = least_squares3(&basis, &intensities)
        .ok_or_else(|| Error::Configuration("fringe fit is degenerate".into()))?;
    Ok(FringePattern {
        screen_positions,
        intensities,
        extracted_shift: coefficients[2].atan2(coefficients[1]),
    })
}

/// Solves the 3x3 normal equations of `min |sum_j c_j basis_j - target|`.
fn least_squares3(basis: &[[f64; 3]], target: &[f64]) -> Option<[f64; 3]> {
    let mut gram = [[0.0; 3]; 3];
    let mut rhs = [0.0; 3];
    for (row, y) in basis.iter().zip(target) {
        for i in 0..3 {
            rhs[i] += row[i] * y;
            for j in 0..3 {
                gram[i][j] += row[i] * row[j];
            }
        }
    }
    let det = |m: &[[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det(&gram);
    if !(d.is_finite() && d.abs() > 0.0) {
        return None;
    }
    let mut out = [0.0; 3];
    for (k, value) in out.iter_mut().enumerate() {
        let mut m = gram;
        for i in 0..3 {
            m[i][k] = rhs[i];
        }
        *value = det(&m) / d;
    }
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::tube_pulse_program;
    use crate::solver::global_phase;

    fn small_grid() -> Grid1D {
        Grid1D::new(512, 200.0).unwrap()
    }

    fn fine_grid() -> Grid1D {
        Grid1D::new(1024, 200.0).unwrap()
    }

    fn packet(width: f64, momentum: f64) -> PacketSpec {
        PacketSpec {
            center: 0.0,
            width,
            momentum,
        }
    }

    fn unit_action_pulse() -> PotentialProgram {
        // lead 1, ramps 1, plateau 2, tail 1: integral = amplitude * 3
        tube_pulse_program(1.0 / 3.0, 1.0, 2.0, 1.0, 1.0).unwrap()
    }

    fn newtonian(r1: f64, r2: f64, mass: f64, dwell: f64) -> Scenario {
        let c = Constants::default();
        Scenario::gravitational(
            Route::Newtonian,
            c,
            small_grid(),
            packet(4.0, 0.0),
            MetricParams::new(mass, r1, c.c).unwrap(),
            MetricParams::new(mass, r2, c.c).unwrap(),
            (1.0, dwell, 1.0),
            0.01,
            10,
        )
        .unwrap()
    }

    #[test]
    fn identical_arms_have_no_relative_phase() {
        let program = unit_action_pulse();
        let s = Scenario::flat_electric(
            Constants::default(),
            small_grid(),
            packet(4.0, 0.5),
            program.clone(),
            program,
            0.01,
            10,
        )
        .unwrap();
        let run = simulate(&s).unwrap();
        assert!(run.comparison.numeric_phase.abs() < 1e-12);
        assert_eq!(run.comparison.residual, run.comparison.numeric_phase);
        assert!(run.history.dphi.iter().all(|d| d.abs() < 1e-12));
    }

    #[test]
    fn flat_electric_unit_action() {
        let s = Scenario::flat_electric(
            Constants::default(),
            small_grid(),
            packet(4.0, 0.5),
            unit_action_pulse(),
            PotentialProgram::zero(6.0).unwrap(),
            0.01,
            10,
        )
        .unwrap();
        let run = simulate(&s).unwrap();
        let c = run.comparison;
        assert!((c.analytic_phase - 1.0).abs() < 1e-12);
        assert!((c.numeric_phase - 1.0).abs() < 1e-9, "{}", c.numeric_phase);
        assert!(c.momentum_drift < 1e-10);
        assert!(c.norm_drift < 1e-12);
        let direct = global_phase(&run.arm1, &run.arm2).unwrap();
        assert!((direct - c.numeric_phase).abs() < 1e-12);
    }

    #[test]
    fn newtonian_route_matches_closed_form() {
        let c = run_two_arm(&newtonian(1.0, 2.0, 1e-3, 10.0)).unwrap();
        assert!((c.analytic_phase + 5e-3).abs() < 1e-15);
        assert!((c.numeric_phase + 5e-3).abs() < 1e-9, "{}", c.numeric_phase);
    }

    #[test]
    fn large_phases_are_unwrapped() {
        let program = tube_pulse_program(4.0, 1.0, 2.0, 1.0, 1.0).unwrap();
        let s = Scenario::flat_electric(
            Constants::default(),
            small_grid(),
            packet(4.0, 0.0),
            program,
            PotentialProgram::zero(6.0).unwrap(),
            0.01,
            10,
        )
        .unwrap();
        let c = run_two_arm(&s).unwrap();
        assert!((c.numeric_phase - 12.0).abs() < 1e-9);
        assert!(c.residual.abs() < 1e-9);
        assert!(c.residual_wrapped.abs() < 1e-9);
    }

    #[test]
    fn coarse_recording_is_rejected() {
        let program = tube_pulse_program(4.0, 1.0, 2.0, 1.0, 1.0).unwrap();
        let s = Scenario::flat_electric(
            Constants::default(),
            small_grid(),
            packet(4.0, 0.0),
            program,
            PotentialProgram::zero(6.0).unwrap(),
            0.01,
            200,
        )
        .unwrap();
        assert!(matches!(run_two_arm(&s), Err(Error::Sampling(_))));
    }

    #[test]
    fn packet_leaving_the_tube_is_a_containment_error() {
        let mut s = Scenario::flat_electric(
            Constants::default(),
            small_grid(),
            PacketSpec {
                center: 0.0,
                width: 3.0,
                momentum: 8.0,
            },
            unit_action_pulse(),
            PotentialProgram::zero(6.0).unwrap(),
            0.01,
            10,
        )
        .unwrap();
        s.tube = Interval::new(-20.0, 20.0).unwrap();
        assert!(matches!(run_two_arm(&s), Err(Error::Containment(_))));
    }

    #[test]
    fn scenario_invariants() {
        let c = Constants::default();
        let unequal = Scenario::flat_electric(
            c,
            small_grid(),
            packet(4.0, 0.0),
            PotentialProgram::zero(6.0).unwrap(),
            PotentialProgram::zero(5.0).unwrap(),
            0.01,
            10,
        );
        assert!(matches!(unequal, Err(Error::Scenario(_))));
        let fractional = Scenario::flat_electric(
            c,
            small_grid(),
            packet(4.0, 0.0),
            PotentialProgram::zero(6.0).unwrap(),
            PotentialProgram::zero(6.0).unwrap(),
            0.007,
            1,
        );
        assert!(matches!(fractional, Err(Error::Scenario(_))));
        let mut missing = newtonian(1.0, 2.0, 1e-3, 1.0);
        missing.metric2 = None;
        assert!(matches!(missing.validate(), Err(Error::Scenario(_))));
        assert_eq!("proper-time".parse::<Route>().unwrap(), Route::ProperTime);
        assert!("sideways".parse::<Route>().is_err());
    }

    struct Relativistic {
        mass: f64,
        width: f64,
        momentum: f64,
        c: f64,
        grid: Grid1D,
        times: (f64, f64, f64),
        step: f64,
        stride: usize,
    }

    impl Relativistic {
        fn lab(mass: f64) -> Self {
            Self {
                mass,
                width: 4.0,
                momentum: 1.0,
                c: 10.0,
                grid: Grid1D::new(512, 200.0).unwrap(),
                times: (0.5, 4.0, 0.5),
                step: 2.5e-3,
                stride: 5,
            }
        }
    }

    fn relativistic(r: Relativistic) -> Scenario {
        let Relativistic {
            mass,
            width,
            momentum,
            c,
            grid,
            times,
            step,
            stride,
        } = r;
        let constants = Constants::default().with_speed_of_light(c).unwrap();
        Scenario::gravitational(
            Route::SemiCovariant,
            constants,
            grid,
            packet(width, momentum),
            MetricParams::new(mass, 1.0, c).unwrap(),
            MetricParams::new(mass, 2.0, c).unwrap(),
            times,
            step,
            stride,
        )
        .unwrap()
    }

    #[test]
    fn routes_agree_for_zero_mass() {
        let s = relativistic(Relativistic::lab(0.0));
        let r = route_equivalence(&s).unwrap();
        assert!(r.phase_semi_covariant.abs() < 1e-12);
        assert!(r.phase_proper_time.abs() < 1e-12);
        assert!(r.difference.abs() < 1e-12);
    }

    #[test]
    fn routes_agree_with_matched_correction() {
        let mut s = relativistic(Relativistic::lab(0.5));
        s.include_correction = true;
        let r = route_equivalence(&s).unwrap();
        assert!(r.difference.abs() < 1e-8, "{}", r.difference);
        let semi = run_two_arm(&s).unwrap();
        assert!(semi.residual.abs() < 1e-8, "{}", semi.residual);
    }

    #[test]
    fn packets_at_rest_reproduce_newtonian_phase() {
        // <p^2>/(2 m c^2) ~ 3e-8 for this width, so the kinetic correction
        // stays below 1e-9 at a Newtonian phase of 5e-3.
        let mut s = relativistic(Relativistic {
            mass: 0.01,
            width: 20.0,
            momentum: 0.0,
            c: 100.0,
            grid: Grid1D::new(512, 480.0).unwrap(),
            times: (0.25, 1.0, 0.25),
            step: 2.5e-5,
            stride: 10,
        });
        s.include_correction = true;
        let expected = newtonian_phase(1.0, 2.0, 1.0, 0.01, &s.constants).unwrap();
        let r = route_equivalence(&s).unwrap();
        assert!(
            (r.phase_semi_covariant - expected).abs() < 1e-9,
            "{} vs {expected}",
            r.phase_semi_covariant
        );
        assert!(
            (r.phase_proper_time - expected).abs() < 1e-9,
            "{} vs {expected}",
            r.phase_proper_time
        );
    }

    #[test]
    fn identical_arms_fringe_at_center() {
        let c = Constants::default();
        let grid = fine_grid();
        let psi = make_gaussian_packet(&grid, 0.0, 4.0, 0.0, &c).unwrap();
        let kick = default_fringe_kick(&psi, &c);
        let pattern = fringe_synthesize(&psi, &psi, kick, &c).unwrap();
        assert!(pattern.extracted_shift.abs() < 1e-10);
        let brightest = pattern
            .intensities
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        assert_eq!(pattern.screen_positions[brightest], 0.0);
        let dx = grid.spacing();
        let total: f64 = pattern.intensities.iter().sum::<f64>() * dx;
        assert!((total - 1.0).abs() < 1e-10);
        assert!(pattern.intensities.iter().all(|&i| i >= 0.0));
    }

    #[test]
    fn half_period_shift_darkens_center() {
        let c = Constants::default();
        let grid = fine_grid();
        let psi = make_gaussian_packet(&grid, 0.0, 4.0, 0.0, &c).unwrap();
        let flipped = psi.with_phase(PI);
        let pattern = fringe_synthesize(&psi, &flipped, default_fringe_kick(&psi, &c), &c).unwrap();
        assert!((wrap_phase(pattern.extracted_shift) - PI).abs() < 0.01);
        let center = grid.n_points() / 2;
        assert_eq!(grid.position(center), 0.0);
        assert!(pattern.intensities[center] < 1e-20);
    }

    #[test]
    fn unresolvable_kick_is_rejected() {
        let c = Constants::default();
        let grid = small_grid();
        let psi = make_gaussian_packet(&grid, 0.0, 4.0, 0.0, &c).unwrap();
        assert!(matches!(
            fringe_synthesize(&psi, &psi, 0.5, &c),
            Err(Error::Configuration(_))
        ));
        assert!(matches!(
            fringe_synthesize(&psi, &psi, 10.0, &c),
            Err(Error::Configuration(_))
        ));
        let other =
            make_gaussian_packet(&Grid1D::new(256, 200.0).unwrap(), 0.0, 4.0, 0.0, &c).unwrap();
        assert!(fringe_synthesize(&psi, &other, 7.0, &c).is_err());
    }

    #[test]
    fn fringe_shift_follows_global_phase() {
        let c = Constants::default();
        let grid = fine_grid();
        let psi = make_gaussian_packet(&grid, 0.0, 4.0, 1.0, &c).unwrap();
        let kick = default_fringe_kick(&psi, &c);
        for j in 1..=16 {
            let theta = -PI + 2.0 * PI * j as f64 / 16.0;
            let other = psi.with_phase(theta);
            let shift = fringe_synthesize(&psi, &other, kick, &c)
                .unwrap()
                .extracted_shift;
            let phase = global_phase(&psi, &other).unwrap();
            assert!(
                wrap_phase(shift - phase).abs() < 0.01,
                "{theta}: {shift} vs {phase}"
            );
        }
    }
}
