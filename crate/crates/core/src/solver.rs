//! Split-step spectral propagation for uniform-potential Hamiltonians.
//!
//! Each step of length `dt` is a Strang sandwich: half kick, exact kinetic
//! step in Fourier space, half kick. The kicks use the closed-form integral of
//! `U` over each half interval, so for these Hamiltonians (which commute at
//! all times) the only error left is floating-point rounding.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::constants::Constants;
use crate::error::{Error, Result};
use crate::grid::{Grid1D, Spectral};
use crate::potentials::HamiltonianSpec;
use crate::wavefunction::Wavefunction;

/// Below this overlap magnitude a relative phase is not reported.
pub const DECOHERENCE_THRESHOLD: f64 = 0.1;
/// `max |U| dt / hbar` must stay below this.
pub const MAX_KICK_PHASE: f64 = PI / 4.0;
/// Kinetic phase per step at the Nyquist wavenumber must stay below this.
pub const MAX_NYQUIST_PHASE: f64 = PI;

/// Wraps an angle to `(-pi, pi]`.
pub fn wrap_phase(theta: f64) -> f64 {
    let wrapped = theta - 2.0 * PI * (theta / (2.0 * PI)).round();
    if wrapped <= -PI {
        wrapped + 2.0 * PI
    } else if wrapped > PI {
        wrapped - 2.0 * PI
    } else {
        wrapped
    }
}

/// Closed spatial interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidParameter {
                name: "interval",
                reason: format!("need finite lo < hi, got [{lo}, {hi}]"),
            });
        }
        Ok(Self { lo, hi })
    }

    pub fn whole(grid: &Grid1D) -> Self {
        Self {
            lo: grid.x_min(),
            hi: -grid.x_min(),
        }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observables {
    /// Position-space norm.
    pub norm: f64,
    /// Momentum-space norm, equal to `norm` by Parseval.
    pub norm_momentum: f64,
    pub mean_x: f64,
    pub mean_p: f64,
    pub mean_p_sq: f64,
    /// Free kinetic energy `<p^2>/2m`.
    pub energy: f64,
}

impl Observables {
    pub fn momentum_variance(&self) -> f64 {
        self.mean_p_sq - self.mean_p * self.mean_p
    }
}

/// Moments of `psi`: position ones by direct summation, momentum ones by FFT.
pub fn observables(psi: &Wavefunction, constants: &Constants) -> Observables {
    let spectral = Spectral::new(psi.grid());
    observables_with(&spectral, psi.grid(), psi.amplitudes(), constants)
}

fn observables_with(
    spectral: &Spectral,
    grid: &Grid1D,
    amplitudes: &[Complex64],
    constants: &Constants,
) -> Observables {
    moments(
        grid,
        amplitudes,
        &spectral.transformed(amplitudes),
        constants,
    )
}

/// Moments from matching position and (unnormalized) Fourier amplitudes.
fn moments(
    grid: &Grid1D,
    amplitudes: &[Complex64],
    spectrum: &[Complex64],
    constants: &Constants,
) -> Observables {
    let dx = grid.spacing();
    let (mut norm, mut first) = (0.0, 0.0);
    for (i, z) in amplitudes.iter().enumerate() {
        let w = z.norm_sqr();
        norm += w;
        first += w * grid.position(i);
    }
    let (mut total_k, mut k1, mut k2) = (0.0, 0.0, 0.0);
    for (z, k) in spectrum.iter().zip(grid.wavenumbers()) {
        let w = z.norm_sqr();
        total_k += w;
        k1 += w * k;
        k2 += w * k * k;
    }
    let hbar = constants.hbar;
    let mean_p_sq = hbar * hbar * k2 / total_k;
    Observables {
        norm: norm * dx,
        norm_momentum: total_k * dx / grid.n_points() as f64,
        mean_x: first / norm,
        mean_p: hbar * k1 / total_k,
        mean_p_sq,
        energy: mean_p_sq / (2.0 * constants.m),
    }
}

/// `arg <psi_ref|psi>` in `(-pi, pi]`.
pub fn global_phase(psi_ref: &Wavefunction, psi: &Wavefunction) -> Result<f64> {
    let overlap = psi_ref.inner(psi)?;
    let scale = (psi_ref.norm_sq() * psi.norm_sq()).sqrt();
    check_overlap(overlap, scale)?;
    Ok(wrap_phase(overlap.arg()))
}

fn check_overlap(overlap: Complex64, scale: f64) -> Result<()> {
    let magnitude = overlap.norm() / scale;
    if magnitude.is_finite() && magnitude > DECOHERENCE_THRESHOLD {
        Ok(())
    } else {
        Err(Error::Decoherence {
            overlap: magnitude,
            threshold: DECOHERENCE_THRESHOLD,
        })
    }
}

/// Fraction of the norm inside `region`, each sample weighted by how much of
/// its cell `[x - dx/2, x + dx/2]` the region covers.
pub fn containment_fraction(psi: &Wavefunction, region: Interval) -> Result<f64> {
    let weights = CellWeights::new(psi.grid(), region)?;
    Ok(weights.fraction(psi.amplitudes()))
}

#[derive(Debug, Clone)]
struct CellWeights {
    weights: Vec<(usize, f64)>,
}

impl CellWeights {
    fn new(grid: &Grid1D, region: Interval) -> Result<Self> {
        let whole = Interval::whole(grid);
        let dx = grid.spacing();
        if region.lo < whole.lo - 0.5 * dx
            || region.hi > whole.hi + 0.5 * dx
            || region.lo >= region.hi
        {
            return Err(Error::Domain(format!(
                "region [{}, {}] is not within the grid [{}, {}]",
                region.lo, region.hi, whole.lo, whole.hi
            )));
        }
        let weights = (0..grid.n_points())
            .filter_map(|i| {
                let x = grid.position(i);
                let covered = (x + 0.5 * dx).min(region.hi) - (x - 0.5 * dx).max(region.lo);
                (covered > 0.0).then(|| (i, (covered / dx).min(1.0)))
            })
            .collect();
        Ok(Self { weights })
    }

    fn fraction(&self, amplitudes: &[Complex64]) -> f64 {
        let total: f64 = amplitudes.iter().map(|z| z.norm_sqr()).sum();
        let inside: f64 = self
            .weights
            .iter()
            .map(|&(i, w)| w * amplitudes[i].norm_sqr())
            .sum();
        inside / total
    }
}

/// One piece of an evolution with a fixed Hamiltonian and clock rate.
#[derive(Debug, Clone, PartialEq)]
pub struct Stage {
    pub spec: HamiltonianSpec,
    /// Evolution-parameter advance per unit coordinate time (`d tau / dt`).
    pub clock_rate: f64,
    /// Constant energy added on top of `spec`, kept apart from the rest
    /// energy so that small levels are not lost to rounding against `m c^2`.
    pub level: f64,
    pub n_steps: usize,
    /// Containment is enforced throughout an interacting stage, and in any
    /// stage wherever the potential program is non-zero.
    pub interacting: bool,
}

impl Stage {
    pub fn new(spec: HamiltonianSpec, n_steps: usize) -> Self {
        Self {
            spec,
            clock_rate: 1.0,
            level: 0.0,
            n_steps,
            interacting: false,
        }
    }

    pub fn with_clock_rate(mut self, clock_rate: f64) -> Self {
        self.clock_rate = clock_rate;
        self
    }

    pub fn with_level(mut self, level: f64) -> Self {
        self.level = level;
        self
    }

    /// Uniform energy of the stage apart from the program, in a frame
    /// rotating at `frame_energy`.
    pub fn uniform_energy(&self, frame_energy: f64) -> f64 {
        (self.spec.rest_energy * self.clock_rate - frame_energy) + self.level
    }

    pub fn interacting(mut self, interacting: bool) -> Self {
        self.interacting = interacting;
        self
    }
}

/// A full schedule for one wavefunction.
#[derive(Debug, Clone, PartialEq)]
pub struct EvolvePlan {
    pub step: f64,
    pub t_start: f64,
    pub record_stride: usize,
    /// Energy subtracted from every kick (rotating frame); `0` keeps the lab frame.
    pub frame_energy: f64,
    pub stages: Vec<Stage>,
    /// Region the state must stay inside, with the minimum admissible fraction.
    pub containment: Option<(Interval, f64)>,
}

impl EvolvePlan {
    pub fn single(spec: HamiltonianSpec, step: f64, n_steps: usize, record_stride: usize) -> Self {
        Self {
            step,
            t_start: 0.0,
            record_stride,
            frame_energy: 0.0,
            stages: vec![Stage::new(spec, n_steps)],
            containment: None,
        }
    }

    pub fn total_steps(&self) -> usize {
        self.stages.iter().map(|s| s.n_steps).sum()
    }

    pub fn duration(&self) -> f64 {
        self.total_steps() as f64 * self.step
    }

    /// Coordinate time after `n` steps.
    pub fn time_at(&self, n: usize) -> f64 {
        self.t_start + n as f64 * self.step
    }
}

/// Sampled observables of one evolution.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvolutionRecord {
    pub times: Vec<f64>,
    pub norms: Vec<f64>,
    pub mean_positions: Vec<f64>,
    pub mean_momenta: Vec<f64>,
    pub mean_sq_momenta: Vec<f64>,
    /// Unwrapped `arg <psi(0)|psi(t)>`.
    pub global_phases: Vec<f64>,
}

impl EvolutionRecord {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn max_norm_drift(&self) -> f64 {
        self.norms
            .iter()
            .map(|n| (n - 1.0).abs())
            .fold(0.0, f64::max)
    }

    pub fn max_momentum_drift(&self) -> f64 {
        match self.mean_momenta.first() {
            Some(&p0) => self
                .mean_momenta
                .iter()
                .map(|p| (p - p0).abs())
                .fold(0.0, f64::max),
            None => 0.0,
        }
    }
}

/// Kinetic propagation data shared by every evolution on one grid.
#[derive(Debug, Clone)]
pub struct Propagator {
    grid: Grid1D,
    constants: Constants,
    spectral: Spectral,
    /// `hbar k^2 / 2m` per Fourier mode: kinetic phase rate at unit scale.
    kinetic_rates: Vec<f64>,
}

impl Propagator {
    pub fn new(grid: Grid1D, constants: Constants) -> Self {
        let factor = constants.hbar / (2.0 * constants.m);
        let kinetic_rates = grid.wavenumbers().iter().map(|k| factor * k * k).collect();
        Self {
            grid,
            constants,
            spectral: Spectral::new(&grid),
            kinetic_rates,
        }
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn constants(&self) -> &Constants {
        &self.constants
    }

    pub fn observables(&self, amplitudes: &[Complex64]) -> Observables {
        observables_with(&self.spectral, &self.grid, amplitudes, &self.constants)
    }

    /// Runs `plan` to completion.
    pub fn evolve(
        &self,
        psi: &Wavefunction,
        plan: &EvolvePlan,
    ) -> Result<(Wavefunction, EvolutionRecord)> {
        let mut evolution = Evolution::start(self, psi, plan)?;
        evolution.advance(plan.total_steps())?;
        Ok(evolution.finish())
    }

    fn check_plan(&self, psi: &Wavefunction, plan: &EvolvePlan) -> Result<()> {
        if psi.grid() != &self.grid {
            return Err(Error::Scenario(format!(
                "state lives on {} but the propagator on {}",
                psi.grid(),
                self.grid
            )));
        }
        if !(plan.step.is_finite() && plan.step > 0.0) {
            return Err(Error::StepSize(format!(
                "step must be positive, got {}",
                plan.step
            )));
        }
        if plan.record_stride == 0 {
            return Err(Error::InvalidParameter {
                name: "record_stride",
                reason: "must be at least 1".into(),
            });
        }
        let total = plan.total_steps();
        if !total.is_multiple_of(plan.record_stride) {
            return Err(Error::InvalidParameter {
                name: "record_stride",
                reason: format!(
                    "{} does not divide the step count {total}",
                    plan.record_stride
                ),
            });
        }
        let hbar = self.constants.hbar;
        let nyquist = self.grid.nyquist_wavenumber();
        let mut first = 0;
        for (i, stage) in plan.stages.iter().enumerate() {
            stage.spec.validate()?;
            if !(stage.clock_rate.is_finite() && stage.clock_rate > 0.0) {
                return Err(Error::InvalidParameter {
                    name: "clock_rate",
                    reason: format!("stage {i} has clock rate {}", stage.clock_rate),
                });
            }
            let t0 = plan.time_at(first);
            let t1 = plan.time_at(first + stage.n_steps);
            first += stage.n_steps;
            if stage.n_steps == 0 {
                continue;
            }
            let u_max = match &stage.spec.potential {
                Some(program) => {
                    let end = program.total_duration();
                    if t1 > end * (1.0 + 1e-12) + 1e-12 || t0 < 0.0 {
                        return Err(Error::Scenario(format!(
                            "stage {i} spans [{t0}, {t1}] but its potential is defined on [0, {end}]"
                        )));
                    }
                    program.max_abs_between(t0.min(end), t1.min(end))?
                }
                None => 0.0,
            };
            if !stage.level.is_finite() {
                return Err(Error::InvalidParameter {
                    name: "level",
                    reason: format!("stage {i} has level {}", stage.level),
                });
            }
            let uniform = stage.uniform_energy(plan.frame_energy).abs() + u_max;
            let kick = uniform * plan.step / hbar;
            if kick >= MAX_KICK_PHASE {
                return Err(Error::StepSize(format!(
                    "stage {i}: max |U| dt / hbar = {kick:.4} must stay below pi/4; reduce the step below {:.4e}",
                    MAX_KICK_PHASE * hbar / uniform
                )));
            }
            let nyquist_phase =
                stage.spec.kinetic_scale * stage.clock_rate * hbar * nyquist * nyquist
                    / (2.0 * self.constants.m)
                    * plan.step;
            if nyquist_phase >= MAX_NYQUIST_PHASE {
                return Err(Error::StepSize(format!(
                    "stage {i}: kinetic phase per step at the Nyquist wavenumber is {nyquist_phase:.4}, must stay below pi"
                )));
            }
        }
        if let Some((region, threshold)) = plan.containment {
            CellWeights::new(&self.grid, region)?;
            if !(0.0..=1.0).contains(&threshold) {
                return Err(Error::InvalidParameter {
                    name: "containment",
                    reason: format!("threshold {threshold} outside [0, 1]"),
                });
            }
        }
        Ok(())
    }
}

/// Convenience wrapper: one stage, coordinate clock, lab frame, no containment.
pub fn split_step_evolve(
    psi: &Wavefunction,
    spec: &HamiltonianSpec,
    step: f64,
    n_steps: usize,
    record_stride: usize,
    constants: &Constants,
) -> Result<(Wavefunction, EvolutionRecord)> {
    let propagator = Propagator::new(*psi.grid(), *constants);
    propagator.evolve(
        psi,
        &EvolvePlan::single(spec.clone(), step, n_steps, record_stride),
    )
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

/// An evolution in progress; lets several states advance in lockstep.
///
/// With a spatially uniform potential each half kick is a scalar phase, so
/// the inverse and forward transforms that would surround it cancel. The
/// state is therefore kept in Fourier space, where a full step is one
/// multiplication by the kinetic phasors, and the kicks are summed into one
/// global phase `theta`: `psi = e^{-i theta} * IFFT(spectrum)`. Position
/// amplitudes are rebuilt from the spectrum when needed, so transform
/// rounding does not accumulate from step to step.
pub struct Evolution<'a> {
    propagator: &'a Propagator,
    plan: &'a EvolvePlan,
    initial_spectrum: Vec<Complex64>,
    spectrum: Vec<Complex64>,
    position: Vec<Complex64>,
    position_fresh: bool,
    theta: CompensatedSum,
    scratch: Vec<Complex64>,
    kinetic_phasors: Vec<Vec<Complex64>>,
    containment: Option<(CellWeights, f64)>,
    steps_done: usize,
    stage: usize,
    steps_in_stage: usize,
    /// Predicted `|phase advance|` since the last recorded sample.
    pending_advance: f64,
    predicted_phase: f64,
    initial_kinetic_energy: f64,
    last_wrapped: f64,
    record: EvolutionRecord,
}

impl<'a> Evolution<'a> {
    pub fn start(
        propagator: &'a Propagator,
        psi: &Wavefunction,
        plan: &'a EvolvePlan,
    ) -> Result<Self> {
        propagator.check_plan(psi, plan)?;
        let kinetic_phasors = plan
            .stages
            .iter()
            .map(|stage| {
                let scale = stage.spec.kinetic_scale * stage.clock_rate * plan.step;
                propagator
                    .kinetic_rates
                    .iter()
                    .map(|rate| Complex64::from_polar(1.0, -rate * scale))
                    .collect()
            })
            .collect();
        let containment = match plan.containment {
            Some((region, threshold)) => {
                Some((CellWeights::new(&propagator.grid, region)?, threshold))
            }
            None => None,
        };
        let initial_kinetic_energy = propagator.observables(psi.amplitudes()).energy;
        let spectrum = propagator.spectral.transformed(psi.amplitudes());
        let mut evolution = Self {
            propagator,
            plan,
            initial_spectrum: spectrum.clone(),
            spectrum,
            position: psi.amplitudes().to_vec(),
            position_fresh: true,
            theta: CompensatedSum::default(),
            scratch: propagator.spectral.scratch(),
            kinetic_phasors,
            containment,
            steps_done: 0,
            stage: 0,
            steps_in_stage: 0,
            pending_advance: 0.0,
            predicted_phase: 0.0,
            initial_kinetic_energy,
            last_wrapped: 0.0,
            record: EvolutionRecord::default(),
        };
        evolution.skip_empty_stages();
        evolution.record_sample(0.0)?;
        Ok(evolution)
    }

    pub fn steps_done(&self) -> usize {
        self.steps_done
    }

    pub fn time(&self) -> f64 {
        self.plan.time_at(self.steps_done)
    }

    /// Unnormalized Fourier amplitudes without the accumulated uniform phase.
    pub fn raw_spectrum(&self) -> &[Complex64] {
        &self.spectrum
    }

    /// Accumulated uniform phase: the state is `e^{-i theta}` times the
    /// inverse transform of [`Self::raw_spectrum`].
    pub fn uniform_phase(&self) -> f64 {
        self.theta.value()
    }

    pub fn wavefunction(&self) -> Wavefunction {
        let mut psi = if self.position_fresh {
            self.position.clone()
        } else {
            let mut psi = self.spectrum.clone();
            let mut scratch = self.propagator.spectral.scratch();
            self.propagator.spectral.inverse(&mut psi, &mut scratch);
            psi
        };
        let factor = Complex64::from_polar(1.0, -self.theta.value());
        for z in &mut psi {
            *z *= factor;
        }
        Wavefunction::new(self.propagator.grid, psi).expect("state keeps its grid")
    }

    fn refresh_position(&mut self) {
        if !self.position_fresh {
            self.position.copy_from_slice(&self.spectrum);
            self.propagator
                .spectral
                .inverse(&mut self.position, &mut self.scratch);
            self.position_fresh = true;
        }
    }

    pub fn record(&self) -> &EvolutionRecord {
        &self.record
    }

    /// Phase the state is expected to have picked up so far, `-integral <H> dt / hbar`
    /// with `<p^2>` frozen at its initial value.
    pub fn predicted_phase(&self) -> f64 {
        self.predicted_phase
    }

    /// Advances `n` steps, recording every `record_stride` steps.
    pub fn advance(&mut self, n: usize) -> Result<()> {
        let remaining = self.plan.total_steps() - self.steps_done;
        if n > remaining {
            return Err(Error::Scenario(format!(
                "asked for {n} steps but only {remaining} remain in the plan"
            )));
        }
        for _ in 0..n {
            self.step()?;
            if self.steps_done.is_multiple_of(self.plan.record_stride) {
                self.record_sample(self.pending_advance)?;
                self.pending_advance = 0.0;
            }
        }
        Ok(())
    }

    pub fn finish(self) -> (Wavefunction, EvolutionRecord) {
        (self.wavefunction(), self.record)
    }

    fn skip_empty_stages(&mut self) {
        while self.stage < self.plan.stages.len()
            && self.steps_in_stage == self.plan.stages[self.stage].n_steps
        {
            self.stage += 1;
            self.steps_in_stage = 0;
        }
    }

    /// `integral of (rest * clock_rate - frame + U) dt` over `[a, b]`.
    fn uniform_integral(&self, stage: &Stage, a: f64, b: f64) -> Result<f64> {
        let constant = stage.uniform_energy(self.plan.frame_energy);
        let program = match &stage.spec.potential {
            Some(program) => {
                let end = program.total_duration();
                program.integral_between(a.min(end), b.min(end))?
            }
            None => 0.0,
        };
        Ok(constant * (b - a) + program)
    }

    fn step(&mut self) -> Result<()> {
        let plan = self.plan;
        let stage = &plan.stages[self.stage];
        let hbar = self.propagator.constants.hbar;
        let t0 = plan.time_at(self.steps_done);
        let t1 = plan.time_at(self.steps_done + 1);
        let tm = t0 + 0.5 * (t1 - t0);

        let first = self.uniform_integral(stage, t0, tm)? / hbar;
        let second = self.uniform_integral(stage, tm, t1)? / hbar;

        self.theta.add(first);
        for (z, phasor) in self
            .spectrum
            .iter_mut()
            .zip(&self.kinetic_phasors[self.stage])
        {
            *z *= phasor;
        }
        self.theta.add(second);
        self.position_fresh = false;

        let kinetic =
            stage.spec.kinetic_scale * stage.clock_rate * self.initial_kinetic_energy * (t1 - t0)
                / hbar;
        self.pending_advance += (first + second).abs() + kinetic;
        self.predicted_phase -= first + second + kinetic;

        if let Some((weights, threshold)) = &self.containment {
            let active = stage.interacting
                || match &stage.spec.potential {
                    Some(program) => {
                        let end = program.total_duration();
                        program.max_abs_between(t0.min(end), t1.min(end))? != 0.0
                    }
                    None => false,
                };
            if active {
                if !self.position_fresh {
                    self.position.copy_from_slice(&self.spectrum);
                    self.propagator
                        .spectral
                        .inverse(&mut self.position, &mut self.scratch);
                    self.position_fresh = true;
                }
                let fraction = weights.fraction(&self.position);
                if fraction < *threshold {
                    return Err(Error::Containment(format!(
                        "only {fraction:.12} of the norm is inside the interaction region at t = {t1} (need {threshold})"
                    )));
                }
            }
        }

        self.steps_done += 1;
        self.steps_in_stage += 1;
        self.skip_empty_stages();
        Ok(())
    }

    fn record_sample(&mut self, predicted_advance: f64) -> Result<()> {
        if predicted_advance >= PI {
            return Err(Error::Sampling(format!(
                "predicted phase advance {predicted_advance:.3} rad between samples at t = {} is not below pi; reduce record_stride",
                self.time()
            )));
        }
        self.refresh_position();
        let p = self.propagator;
        let obs = moments(&p.grid, &self.position, &self.spectrum, &p.constants);
        let overlap: Complex64 = self
            .initial_spectrum
            .iter()
            .zip(&self.spectrum)
            .map(|(a, b)| a.conj() * b)
            .sum();
        let wrapped = wrap_phase(overlap.arg() - self.theta.value());
        let unwrapped = match self.record.global_phases.last() {
            Some(&previous) => previous + wrap_phase(wrapped - self.last_wrapped),
            None => wrapped,
        };
        self.last_wrapped = wrapped;
        let r = &mut self.record;
        r.times.push(self.plan.time_at(self.steps_done));
        r.norms.push(obs.norm);
        r.mean_positions.push(obs.mean_x);
        r.mean_momenta.push(obs.mean_p);
        r.mean_sq_momenta.push(obs.mean_p_sq);
        r.global_phases.push(unwrapped);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::tube_pulse_program;
    use crate::program::{PotentialProgram, Segment};
    use crate::wavefunction::make_gaussian_packet;
    use proptest::prelude::*;

    fn setup(
        n: usize,
        length: f64,
        center: f64,
        width: f64,
        momentum: f64,
    ) -> (Wavefunction, Constants) {
        let constants = Constants::default();
        let grid = Grid1D::new(n, length).unwrap();
        let psi = make_gaussian_packet(&grid, center, width, momentum, &constants).unwrap();
        (psi, constants)
    }

    /// `p^2/2m + U(t)` without the rest energy.
    fn plain(potential: Option<PotentialProgram>) -> HamiltonianSpec {
        HamiltonianSpec::new(1.0, 0.0, potential).unwrap()
    }

    fn position_variance(psi: &Wavefunction) -> f64 {
        let grid = psi.grid();
        let dx = grid.spacing();
        let w: Vec<f64> = psi.amplitudes().iter().map(|z| z.norm_sqr() * dx).collect();
        let norm: f64 = w.iter().sum();
        let mean: f64 = w
            .iter()
            .enumerate()
            .map(|(i, w)| w * grid.position(i))
            .sum::<f64>()
            / norm;
        w.iter()
            .enumerate()
            .map(|(i, w)| w * (grid.position(i) - mean).powi(2))
            .sum::<f64>()
            / norm
    }

    fn max_difference(a: &[Complex64], b: &[Complex64]) -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max)
    }

    #[test]
    fn wrap_phase_lands_in_half_open_interval() {
        assert_eq!(wrap_phase(PI), PI);
        assert_eq!(wrap_phase(-PI), PI);
        assert!((wrap_phase(3.0 * PI + 0.25) - (-PI + 0.25)).abs() < 1e-12);
        assert!((wrap_phase(0.3) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn free_gaussian_spreads_as_predicted() {
        let (psi, constants) = setup(1024, 200.0, 0.0, 2.0, 0.0);
        let (out, _) = split_step_evolve(&psi, &plain(None), 0.01, 1000, 100, &constants).unwrap();
        let t = 10.0;
        let s0 = 2.0_f64;
        let expected =
            s0 * s0 * (1.0 + (constants.hbar * t / (2.0 * constants.m * s0 * s0)).powi(2));
        let measured = position_variance(&out);
        assert!(
            ((measured - expected) / expected).abs() < 1e-6,
            "{measured} vs {expected}"
        );
    }

    #[test]
    fn constant_level_only_multiplies_by_a_phase() {
        let (psi, constants) = setup(512, 100.0, -5.0, 2.0, 1.0);
        let (free, _) = split_step_evolve(&psi, &plain(None), 0.01, 500, 50, &constants).unwrap();
        let level = 0.3;
        let program = PotentialProgram::new(vec![Segment::constant(5.0, level)]).unwrap();
        let spec = plain(Some(program));
        let (shifted, _) = split_step_evolve(&psi, &spec, 0.01, 500, 50, &constants).unwrap();
        let expected = free.with_phase(-level * 5.0 / constants.hbar);
        assert!(max_difference(shifted.amplitudes(), expected.amplitudes()) < 1e-10);
    }

    #[test]
    fn zero_steps_is_the_identity() {
        let (psi, constants) = setup(256, 100.0, 3.0, 2.0, 0.5);
        let (out, record) = split_step_evolve(&psi, &plain(None), 0.01, 0, 1, &constants).unwrap();
        assert_eq!(out, psi);
        assert_eq!(record.len(), 1);
        assert_eq!(record.global_phases[0], 0.0);
    }

    #[test]
    fn kinetic_scale_rescales_time() {
        let (psi, constants) = setup(512, 100.0, 0.0, 2.0, 1.0);
        let mut slow = plain(None);
        slow.kinetic_scale = 0.5;
        let (a, _) = split_step_evolve(&psi, &slow, 0.02, 400, 400, &constants).unwrap();
        let (b, _) = split_step_evolve(&psi, &plain(None), 0.01, 400, 400, &constants).unwrap();
        assert!(max_difference(a.amplitudes(), b.amplitudes()) < 1e-12);
    }

    #[test]
    fn uniform_potential_conserves_momentum_and_norm() {
        let (psi, constants) = setup(1024, 200.0, -20.0, 3.0, 1.5);
        let program = tube_pulse_program(0.4, 2.0, 3.0, 1.0, 2.0).unwrap();
        let spec = plain(Some(program));
        let (_, record) = split_step_evolve(&psi, &spec, 0.004, 2000, 20, &constants).unwrap();
        assert!(record.max_momentum_drift() < 1e-10);
        assert!(
            record.max_norm_drift() < 1e-12,
            "{}",
            record.max_norm_drift()
        );
    }

    #[test]
    fn long_run_stays_unitary() {
        let (psi, constants) = setup(1024, 200.0, 0.0, 3.0, 0.5);
        let (_, record) =
            split_step_evolve(&psi, &plain(None), 0.005, 10_000, 100, &constants).unwrap();
        assert!(
            record.max_norm_drift() < 1e-12,
            "{}",
            record.max_norm_drift()
        );
    }

    #[test]
    fn momentum_moments_match_direct_transform() {
        let (psi, constants) = setup(256, 80.0, 4.0, 2.5, 2.0);
        let grid = psi.grid();
        let n = grid.n_points();
        let (mut total, mut first) = (0.0, 0.0);
        for (j, k) in grid.wavenumbers().iter().enumerate() {
            let coefficient: Complex64 = psi
                .amplitudes()
                .iter()
                .enumerate()
                .map(|(i, z)| z * Complex64::from_polar(1.0, -2.0 * PI * (i * j) as f64 / n as f64))
                .sum();
            total += coefficient.norm_sqr();
            first += coefficient.norm_sqr() * k;
        }
        let direct = constants.hbar * first / total;
        let obs = observables(&psi, &constants);
        assert!((direct - 2.0).abs() < 1e-10);
        assert!((obs.mean_p - direct).abs() < 1e-10);
        assert!((obs.norm - obs.norm_momentum).abs() < 1e-12);
        assert!((obs.mean_x - 4.0).abs() < 1e-10);
        let spread = constants.hbar / (2.0 * 2.5);
        assert!((obs.momentum_variance() - spread * spread).abs() < 1e-10);
    }

    #[test]
    fn containment_of_symmetric_packet() {
        let (psi, _) = setup(512, 100.0, 0.0, 2.0, 0.0);
        let grid = *psi.grid();
        assert!((containment_fraction(&psi, Interval::whole(&grid)).unwrap() - 1.0).abs() < 1e-14);
        let left = Interval::new(grid.x_min(), 0.0).unwrap();
        assert!((containment_fraction(&psi, left).unwrap() - 0.5).abs() < 1e-10);
        let outside =
            1.0 - containment_fraction(&psi, Interval::new(-16.0, 16.0).unwrap()).unwrap();
        assert!(outside < 1e-12);
        assert!(containment_fraction(&psi, Interval { lo: -80.0, hi: 0.0 }).is_err());
    }

    #[test]
    fn global_phase_recovers_applied_phase() {
        let (psi, _) = setup(256, 120.0, 0.0, 2.0, 0.3);
        let rotated = psi.with_phase(-1.2);
        assert!((global_phase(&psi, &rotated).unwrap() + 1.2).abs() < 1e-12);
        let (far, _) = setup(256, 120.0, 30.0, 2.0, 0.3);
        assert!(matches!(
            global_phase(&psi, &far),
            Err(Error::Decoherence { .. })
        ));
    }

    #[test]
    fn recorded_phase_tracks_uniform_energy() {
        let (psi, constants) = setup(512, 100.0, 0.0, 3.0, 0.0);
        let program = PotentialProgram::new(vec![Segment::constant(20.0, 0.5)]).unwrap();
        let spec = plain(Some(program));
        let (_, record) = split_step_evolve(&psi, &spec, 0.01, 2000, 20, &constants).unwrap();
        let (_, free) = split_step_evolve(&psi, &plain(None), 0.01, 2000, 20, &constants).unwrap();
        let last = record.len() - 1;
        let shift = record.global_phases[last] - free.global_phases[last];
        assert!((shift + 10.0).abs() < 1e-9, "{shift}");
    }

    #[test]
    fn rejects_oversized_steps_and_coarse_sampling() {
        let (psi, constants) = setup(512, 100.0, 0.0, 3.0, 0.0);
        let program = PotentialProgram::new(vec![Segment::constant(10.0, 2.0)]).unwrap();
        let spec = plain(Some(program));
        assert!(matches!(
            split_step_evolve(&psi, &spec, 0.5, 20, 1, &constants),
            Err(Error::StepSize(_))
        ));
        assert!(matches!(
            split_step_evolve(&psi, &spec, 0.01, 1000, 1000, &constants),
            Err(Error::Sampling(_))
        ));
        assert!(matches!(
            split_step_evolve(&psi, &spec, 0.01, 1000, 7, &constants),
            Err(Error::InvalidParameter { .. })
        ));
        let short = PotentialProgram::new(vec![Segment::constant(1.0, 2.0)]).unwrap();
        assert!(matches!(
            split_step_evolve(&psi, &plain(Some(short)), 0.01, 1000, 10, &constants),
            Err(Error::Scenario(_))
        ));
    }

    #[test]
    fn nyquist_condition_is_enforced() {
        let (psi, constants) = setup(4096, 400.0, 0.0, 3.0, 0.0);
        assert!(matches!(
            split_step_evolve(&psi, &plain(None), 0.01, 10, 1, &constants),
            Err(Error::StepSize(_))
        ));
    }

    #[test]
    fn containment_violation_is_reported() {
        let (psi, constants) = setup(512, 100.0, 10.0, 2.0, 3.0);
        let propagator = Propagator::new(*psi.grid(), constants);
        let program = PotentialProgram::new(vec![Segment::constant(10.0, 0.1)]).unwrap();
        let mut plan = EvolvePlan::single(plain(Some(program)), 0.01, 1000, 10);
        plan.containment = Some((Interval::new(-20.0, 20.0).unwrap(), 1.0 - 1e-8));
        assert!(matches!(
            propagator.evolve(&psi, &plan),
            Err(Error::Containment(_))
        ));
    }

    #[test]
    fn staged_plan_matches_single_stage() {
        let (psi, constants) = setup(512, 100.0, 0.0, 2.0, 1.0);
        let propagator = Propagator::new(*psi.grid(), constants);
        let program = tube_pulse_program(0.2, 1.0, 2.0, 0.5, 0.5).unwrap();
        let spec = plain(Some(program));
        let single = EvolvePlan::single(spec.clone(), 0.01, 500, 10);
        let mut staged = single.clone();
        staged.stages = vec![
            Stage::new(spec.clone(), 120),
            Stage::new(spec.clone(), 0),
            Stage::new(spec, 380),
        ];
        let (a, ra) = propagator.evolve(&psi, &single).unwrap();
        let (b, rb) = propagator.evolve(&psi, &staged).unwrap();
        assert_eq!(a, b);
        assert_eq!(ra, rb);
    }

    #[test]
    fn rotating_frame_removes_rest_phase() {
        let (psi, constants) = setup(512, 100.0, 0.0, 2.0, 0.0);
        let propagator = Propagator::new(*psi.grid(), constants);
        let mut spec = plain(None);
        spec.rest_energy = constants.rest_energy();
        let lab = EvolvePlan::single(plain(None), 1e-4, 100, 1);
        let mut rotating = EvolvePlan::single(spec, 1e-4, 100, 1);
        rotating.frame_energy = constants.rest_energy();
        let (a, _) = propagator.evolve(&psi, &lab).unwrap();
        let (b, _) = propagator.evolve(&psi, &rotating).unwrap();
        assert!(max_difference(a.amplitudes(), b.amplitudes()) < 1e-12);
    }

    #[test]
    fn clock_rate_slows_both_rest_and_kinetic_phase() {
        let (psi, constants) = setup(512, 100.0, 0.0, 2.0, 0.5);
        let propagator = Propagator::new(*psi.grid(), constants);
        let spec = HamiltonianSpec::new(1.0, 0.2, None).unwrap();
        let mut slow = EvolvePlan::single(spec.clone(), 0.02, 300, 10);
        slow.stages[0] = Stage::new(spec.clone(), 300).with_clock_rate(0.5);
        let fast = EvolvePlan::single(spec, 0.01, 300, 10);
        let (a, _) = propagator.evolve(&psi, &slow).unwrap();
        let (b, _) = propagator.evolve(&psi, &fast).unwrap();
        assert!(max_difference(a.amplitudes(), b.amplitudes()) < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn evolution_is_unitary(
            amplitude in -0.5f64..0.5,
            momentum in -1.5f64..1.5,
            width in 1.6f64..4.0,
        ) {
            let (psi, constants) = setup(256, 100.0, 0.0, width, momentum);
            let program = tube_pulse_program(amplitude, 0.5, 1.0, 0.25, 0.25).unwrap();
            let spec = plain(Some(program));
            let (_, record) = split_step_evolve(&psi, &spec, 0.01, 250, 25, &constants).unwrap();
            prop_assert!(record.max_norm_drift() < 1e-12);
            prop_assert!(record.max_momentum_drift() < 1e-10);
        }

        #[test]
        fn global_phase_is_antisymmetric(theta in -3.0f64..3.0) {
            let (psi, _) = setup(128, 60.0, 0.0, 2.0, 0.5);
            let other = psi.with_phase(theta);
            let forward = global_phase(&psi, &other).unwrap();
            let backward = global_phase(&other, &psi).unwrap();
            prop_assert!((wrap_phase(forward + backward)).abs() < 1e-12);
        }
    }
}
