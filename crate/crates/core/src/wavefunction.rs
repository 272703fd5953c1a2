use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::constants::Constants;
use crate::error::{require_positive, Error, Result};
use crate::grid::Grid1D;

/// Ratio of boundary amplitude to peak amplitude tolerated for a fresh packet.
pub const BOUNDARY_TAIL_LIMIT: f64 = 1e-12;
/// A packet must span at least this many grid spacings (one standard deviation).
pub const MIN_WIDTH_IN_SPACINGS: f64 = 4.0;

/// Complex amplitudes sampled on a periodic grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Wavefunction {
    amplitudes: Vec<Complex64>,
    grid: Grid1D,
}

impl Wavefunction {
    pub fn new(grid: Grid1D, amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.len() != grid.n_points() {
            return Err(Error::InvalidParameter {
                name: "amplitudes",
                reason: format!(
                    "expected {} samples, got {}",
                    grid.n_points(),
                    amplitudes.len()
                ),
            });
        }
        if amplitudes
            .iter()
            .any(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(Error::InvalidParameter {
                name: "amplitudes",
                reason: "non-finite amplitude".into(),
            });
        }
        Ok(Self { amplitudes, grid })
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amplitudes
    }

    /// `sum |psi_i|^2 dx`
    pub fn norm_sq(&self) -> f64 {
        self.amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.grid.spacing()
    }

    pub fn normalized(mut self) -> Result<Self> {
        let norm = self.norm_sq().sqrt();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::Domain(format!(
                "cannot normalize a state of norm {norm}"
            )));
        }
        let inv = 1.0 / norm;
        for z in &mut self.amplitudes {
            *z *= inv;
        }
        Ok(self)
    }

    /// `<self|other> = sum conj(self_i) other_i dx`
    pub fn inner(&self, other: &Wavefunction) -> Result<Complex64> {
        self.same_grid(other)?;
        let sum: Complex64 = self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum();
        Ok(sum * self.grid.spacing())
    }

    /// Copy multiplied by the global factor `e^{i theta}`.
    pub fn with_phase(&self, theta: f64) -> Self {
        let factor = Complex64::from_polar(1.0, theta);
        self.mapped(|_, z| z * factor)
    }

    /// Copy multiplied by the position-dependent factor `e^{i q x / hbar}`.
    pub fn kicked(&self, momentum: f64, hbar: f64) -> Self {
        let grid = self.grid;
        self.mapped(|i, z| z * Complex64::from_polar(1.0, momentum * grid.position(i) / hbar))
    }

    pub fn scaled(&self, factor: f64) -> Self {
        self.mapped(|_, z| z * factor)
    }

    fn mapped(&self, f: impl Fn(usize, Complex64) -> Complex64) -> Self {
        Self {
            amplitudes: self
                .amplitudes
                .iter()
                .enumerate()
                .map(|(i, &z)| f(i, z))
                .collect(),
            grid: self.grid,
        }
    }

    pub(crate) fn same_grid(&self, other: &Wavefunction) -> Result<()> {
        if self.grid == other.grid {
            Ok(())
        } else {
            Err(Error::Scenario(format!(
                "grid mismatch: {} vs {}",
                self.grid, other.grid
            )))
        }
    }
}

/// Initial packet parameters: mean position, position standard deviation, mean momentum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PacketSpec {
    pub center: f64,
    pub width: f64,
    pub momentum: f64,
}

/// Normalized Gaussian `exp(-(x-x0)^2 / (4 width^2) + i p x / hbar)`.
///
/// `width` is the position standard deviation of `|psi|^2`.
pub fn make_gaussian_packet(
    grid: &Grid1D,
    center: f64,
    width: f64,
    momentum: f64,
    constants: &Constants,
) -> Result<Wavefunction> {
    require_positive("width", width)?;
    if !momentum.is_finite() {
        return Err(Error::InvalidParameter {
            name: "momentum",
            reason: format!("must be finite, got {momentum}"),
        });
    }
    if !grid.contains(center) {
        return Err(Error::Domain(format!(
            "packet center {center} lies outside the grid ({grid})"
        )));
    }
    let dx = grid.spacing();
    if width < MIN_WIDTH_IN_SPACINGS * dx {
        return Err(Error::Resolution(format!(
            "width {width} is below {MIN_WIDTH_IN_SPACINGS} grid spacings ({dx})"
        )));
    }
    let to_boundary = (center - grid.x_min()).min(-grid.x_min() - center);
    let tail = (-(to_boundary * to_boundary) / (4.0 * width * width)).exp();
    if tail > BOUNDARY_TAIL_LIMIT {
        return Err(Error::Containment(format!(
            "packet tail at the boundary is {tail:.3e} of peak (limit {BOUNDARY_TAIL_LIMIT:e})"
        )));
    }

    let inv_4w2 = 1.0 / (4.0 * width * width);
    let k0 = momentum / constants.hbar;
    let amplitudes = (0..grid.n_points())
        .map(|i| {
            let x = grid.position(i);
            let d = x - center;
            Complex64::from_polar((-d * d * inv_4w2).exp(), k0 * x)
        })
        .collect();
    Wavefunction::new(*grid, amplitudes)?.normalized()
}
