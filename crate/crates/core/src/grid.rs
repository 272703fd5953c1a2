//! Periodic one-dimensional grid and its spectral companion.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{require_positive, Error, Result};

pub const MIN_POINTS: usize = 16;

/// Uniform periodic grid on `[-length/2, length/2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    n_points: usize,
    length: f64,
}

impl Grid1D {
    pub fn new(n_points: usize, length: f64) -> Result<Self> {
        if n_points < MIN_POINTS || !n_points.is_power_of_two() {
            return Err(Error::InvalidParameter {
                name: "n_points",
                reason: format!("must be a power of two >= {MIN_POINTS}, got {n_points}"),
            });
        }
        require_positive("length", length)?;
        Ok(Self { n_points, length })
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.n_points as f64
    }

    pub fn x_min(&self) -> f64 {
        -0.5 * self.length
    }

    pub fn position(&self, i: usize) -> f64 {
        self.x_min() + i as f64 * self.spacing()
    }

    pub fn positions(&self) -> Vec<f64> {
        (0..self.n_points).map(|i| self.position(i)).collect()
    }

    /// Angular wavenumbers in FFT order. The Nyquist entry is negative.
    pub fn wavenumbers(&self) -> Vec<f64> {
        let n = self.n_points;
        let dk = 2.0 * PI / self.length;
        (0..n)
            .map(|j| {
                let signed = if j < n / 2 {
                    j as isize
                } else {
                    j as isize - n as isize
                };
                signed as f64 * dk
            })
            .collect()
    }

    pub fn nyquist_wavenumber(&self) -> f64 {
        PI / self.spacing()
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.x_min() && x <= -self.x_min()
    }
}

impl fmt::Display for Grid1D {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} points over {}", self.n_points, self.length)
    }
}

/// Cached forward/inverse FFT plans for one grid size.
///
/// The forward transform is unnormalized; the inverse carries the `1/n`.
#[derive(Clone)]
pub struct Spectral {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scratch_len: usize,
    n: usize,
}

impl Spectral {
    pub fn new(grid: &Grid1D) -> Self {
        let mut planner = FftPlanner::new();
        let n = grid.n_points();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let scratch_len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());
        Self {
            forward,
            inverse,
            scratch_len,
            n,
        }
    }

    pub fn scratch(&self) -> Vec<Complex64> {
        vec![Complex64::new(0.0, 0.0); self.scratch_len]
    }

    pub fn forward(&self, data: &mut [Complex64], scratch: &mut [Complex64]) {
        debug_assert_eq!(data.len(), self.n);
        self.forward.process_with_scratch(data, scratch);
    }

    pub fn inverse(&self, data: &mut [Complex64], scratch: &mut [Complex64]) {
        debug_assert_eq!(data.len(), self.n);
        self.inverse.process_with_scratch(data, scratch);
        let inv_n = 1.0 / self.n as f64;
        for z in data.iter_mut() {
            *z *= inv_n;
        }
    }

    /// Forward transform of a copy of `data`.
    pub fn transformed(&self, data: &[Complex64]) -> Vec<Complex64> {
        let mut out = data.to_vec();
        let mut scratch = self.scratch();
        self.forward(&mut out, &mut scratch);
        out
    }
}

impl fmt::Debug for Spectral {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Spectral").field("n", &self.n).finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_sizes() {
        assert!(Grid1D::new(8, 1.0).is_err());
        assert!(Grid1D::new(100, 1.0).is_err());
        assert!(Grid1D::new(64, 0.0).is_err());
        assert!(Grid1D::new(64, 1.0).is_ok());
    }

    #[test]
    fn wavenumbers_follow_fft_order() {
        let grid = Grid1D::new(16, 2.0 * PI).unwrap();
        let k = grid.wavenumbers();
        assert_eq!(k.len(), 16);
        assert_eq!(k[0], 0.0);
        assert_eq!(k[1], 1.0);
        assert_eq!(k[7], 7.0);
        assert_eq!(k[8], -8.0);
        assert_eq!(k[15], -1.0);
        // symmetric apart from the single Nyquist entry
        for j in 1..8 {
            assert_eq!(k[j], -k[16 - j]);
        }
    }

    #[test]
    fn positions_are_centered() {
        let grid = Grid1D::new(32, 8.0).unwrap();
        assert_eq!(grid.spacing(), 0.25);
        assert_eq!(grid.position(0), -4.0);
        assert_eq!(grid.position(16), 0.0);
        assert_eq!(grid.positions().last().copied(), Some(3.75));
    }

    #[test]
    fn fft_round_trip() {
        let grid = Grid1D::new(64, 10.0).unwrap();
        let spectral = Spectral::new(&grid);
        let data: Vec<Complex64> = (0..64)
            .map(|i| Complex64::new((i as f64 * 0.3).sin(), (i as f64 * 0.7).cos()))
            .collect();
        let mut work = data.clone();
        let mut scratch = spectral.scratch();
        spectral.forward(&mut work, &mut scratch);
        spectral.inverse(&mut work, &mut scratch);
        for (a, b) in work.iter().zip(&data) {
            assert!((a - b).norm() < 1e-14);
        }
    }
}
