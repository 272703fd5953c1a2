//! Numerical two-arm interferometry for the electric Aharonov-Bohm phase and
//! its gravitational analog in a weak Schwarzschild field.
//!
//! The crate is organised bottom-up:
//!
//! * [`constants`], [`grid`], [`wavefunction`], [`program`], [`metric`]: shared
//!   domain types.
//! * [`analytic`]: closed-form phase predictions.
//! * [`potentials`]: per-experiment programs and Hamiltonian coefficients.
//! * [`solver`]: split-step spectral propagation and observables.
//! * [`interferometer`]: the full split / evolve / recombine experiment.

pub mod analytic;
pub mod constants;
pub mod error;
pub mod grid;
pub mod interferometer;
pub mod metric;
pub mod potentials;
pub mod program;
pub mod solver;
pub mod wavefunction;

pub use analytic::RedshiftMode;
pub use constants::Constants;
pub use error::{Error, Result};
pub use grid::Grid1D;
pub use metric::MetricParams;
pub use potentials::HamiltonianSpec;
pub use program::{PotentialProgram, Segment};
pub use wavefunction::{make_gaussian_packet, PacketSpec, Wavefunction};
