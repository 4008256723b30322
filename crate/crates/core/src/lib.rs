//! Reconstruction of the control potential of a semiclassical Schrodinger
//! equation from terminal-time wave observations.
//!
//! The forward model is a first-order time-splitting spectral solver
//! ([`tssp`]) with an exact discrete adjoint. Potentials are represented by
//! neural surrogates ([`nets`]) and trained by SGD or (preconditioned)
//! stochastic gradient Langevin dynamics ([`train`]) against synthetic data
//! ([`data`]). [`experiment`] wires these into reproducible runs.

pub mod data;
pub mod error;
pub mod experiment;
pub mod field;
pub mod fourier;
pub mod grid;
pub mod nets;
pub mod observables;
pub mod quadrature;
pub mod stats;
pub mod train;
pub mod tssp;

pub use error::{Error, Result};
pub use field::{PotentialField, WaveField};
pub use grid::SpectralGrid;
pub use quadrature::{gauss_legendre, QuadratureRule};
pub use tssp::{GaussianPacket, Propagator, SolveConfig};
