//! Discrete Fourier transform pair used by the spectral solver.
//!
//! Forward: `c_l = sum_j psi_j exp(-i mu_l (x_j - a))` (unnormalized).
//! Inverse: `psi_j = (1/M) sum_l c_l exp(i mu_l (x_j - a))`.
//! Coefficients are stored in transform slot order; see
//! [`SpectralGrid::mode_number`] for the slot-to-mode permutation.

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

use crate::field::WaveField;
use crate::grid::SpectralGrid;

/// Planned forward/inverse transforms for one grid size.
#[derive(Clone)]
pub struct FourierTransform {
    len: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for FourierTransform {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FourierTransform").field("len", &self.len).finish()
    }
}

impl FourierTransform {
    pub fn new(grid: &SpectralGrid) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            len: grid.len(),
            forward: planner.plan_fft_forward(grid.len()),
            inverse: planner.plan_fft_inverse(grid.len()),
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// In-place unnormalized forward transform.
    pub fn forward_in_place(&self, buf: &mut [Complex64]) {
        assert_eq!(buf.len(), self.len);
        self.forward.process(buf);
    }

    /// In-place inverse transform including the `1/M` factor.
    pub fn inverse_in_place(&self, buf: &mut [Complex64]) {
        assert_eq!(buf.len(), self.len);
        self.inverse.process(buf);
        let s = 1.0 / self.len as f64;
        buf.iter_mut().for_each(|c| *c *= s);
    }
}

pub fn forward_transform(f: &WaveField) -> Vec<Complex64> {
    let mut buf = f.values().to_vec();
    FourierTransform::new(f.grid()).forward_in_place(&mut buf);
    buf
}

pub fn inverse_transform(grid: &SpectralGrid, coeffs: &[Complex64]) -> WaveField {
    let mut buf = coeffs.to_vec();
    FourierTransform::new(grid).inverse_in_place(&mut buf);
    WaveField::new(*grid, buf).expect("coefficient count must match the grid")
}

/// Spectral first derivative. The unpaired `-M/2` mode is dropped so that
/// real input gives real output.
pub fn spectral_derivative(f: &WaveField) -> WaveField {
    let grid = f.grid();
    let ft = FourierTransform::new(grid);
    let mu = grid.fourier_modes();
    let nyquist = grid.mode_slot(-(grid.len() as i64) / 2);
    let mut buf = f.values().to_vec();
    ft.forward_in_place(&mut buf);
    for (i, c) in buf.iter_mut().enumerate() {
        *c = if i == nyquist { Complex64::new(0.0, 0.0) } else { *c * Complex64::new(0.0, mu[i]) };
    }
    ft.inverse_in_place(&mut buf);
    WaveField::new(*grid, buf).expect("same grid")
}
