//! Uniform periodic grids on an interval `[a, b)`.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Uniform periodic 1-D grid with `m` cells of width `h = (b - a) / m`.
///
/// Only `x_0 .. x_{m-1}` are stored; `x_m` aliases `x_0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralGrid {
    a: f64,
    b: f64,
    m: usize,
}

impl SpectralGrid {
    pub fn new(a: f64, b: f64, m: usize) -> Result<Self> {
        if !(a.is_finite() && b.is_finite()) || b <= a {
            return Err(Error::invalid(format!("grid needs a < b, got [{a}, {b}]")));
        }
        if m < 4 || m % 2 != 0 {
            return Err(Error::invalid(format!("grid size must be even and >= 4, got {m}")));
        }
        Ok(Self { a, b, m })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    /// Number of stored points.
    pub fn len(&self) -> usize {
        self.m
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn length(&self) -> f64 {
        self.b - self.a
    }

    pub fn h(&self) -> f64 {
        (self.b - self.a) / self.m as f64
    }

    pub fn x(&self, j: usize) -> f64 {
        self.a + j as f64 * self.h()
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.m).map(|j| self.x(j)).collect()
    }

    /// Signed mode number `l` stored at transform slot `i`.
    ///
    /// Slots follow the usual FFT layout: `0, 1, .., m/2 - 1, -m/2, .., -1`.
    pub fn mode_number(&self, i: usize) -> i64 {
        let half = self.m / 2;
        if i < half {
            i as i64
        } else {
            i as i64 - self.m as i64
        }
    }

    /// Transform slot holding mode `l`, for `-m/2 <= l < m/2`.
    pub fn mode_slot(&self, l: i64) -> usize {
        l.rem_euclid(self.m as i64) as usize
    }

    /// Wave numbers `mu_l = 2 pi l / (b - a)` in transform slot order.
    pub fn fourier_modes(&self) -> Vec<f64> {
        let scale = 2.0 * PI / self.length();
        (0..self.m).map(|i| scale * self.mode_number(i) as f64).collect()
    }
}

/// Convenience wrapper matching [`SpectralGrid::new`].
pub fn make_grid(a: f64, b: f64, m: usize) -> Result<SpectralGrid> {
    SpectralGrid::new(a, b, m)
}

/// See [`SpectralGrid::fourier_modes`].
pub fn fourier_modes(grid: &SpectralGrid) -> Vec<f64> {
    grid.fourier_modes()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paper_grid_spacing() {
        let g = make_grid(-PI / 2.0, PI / 2.0, 1000).unwrap();
        assert!((g.h() - PI / 1000.0).abs() < 1e-15);
        assert_eq!(g.x(0), -PI / 2.0);
        assert!((g.h() * g.len() as f64 - PI).abs() < 1e-14);
    }

    #[test]
    fn four_point_grid() {
        let g = make_grid(0.0, 2.0 * PI, 4).unwrap();
        let pts = g.points();
        let want = [0.0, PI / 2.0, PI, 3.0 * PI / 2.0];
        for (p, w) in pts.iter().zip(want) {
            assert!((p - w).abs() < 1e-15);
        }
    }

    #[test]
    fn rejects_bad_sizes() {
        assert!(matches!(make_grid(0.0, 1.0, 5), Err(Error::InvalidArgument(_))));
        assert!(make_grid(0.0, 1.0, 2).is_err());
        assert!(make_grid(1.0, 1.0, 8).is_err());
        assert!(make_grid(1.0, 0.0, 8).is_err());
    }

    #[test]
    fn mode_layout() {
        let g = make_grid(0.0, 2.0 * PI, 4).unwrap();
        let mu = g.fourier_modes();
        assert_eq!(mu, vec![0.0, 1.0, -2.0, -1.0]);
        let mut sorted = mu.clone();
        sorted.sort_by(f64::total_cmp);
        assert_eq!(sorted, vec![-2.0, -1.0, 0.0, 1.0]);

        let g = make_grid(-PI / 2.0, PI / 2.0, 8).unwrap();
        let mu = g.fourier_modes();
        assert!((mu[g.mode_slot(1)] - 2.0).abs() < 1e-15);
        let max = mu.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!((max - PI * 8.0 / PI).abs() < 1e-12);
        for i in 0..8 {
            assert_eq!(g.mode_slot(g.mode_number(i)), i);
        }
    }
}
