//! First-order time-splitting spectral solver and its discrete adjoint.
//!
//! One step from `t_n` to `t_{n+1}`:
//!
//! ```text
//! psi*      = F^-1[ exp(-i eps k mu_l^2 / 2) F[psi^n] ]
//! psi^{n+1} = exp(-i V_j k / eps) psi*_j
//! ```
//!
//! Both substeps are unitary, so the discrete mass is conserved. The adjoint
//! sweep walks a fully stored trajectory backwards applying the conjugate
//! transpose of each step.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::field::{PotentialField, WaveField};
use crate::fourier::FourierTransform;
use crate::grid::SpectralGrid;
use crate::observables::{l2_distance, l2_norm};
use crate::quadrature::QuadratureRule;
use crate::stats::loglog_slope;

/// Time stepping parameters. `k = T / N_t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolveConfig {
    /// Scaled Planck constant.
    #[serde(rename = "epsilon")]
    pub eps: f64,
    #[serde(rename = "T")]
    pub t_final: f64,
    #[serde(rename = "N_t")]
    pub steps: usize,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self { eps: 0.1, t_final: 0.6, steps: 640 }
    }
}

impl SolveConfig {
    pub fn new(eps: f64, t_final: f64, steps: usize) -> Result<Self> {
        let cfg = Self { eps, t_final, steps };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps <= 1.0) {
            return Err(Error::invalid(format!("epsilon must be in (0, 1], got {}", self.eps)));
        }
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return Err(Error::invalid(format!("final time must be positive, got {}", self.t_final)));
        }
        if self.steps == 0 {
            return Err(Error::invalid("number of time steps must be positive"));
        }
        Ok(())
    }

    pub fn k(&self) -> f64 {
        self.t_final / self.steps as f64
    }
}

/// Normalized Gaussian packet
/// `(pi d^2)^(-1/4) exp(-(x - x0)^2 / (2 d^2)) exp(i p0 (x - x0) / eps)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GaussianPacket {
    pub delta: f64,
    pub x0: f64,
    pub p0: f64,
}

impl Default for GaussianPacket {
    fn default() -> Self {
        Self { delta: 0.2, x0: 0.0, p0: 0.0 }
    }
}

impl GaussianPacket {
    pub fn value(&self, x: f64, eps: f64) -> Complex64 {
        let d2 = self.delta * self.delta;
        let amp = (PI * d2).powf(-0.25) * (-(x - self.x0).powi(2) / (2.0 * d2)).exp();
        Complex64::from_polar(amp, self.p0 * (x - self.x0) / eps)
    }

    pub fn field(&self, grid: SpectralGrid, eps: f64) -> WaveField {
        WaveField::from_fn(grid, |x| self.value(x, eps))
    }
}

/// All snapshots `psi^0 .. psi^{N_t}` of one solve.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub steps: Vec<WaveField>,
}

impl Trajectory {
    pub fn terminal(&self) -> &WaveField {
        self.steps.last().expect("trajectory is never empty")
    }
}

/// Observed terminal values at a subset of grid indices.
#[derive(Debug, Clone, Copy)]
pub struct SensorObservation<'a> {
    pub indices: &'a [usize],
    pub values: &'a [Complex64],
}

/// Output of [`Propagator::loss_and_gradient`].
#[derive(Debug, Clone)]
pub struct AdjointGradient {
    /// `misfit + regularization`.
    pub loss: f64,
    /// `sum_s |psi_s(T) - obs_s|^2`.
    pub misfit: f64,
    /// `lambda h sum_j V_j^2`.
    pub regularization: f64,
    /// `d loss / d V_j`.
    pub grad: Vec<f64>,
    pub terminal: WaveField,
}

/// Precomputed kinetic multipliers and transform plans for one grid and
/// solve configuration. Reusable across solves with different potentials.
#[derive(Debug, Clone)]
pub struct Propagator {
    grid: SpectralGrid,
    cfg: SolveConfig,
    ft: FourierTransform,
    kinetic: Vec<Complex64>,
}

impl Propagator {
    pub fn new(grid: SpectralGrid, cfg: SolveConfig) -> Result<Self> {
        cfg.validate()?;
        let k = cfg.k();
        let kinetic = grid
            .fourier_modes()
            .iter()
            .map(|mu| Complex64::from_polar(1.0, -cfg.eps * k * mu * mu / 2.0))
            .collect();
        Ok(Self { grid, cfg, ft: FourierTransform::new(&grid), kinetic })
    }

    pub fn grid(&self) -> &SpectralGrid {
        &self.grid
    }

    pub fn config(&self) -> &SolveConfig {
        &self.cfg
    }

    fn potential_phase(&self, v: &[f64]) -> Vec<Complex64> {
        let c = -self.cfg.k() / self.cfg.eps;
        v.iter().map(|vj| Complex64::from_polar(1.0, c * vj)).collect()
    }

    fn check(&self, psi: &WaveField, v: &[f64]) -> Result<()> {
        if psi.grid() != &self.grid {
            return Err(Error::invalid("wave field lives on a different grid"));
        }
        if v.len() != self.grid.len() {
            return Err(Error::invalid(format!(
                "potential has {} values for a grid of {}",
                v.len(),
                self.grid.len()
            )));
        }
        Ok(())
    }

    fn kinetic_substep(&self, buf: &mut [Complex64], conjugate: bool) {
        self.ft.forward_in_place(buf);
        for (c, m) in buf.iter_mut().zip(&self.kinetic) {
            *c *= if conjugate { m.conj() } else { *m };
        }
        self.ft.inverse_in_place(buf);
    }

    fn step_in_place(&self, buf: &mut [Complex64], phase: &[Complex64]) {
        self.kinetic_substep(buf, false);
        for (c, p) in buf.iter_mut().zip(phase) {
            *c *= p;
        }
    }

    pub fn step(&self, psi: &WaveField, v: &[f64]) -> Result<WaveField> {
        self.check(psi, v)?;
        let mut buf = psi.values().to_vec();
        self.step_in_place(&mut buf, &self.potential_phase(v));
        WaveField::new(self.grid, buf)
    }

    /// Terminal field after `N_t` steps.
    pub fn solve(&self, psi0: &WaveField, v: &[f64]) -> Result<WaveField> {
        self.check(psi0, v)?;
        let phase = self.potential_phase(v);
        let mut buf = psi0.values().to_vec();
        for _ in 0..self.cfg.steps {
            self.step_in_place(&mut buf, &phase);
        }
        WaveField::new(self.grid, buf)
    }

    pub fn solve_trajectory(&self, psi0: &WaveField, v: &[f64]) -> Result<Trajectory> {
        self.check(psi0, v)?;
        let phase = self.potential_phase(v);
        let mut steps = Vec::with_capacity(self.cfg.steps + 1);
        steps.push(psi0.clone());
        let mut buf = psi0.values().to_vec();
        for _ in 0..self.cfg.steps {
            self.step_in_place(&mut buf, &phase);
            steps.push(WaveField::new(self.grid, buf.clone())?);
        }
        Ok(Trajectory { steps })
    }

    fn check_sensors(&self, obs: &SensorObservation<'_>) -> Result<()> {
        if obs.indices.len() != obs.values.len() {
            return Err(Error::invalid("sensor indices and observed values differ in length"));
        }
        if let Some(&s) = obs.indices.iter().find(|&&s| s >= self.grid.len()) {
            return Err(Error::invalid(format!(
                "sensor index {s} out of range for grid of {}",
                self.grid.len()
            )));
        }
        Ok(())
    }

    fn misfit(terminal: &WaveField, obs: &SensorObservation<'_>) -> f64 {
        obs.indices
            .iter()
            .zip(obs.values)
            .map(|(&s, o)| (terminal.values()[s] - o).norm_sqr())
            .sum()
    }

    /// Loss only, without the reverse sweep.
    pub fn loss(
        &self,
        psi0: &WaveField,
        v: &[f64],
        obs: &SensorObservation<'_>,
        lambda_reg: f64,
    ) -> Result<f64> {
        self.check_sensors(obs)?;
        let terminal = self.solve(psi0, v)?;
        let reg = lambda_reg * self.grid.h() * v.iter().map(|x| x * x).sum::<f64>();
        Ok(Self::misfit(&terminal, obs) + reg)
    }

    /// Control loss `sum_s |psi_s(T) - obs_s|^2 + lambda h sum V^2` and its
    /// exact gradient with respect to the sampled potential.
    ///
    /// Cotangents follow the convention `a = dL/dRe(psi) + i dL/dIm(psi)`,
    /// so a complex-linear map `y = A x` pulls back as `a_x = A^H a_y`.
    pub fn loss_and_gradient(
        &self,
        psi0: &WaveField,
        v: &[f64],
        obs: &SensorObservation<'_>,
        lambda_reg: f64,
    ) -> Result<AdjointGradient> {
        self.check_sensors(obs)?;
        let traj = self.solve_trajectory(psi0, v)?;
        let terminal = traj.terminal().clone();
        let misfit = Self::misfit(&terminal, obs);

        let m = self.grid.len();
        let mut cot = vec![Complex64::new(0.0, 0.0); m];
        for (&s, o) in obs.indices.iter().zip(obs.values) {
            cot[s] += 2.0 * (terminal.values()[s] - o);
        }

        let phase_conj: Vec<Complex64> = self.potential_phase(v).iter().map(|p| p.conj()).collect();
        let k_over_eps = self.cfg.k() / self.cfg.eps;
        let mut grad = vec![0.0; m];
        for n in (0..self.cfg.steps).rev() {
            let after = traj.steps[n + 1].values();
            // d psi^{n+1}_j / d V_j = (-i k / eps) psi^{n+1}_j
            for j in 0..m {
                grad[j] += k_over_eps * (cot[j].conj() * after[j]).im;
            }
            for (c, p) in cot.iter_mut().zip(&phase_conj) {
                *c *= p;
            }
            self.kinetic_substep(&mut cot, true);
        }

        let h = self.grid.h();
        let regularization = lambda_reg * h * v.iter().map(|x| x * x).sum::<f64>();
        for (g, vj) in grad.iter_mut().zip(v) {
            *g += 2.0 * lambda_reg * h * vj;
        }
        Ok(AdjointGradient { loss: misfit + regularization, misfit, regularization, grad, terminal })
    }

    /// Central-difference gradient of [`Propagator::loss`]; `2M` solves.
    pub fn fd_gradient(
        &self,
        psi0: &WaveField,
        v: &[f64],
        obs: &SensorObservation<'_>,
        lambda_reg: f64,
        delta: f64,
    ) -> Result<Vec<f64>> {
        if delta <= 0.0 {
            return Err(Error::invalid("finite-difference step must be positive"));
        }
        let mut vp = v.to_vec();
        let mut out = Vec::with_capacity(v.len());
        for j in 0..v.len() {
            vp[j] = v[j] + delta;
            let up = self.loss(psi0, &vp, obs, lambda_reg)?;
            vp[j] = v[j] - delta;
            let down = self.loss(psi0, &vp, obs, lambda_reg)?;
            vp[j] = v[j];
            out.push((up - down) / (2.0 * delta));
        }
        Ok(out)
    }
}

fn same_grid(psi: &WaveField, v: &PotentialField) -> Result<()> {
    if psi.grid() != v.grid() {
        return Err(Error::invalid("wave field and potential live on different grids"));
    }
    Ok(())
}

pub fn tssp_step(psi: &WaveField, v: &PotentialField, cfg: &SolveConfig) -> Result<WaveField> {
    same_grid(psi, v)?;
    Propagator::new(*psi.grid(), *cfg)?.step(psi, v.values())
}

pub fn tssp_solve(psi0: &WaveField, v: &PotentialField, cfg: &SolveConfig) -> Result<WaveField> {
    same_grid(psi0, v)?;
    Propagator::new(*psi0.grid(), *cfg)?.solve(psi0, v.values())
}

pub fn tssp_trajectory(psi0: &WaveField, v: &PotentialField, cfg: &SolveConfig) -> Result<Trajectory> {
    same_grid(psi0, v)?;
    Propagator::new(*psi0.grid(), *cfg)?.solve_trajectory(psi0, v.values())
}

pub fn loss_and_adjoint_gradient(
    psi0: &WaveField,
    v: &PotentialField,
    cfg: &SolveConfig,
    obs: &SensorObservation<'_>,
    lambda_reg: f64,
) -> Result<AdjointGradient> {
    same_grid(psi0, v)?;
    Propagator::new(*psi0.grid(), *cfg)?.loss_and_gradient(psi0, v.values(), obs, lambda_reg)
}

pub fn fd_gradient(
    psi0: &WaveField,
    v: &PotentialField,
    cfg: &SolveConfig,
    obs: &SensorObservation<'_>,
    lambda_reg: f64,
    delta: f64,
) -> Result<Vec<f64>> {
    same_grid(psi0, v)?;
    Propagator::new(*psi0.grid(), *cfg)?.fd_gradient(psi0, v.values(), obs, lambda_reg, delta)
}

/// Central-difference estimate of `||d psi(T) / dz||` at a fixed `z`.
pub fn z_sensitivity(
    psi0: &WaveField,
    potential: &(dyn Fn(f64, f64) -> f64 + Sync),
    z: f64,
    dz: f64,
    cfg: &SolveConfig,
) -> Result<f64> {
    if !(dz > 0.0) || z - dz < -1.0 || z + dz > 1.0 {
        return Err(Error::invalid(format!("z = {z} +/- {dz} leaves [-1, 1]")));
    }
    let prop = Propagator::new(*psi0.grid(), *cfg)?;
    z_sensitivity_with(&prop, psi0, potential, z, dz)
}

fn z_sensitivity_with(
    prop: &Propagator,
    psi0: &WaveField,
    potential: &(dyn Fn(f64, f64) -> f64 + Sync),
    z: f64,
    dz: f64,
) -> Result<f64> {
    let pts = prop.grid().points();
    let vp: Vec<f64> = pts.iter().map(|&x| potential(x, z + dz)).collect();
    let vm: Vec<f64> = pts.iter().map(|&x| potential(x, z - dz)).collect();
    let up = prop.solve(psi0, &vp)?;
    let down = prop.solve(psi0, &vm)?;
    Ok(l2_distance(&up, &down) / (2.0 * dz))
}

/// Gamma-norm estimate of `d psi(T) / dz` aggregated over the quadrature nodes.
pub fn z_derivative_gamma_norm(
    psi0: &WaveField,
    potential: &(dyn Fn(f64, f64) -> f64 + Sync),
    rule: &QuadratureRule,
    dz: f64,
    cfg: &SolveConfig,
) -> Result<f64> {
    use rayon::prelude::*;
    let prop = Propagator::new(*psi0.grid(), *cfg)?;
    for &z in rule.nodes() {
        if z - dz < -1.0 || z + dz > 1.0 {
            return Err(Error::invalid(format!("node z = {z} +/- {dz} leaves [-1, 1]")));
        }
    }
    let norms: Vec<f64> = rule
        .nodes()
        .par_iter()
        .map(|&z| z_sensitivity_with(&prop, psi0, potential, z, dz))
        .collect::<Result<_>>()?;
    let s: f64 = norms.iter().zip(rule.weights()).map(|(n, w)| 0.5 * w * n * n).sum();
    Ok(s.sqrt())
}

/// One row of a temporal self-convergence study.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub k: f64,
    pub steps: usize,
    pub error: f64,
    /// `log(e_prev / e) / log(k_prev / k)`; absent on the first row.
    pub observed_order: Option<f64>,
}

/// Terminal L2 errors for each step count against a reference solve with
/// `refine` times the finest step count.
pub fn convergence_study(
    psi0: &WaveField,
    v: &PotentialField,
    eps: f64,
    t_final: f64,
    steps: &[usize],
    refine: usize,
) -> Result<Vec<ConvergenceRow>> {
    if steps.is_empty() || refine < 2 {
        return Err(Error::invalid("convergence study needs step counts and refine >= 2"));
    }
    let finest = *steps.iter().max().unwrap();
    let reference = tssp_solve(psi0, v, &SolveConfig::new(eps, t_final, finest * refine)?)?;
    let mut rows: Vec<ConvergenceRow> = Vec::with_capacity(steps.len());
    for &n in steps {
        let cfg = SolveConfig::new(eps, t_final, n)?;
        let err = l2_distance(&tssp_solve(psi0, v, &cfg)?, &reference);
        let observed_order = rows
            .last()
            .map(|prev| (prev.error / err).ln() / (prev.k / cfg.k()).ln());
        rows.push(ConvergenceRow { k: cfg.k(), steps: n, error: err, observed_order });
    }
    Ok(rows)
}

/// Least-squares order over all rows of a study.
pub fn fitted_order(rows: &[ConvergenceRow]) -> f64 {
    let k: Vec<f64> = rows.iter().map(|r| r.k).collect();
    let e: Vec<f64> = rows.iter().map(|r| r.error).collect();
    loglog_slope(&k, &e)
}

/// Relative spread of the mass over a trajectory.
pub fn mass_drift(traj: &Trajectory) -> f64 {
    let m0 = l2_norm(&traj.steps[0]);
    traj.steps.iter().map(|s| (l2_norm(s) - m0).abs() / m0).fold(0.0, f64::max)
}
