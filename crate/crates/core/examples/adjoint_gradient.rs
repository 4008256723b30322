//! Exact discrete adjoint of the control loss against central differences.

use num_complex::Complex64;
use semiclassical_control::data::place_sensors;
use semiclassical_control::tssp::{fd_gradient, loss_and_adjoint_gradient, SensorObservation};
use semiclassical_control::{GaussianPacket, PotentialField, SolveConfig, SpectralGrid};
use std::f64::consts::FRAC_PI_2;

fn main() -> semiclassical_control::Result<()> {
    let grid = SpectralGrid::new(-FRAC_PI_2, FRAC_PI_2, 64)?;
    let cfg = SolveConfig::new(0.1, 0.6, 16)?;
    let psi0 = GaussianPacket::default().field(grid, cfg.eps);
    let sensors = place_sensors(&grid, 12)?;
    // observations from x^2, trial potential 0.8 x^2 + 0.1
    let truth = semiclassical_control::tssp::tssp_solve(&psi0, &PotentialField::from_fn(grid, |x| x * x)?, &cfg)?;
    let obs: Vec<Complex64> = sensors.iter().map(|&s| truth.values()[s]).collect();
    let o = SensorObservation { indices: &sensors, values: &obs };
    let trial = PotentialField::from_fn(grid, |x| 0.8 * x * x + 0.1)?;

    let adj = loss_and_adjoint_gradient(&psi0, &trial, &cfg, &o, 1e-3)?;
    let fd = fd_gradient(&psi0, &trial, &cfg, &o, 1e-3, 1e-5)?;
    let scale = fd.iter().fold(0.0f64, |m, g| m.max(g.abs()));
    let dev = adj.grad.iter().zip(&fd).map(|(a, f)| (a - f).abs()).fold(0.0, f64::max) / scale;
    println!("loss {:.6e} (misfit {:.6e})", adj.loss, adj.misfit);
    for j in (0..grid.len()).step_by(8) {
        println!("  x = {:+.3}  adjoint {:+.6e}  fd {:+.6e}", grid.x(j), adj.grad[j], fd[j]);
    }
    println!("max relative deviation {dev:.2e}");
    Ok(())
}
