//! Propagate a Gaussian packet through a harmonic potential and watch the
//! density, current and mass.

use semiclassical_control::observables::{current_density, l2_norm, position_density};
use semiclassical_control::{GaussianPacket, PotentialField, SolveConfig, SpectralGrid};
use semiclassical_control::tssp::tssp_trajectory;
use std::f64::consts::FRAC_PI_2;

fn main() -> semiclassical_control::Result<()> {
    let grid = SpectralGrid::new(-FRAC_PI_2, FRAC_PI_2, 512)?;
    let cfg = SolveConfig::new(0.1, 0.6, 300)?;
    let psi0 = GaussianPacket { delta: 0.2, x0: -0.3, p0: 0.4 }.field(grid, cfg.eps);
    let v = PotentialField::from_fn(grid, |x| x * x)?;
    let traj = tssp_trajectory(&psi0, &v, &cfg)?;

    println!("{:>6} {:>10} {:>12} {:>12}", "step", "t", "mass", "<x>");
    for (n, psi) in traj.steps.iter().enumerate().step_by(50) {
        let dens = position_density(psi);
        let mean_x: f64 = grid.points().iter().zip(&dens).map(|(x, d)| x * d).sum::<f64>() * grid.h();
        println!("{n:>6} {:>10.4} {:>12.3e} {mean_x:>12.5}", n as f64 * cfg.k(), l2_norm(psi));
    }

    let end = traj.terminal();
    let flux: f64 = current_density(end, cfg.eps).iter().sum::<f64>() * grid.h();
    println!("integrated current at T: {flux:.5}");
    Ok(())
}
