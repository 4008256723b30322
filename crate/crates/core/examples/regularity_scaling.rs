//! Sensitivity of the terminal wave to the random parameter z grows like
//! 1/eps.

use semiclassical_control::data::potential_stochastic;
use semiclassical_control::stats::loglog_slope;
use semiclassical_control::tssp::z_derivative_gamma_norm;
use semiclassical_control::{gauss_legendre, GaussianPacket, SolveConfig, SpectralGrid};
use std::f64::consts::FRAC_PI_2;

fn main() -> semiclassical_control::Result<()> {
    let grid = SpectralGrid::new(-FRAC_PI_2, FRAC_PI_2, 256)?;
    let rule = gauss_legendre(8)?;
    let packet = GaussianPacket { delta: 0.4, x0: 0.7, p0: 0.5 };
    let eps_list = [0.5, 0.25, 0.125, 0.0625];
    let mut norms = Vec::new();
    for &eps in &eps_list {
        let cfg = SolveConfig::new(eps, 0.6, 200)?;
        let n = z_derivative_gamma_norm(&packet.field(grid, eps), &potential_stochastic, &rule, 1e-3, &cfg)?;
        println!("eps = {eps:<7} ||d psi/dz||_Gamma = {n:.4}");
        norms.push(n);
    }
    println!("log-log slope {:.3}", loglog_slope(&eps_list, &norms));
    Ok(())
}
