//! First-order temporal convergence of the Lie splitting, and exactness on
//! plane waves in a constant potential.

use num_complex::Complex64;
use semiclassical_control::tssp::{convergence_study, fitted_order};
use semiclassical_control::{GaussianPacket, PotentialField, SpectralGrid, WaveField};
use std::f64::consts::{FRAC_PI_2, PI};

fn main() -> semiclassical_control::Result<()> {
    let grid = SpectralGrid::new(-FRAC_PI_2, FRAC_PI_2, 256)?;
    let eps = 0.1;
    let steps = [50, 100, 200, 400, 800];

    let psi0 = GaussianPacket::default().field(grid, eps);
    let v = PotentialField::from_fn(grid, |x| x * x)?;
    let rows = convergence_study(&psi0, &v, eps, 0.6, &steps, 8)?;
    println!("harmonic potential");
    for r in &rows {
        let order = r.observed_order.map_or("-".to_string(), |o| format!("{o:.3}"));
        println!("  k = {:.2e}  error = {:.3e}  order = {order}", r.k, r.error);
    }
    println!("  fitted order {:.3}", fitted_order(&rows));

    let mu = 2.0 * PI / grid.length();
    let wave = WaveField::from_fn(grid, |x| Complex64::from_polar(1.0, 3.0 * mu * (x - grid.a())));
    let flat = PotentialField::constant(grid, 0.4)?;
    let rows = convergence_study(&wave, &flat, eps, 0.6, &steps, 8)?;
    let worst = rows.iter().map(|r| r.error).fold(0.0, f64::max);
    println!("plane wave, constant potential: largest error {worst:.2e}");
    Ok(())
}
