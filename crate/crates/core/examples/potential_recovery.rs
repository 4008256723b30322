//! Recover V(x) = x^2 from terminal sensor data with an MLP surrogate
//! trained by SGD through the solver adjoint. Pass an iteration count to
//! train longer (default 20000).

use semiclassical_control::data::{generate_observations, place_sensors, potential_quadratic};
use semiclassical_control::nets::{init_params, Activation, MlpSpec, NetSpec};
use semiclassical_control::train::{run_training, DeterministicProblem, TrainConfig};
use semiclassical_control::{gauss_legendre, GaussianPacket, SolveConfig, SpectralGrid};
use std::f64::consts::FRAC_PI_2;

fn main() -> semiclassical_control::Result<()> {
    let iters: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(20000);
    let grid = SpectralGrid::new(-FRAC_PI_2, FRAC_PI_2, 256)?;
    let cfg = SolveConfig::new(0.1, 0.6, 200)?;
    let psi0 = GaussianPacket::default().field(grid, cfg.eps);
    let sensors = place_sensors(&grid, 50)?;
    let obs = generate_observations(&|x, _| potential_quadratic(x), &psi0, &cfg, &gauss_legendre(1)?, &sensors, 0.0, 0)?;

    let spec = MlpSpec::new(&[20], Activation::Tanh);
    let init = init_params(&NetSpec::Mlp(spec.clone()), 0)?;
    let problem = DeterministicProblem::new(spec, psi0, cfg, sensors, obs.per_z[0].clone(), 1e-4)?;
    let tc = TrainConfig { epochs: iters, ..TrainConfig::default() };
    let out = run_training(&problem, &init, &tc)?;

    for row in out.history.iter().step_by((iters / 8).max(1)) {
        println!("iter {:>6}  loss {:.4e}", row.iter, row.loss);
    }
    let rms = (out.history.last().map_or(f64::NAN, |r| r.misfit) / 50.0).sqrt();
    println!("sensor RMS misfit before the last step: {rms:.3e}");

    // the terminal data fix V only up to 2 pi eps / T where the packet lives
    let v = problem.potential(&out.params.flat);
    for j in (64..=192).step_by(16) {
        let x = grid.x(j);
        println!("x = {x:+.3}  V = {:+.4}  x^2 = {:.4}", v[j], x * x);
    }
    Ok(())
}
