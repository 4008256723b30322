//! Noisy sensor observations over Gauss-Legendre nodes in z and the
//! operator-learning dataset built from them.

use semiclassical_control::data::{assemble_stochastic_dataset, generate_observations, place_sensors, potential_stochastic, ObservationSet};
use semiclassical_control::{gauss_legendre, GaussianPacket, SolveConfig, SpectralGrid};
use std::f64::consts::FRAC_PI_2;

fn main() -> semiclassical_control::Result<()> {
    let grid = SpectralGrid::new(-FRAC_PI_2, FRAC_PI_2, 256)?;
    let cfg = SolveConfig::new(0.1, 0.6, 200)?;
    let psi0 = GaussianPacket::default().field(grid, cfg.eps);
    let rule = gauss_legendre(8)?;
    let sensors = place_sensors(&grid, 50)?;
    let obs = generate_observations(&potential_stochastic, &psi0, &cfg, &rule, &sensors, 0.05, 42)?;

    for (z, row) in rule.nodes().iter().zip(&obs.per_z) {
        let peak = row.iter().map(|c| c.norm()).fold(0.0, f64::max);
        println!("z = {z:+.4}: max |psi_obs| = {peak:.4}");
    }

    let dir = tempfile_dir();
    obs.save(&dir, "observations")?;
    let back = ObservationSet::load(&dir, "observations")?;
    println!("round trip through {}: {}", dir.display(), if back == obs { "identical" } else { "CHANGED" });

    let ds = assemble_stochastic_dataset(&obs, 64, &potential_stochastic)?;
    println!("{} records, branch input length {}", ds.records.len(), ds.records[0].u.len());
    println!("boundary targets per node: {:?}", ds.targets.iter().map(|t| format!("{:.3}", t[0])).collect::<Vec<_>>());
    Ok(())
}

fn tempfile_dir() -> std::path::PathBuf {
    let d = std::env::temp_dir().join("sccontrol-synthetic-data");
    std::fs::create_dir_all(&d).expect("temp dir");
    d
}
