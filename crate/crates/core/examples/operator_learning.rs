//! Scaled stochastic-potential run through the experiment driver: a
//! DeepONet learns z -> V(., z) from noisy sensor data at 8 Legendre nodes
//! and is then queried at unseen z. Writes a run directory under
//! `target/example-runs`.

use semiclassical_control::experiment::{execute, resolve_config, Verb};

fn main() -> semiclassical_control::Result<()> {
    let base = include_str!("../configs/test2.json");
    let epochs = std::env::args().nth(1).unwrap_or_else(|| "300".into());
    let overrides = [format!("train.epochs={epochs}"), "train.burn_in=1200".into()];
    let cfg = resolve_config(Some(base), &overrides, None)?;
    let (report, status) = execute(Verb::Train, &cfg);
    let dir = report.write(std::path::Path::new("target/example-runs"))?;
    status?;
    println!("artifacts in {}", dir.display());
    println!("{}", report.metrics_json()?);
    Ok(())
}
