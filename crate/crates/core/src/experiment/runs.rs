use num_complex::Complex64;
use std::collections::BTreeMap;

use super::config::{ConvergencePotential, ExperimentConfig, Problem, RegularityPotential};
use super::{csv, Report};
use crate::data::{
    assemble_stochastic_dataset, generate_observations, noisy_sensor_values, pack_observations, place_sensors,
    potential_quadratic, potential_stochastic, terminal_fields, ObservationSet, NOISE_CONVENTION,
};
use crate::error::Result;
use crate::field::{PotentialField, WaveField};
use crate::grid::SpectralGrid;
use crate::nets::{init_params, NetSpec};
use crate::observables::{current_density, gamma_norm, l2_norm, position_density};
use crate::quadrature::gauss_legendre;
use crate::stats::{loglog_slope, median, relative_l2};
use crate::train::objective::{DeterministicProblem, Objective, StochasticProblem};
use crate::train::{history_csv, PosteriorBand, TrainOutcome, Trainer};
use crate::tssp::{convergence_study, fitted_order, mass_drift, tssp_trajectory, z_derivative_gamma_norm, SolveConfig};

/// Noise streams for held-out observations start here so they never
/// coincide with the per-node training streams.
const HELDOUT_STREAM: u64 = 1000;

fn rms(a: &[Complex64], b: &[Complex64]) -> f64 {
    (a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>() / a.len() as f64).sqrt()
}

fn at(field: &WaveField, idx: &[usize]) -> Vec<Complex64> {
    idx.iter().map(|&i| field.values()[i]).collect()
}

fn observation_files(report: &mut Report, obs: &ObservationSet) -> Result<()> {
    report.file("observations.json", obs.header_json()?);
    report.file("observations.csv", obs.body_csv());
    Ok(())
}

fn test1_observations(cfg: &ExperimentConfig, grid: SpectralGrid, psi0: &WaveField) -> Result<ObservationSet> {
    let sensors = place_sensors(&grid, cfg.sensors)?;
    let rule = gauss_legendre(1)?;
    generate_observations(&|x, _| potential_quadratic(x), psi0, &cfg.solve, &rule, &sensors, cfg.data_sigma(), cfg.seed)
}

fn test2_observations(cfg: &ExperimentConfig, grid: SpectralGrid, psi0: &WaveField) -> Result<ObservationSet> {
    let sensors = place_sensors(&grid, cfg.sensors)?;
    let rule = gauss_legendre(cfg.quadrature)?;
    generate_observations(&potential_stochastic, psi0, &cfg.solve, &rule, &sensors, cfg.sigma, cfg.seed)
}

/// Runs the trainer to completion, or to the first abort. The outcome so
/// far is returned either way.
fn train<O: Objective>(obj: &O, init: &crate::nets::NetParams, cfg: &crate::train::TrainConfig) -> Result<(TrainOutcome, Result<()>)> {
    let mut t = Trainer::new(obj, init, cfg)?;
    let status = t.run();
    Ok((t.outcome(), status))
}

fn training_files(report: &mut Report, out: &TrainOutcome) -> Result<()> {
    report.file("loss_history.csv", history_csv(&out.history));
    report.file("params.json", out.params.to_json()?);
    if !out.samples.is_empty() {
        report.file("samples.json", out.samples.to_json()?);
    }
    report.metric("iterations", out.history.len());
    report.metric("samples", out.samples.len());
    if let Some(last) = out.history.last() {
        report.metric("final_loss", last.loss);
        report.metric("final_misfit", last.misfit);
    }
    Ok(())
}

/// Forward solve of the configured potential from the configured packet.
pub fn run_solve(cfg: &ExperimentConfig, report: &mut Report) -> Result<()> {
    let grid = cfg.grid.build()?;
    let eps = cfg.solve.eps;
    let psi0 = cfg.initial.field(grid, eps);
    let potential = cfg.forward.potential_fn();
    let v = PotentialField::from_fn(grid, potential)?;
    let traj = tssp_trajectory(&psi0, &v, &cfg.solve)?;
    let end = traj.terminal();
    let x = grid.points();
    let n = position_density(end);
    let j = current_density(end, eps);
    report.file("potential.csv", csv("x,v", x.iter().zip(v.values()).map(|(&x, &v)| vec![x, v])));
    report.file(
        "terminal.csv",
        csv(
            "x,re,im,density,current",
            (0..grid.len()).map(|i| vec![x[i], end.values()[i].re, end.values()[i].im, n[i], j[i]]),
        ),
    );
    let m0 = l2_norm(&psi0);
    let m1 = l2_norm(end);
    report.metric("initial_norm", m0);
    report.metric("terminal_norm", m1);
    report.metric("norm_drift", mass_drift(&traj));
    report.metric("time_step", cfg.solve.k());
    Ok(())
}

/// Synthetic observations for the configured problem. Test II also emits
/// the operator-learning dataset.
pub fn generate_data(cfg: &ExperimentConfig, report: &mut Report) -> Result<()> {
    let grid = cfg.grid.build()?;
    let psi0 = cfg.initial.field(grid, cfg.solve.eps);
    if cfg.problem == Problem::Test2 {
        let obs = test2_observations(cfg, grid, &psi0)?;
        observation_files(report, &obs)?;
        let ds = assemble_stochastic_dataset(&obs, cfg.test2.m_eval.unwrap_or(grid.len()), &potential_stochastic)?;
        report.file("dataset.jsonl", ds.to_jsonl()?);
        report.metric("records", ds.records.len());
        report.metric("nodes", obs.per_z.len());
    } else {
        let obs = test1_observations(cfg, grid, &psi0)?;
        observation_files(report, &obs)?;
        report.metric("nodes", 1);
    }
    report.metric("sensors", cfg.sensors);
    report.metric("sigma", if cfg.problem == Problem::Test2 { cfg.sigma } else { cfg.data_sigma() });
    report.metric("noise", NOISE_CONVENTION);
    Ok(())
}

/// Deterministic potential recovery with an MLP surrogate.
pub fn run_test1(cfg: &ExperimentConfig, report: &mut Report) -> Result<()> {
    let grid = cfg.grid.build()?;
    let psi0 = cfg.initial.field(grid, cfg.solve.eps);
    let obs = test1_observations(cfg, grid, &psi0)?;
    observation_files(report, &obs)?;
    let spec = cfg.net.mlp_spec();
    let init = init_params(&NetSpec::Mlp(spec.clone()), cfg.seed)?;
    let tc = cfg.resolved_train();
    let problem = DeterministicProblem::new(spec, psi0.clone(), cfg.solve, obs.sensors.clone(), obs.per_z[0].clone(), tc.lambda_reg)?;
    let (out, status) = train(&problem, &init, &tc)?;
    training_files(report, &out)?;

    // point estimate: posterior mean for samplers, final weights otherwise
    let band = if out.samples.is_empty() { None } else { Some(out.samples.stats(|p| problem.potential(p))?) };
    let v_pred = match &band {
        Some(b) => b.mean.clone(),
        None => problem.potential(&out.params.flat),
    };
    let v_std = band.as_ref().map_or_else(|| vec![0.0; grid.len()], |b| b.std.clone());
    let x = grid.points();
    let v_true: Vec<f64> = x.iter().map(|&x| potential_quadratic(x)).collect();
    report.file(
        "potential.csv",
        csv("x,v_true,v_pred,v_std", (0..grid.len()).map(|i| vec![x[i], v_true[i], v_pred[i], v_std[i]])),
    );

    let prop = problem.propagator();
    let truth = prop.solve(&psi0, &v_true)?;
    let pred = prop.solve(&psi0, &v_pred)?;
    let (nt, np) = (position_density(&truth), position_density(&pred));
    report.file(
        "terminal.csv",
        csv(
            "x,re_true,im_true,re_pred,im_pred,n_true,n_pred",
            (0..grid.len()).map(|i| {
                let (t, p) = (truth.values()[i], pred.values()[i]);
                vec![x[i], t.re, t.im, p.re, p.im, nt[i], np[i]]
            }),
        ),
    );
    let at_sensors = at(&pred, &obs.sensors);
    report.metric("sensor_rms_misfit", rms(&at_sensors, &at(&truth, &obs.sensors)));
    report.metric("sensor_rms_vs_observations", rms(&at_sensors, &obs.per_z[0]));
    report.metric("potential_rel_l2", relative_l2(&v_pred, &v_true));
    if let Some(b) = &band {
        report.metric("median_std", median(&b.std));
        report.metric("mean_std", b.std.iter().sum::<f64>() / b.std.len() as f64);
    }
    report.metric("data_sigma", obs.sigma);
    report.metric("likelihood_sigma", tc.likelihood_sigma.unwrap_or(f64::NAN));
    status
}

/// Operator learning over `z`: a DeepONet maps sensor data to the potential.
pub fn run_test2(cfg: &ExperimentConfig, report: &mut Report) -> Result<()> {
    let grid = cfg.grid.build()?;
    let psi0 = cfg.initial.field(grid, cfg.solve.eps);
    let obs = test2_observations(cfg, grid, &psi0)?;
    observation_files(report, &obs)?;
    let ds = assemble_stochastic_dataset(&obs, cfg.test2.m_eval.unwrap_or(grid.len()), &potential_stochastic)?;
    report.file("dataset.jsonl", ds.to_jsonl()?);

    let spec = cfg.net.deeponet_spec(obs.sensors.len());
    let init = init_params(&NetSpec::DeepOnet(spec.clone()), cfg.seed)?;
    let tc = cfg.resolved_train();
    let problem = StochasticProblem::new(spec, psi0.clone(), &obs, &ds.targets, tc.lambda_reg, tc.weights)?;
    let (out, status) = train(&problem, &init, &tc)?;
    training_files(report, &out)?;

    let x = grid.points();
    let prop = problem.propagator();
    let truths = terminal_fields(&potential_stochastic, &psi0, &cfg.solve, obs.rule.nodes())?;
    let predict = |u: &[f64]| -> Result<(Vec<f64>, Option<PosteriorBand>)> {
        if out.samples.is_empty() {
            Ok((problem.potential(&out.params.flat, u), None))
        } else {
            let b = out.samples.stats(|p| problem.potential(p, u))?;
            Ok((b.mean.clone(), Some(b)))
        }
    };

    let mut node_rows = Vec::new();
    let mut terminal_rows = Vec::new();
    let mut mean_pred = vec![0.0; grid.len()];
    let mut mean_true = vec![0.0; grid.len()];
    let mut node_rms = Vec::new();
    for (k, (&z, w)) in obs.rule.nodes().iter().zip(obs.rule.weights()).enumerate() {
        let (v, band) = predict(&pack_observations(&obs.per_z[k]))?;
        for i in 0..grid.len() {
            let vt = potential_stochastic(x[i], z);
            mean_pred[i] += 0.5 * w * v[i];
            mean_true[i] += 0.5 * w * vt;
            if cfg.test2.display_nodes.contains(&k) {
                let s = band.as_ref().map_or(0.0, |b| b.std[i]);
                node_rows.push(vec![k as f64, z, x[i], vt, v[i], s]);
            }
        }
        let pred = prop.solve(&psi0, &v)?;
        let (nt, np) = (position_density(&truths[k]), position_density(&pred));
        for i in 0..grid.len() {
            terminal_rows.push(vec![k as f64, z, x[i], nt[i], np[i]]);
        }
        node_rms.push(rms(&at(&pred, &obs.sensors), &at(&truths[k], &obs.sensors)));
    }
    report.file("node_potentials.csv", csv("node,z,x,v_true,v_pred,v_std", node_rows));
    report.file("terminal_nodes.csv", csv("node,z,x,n_true,n_pred", terminal_rows));
    report.file(
        "mean_potential.csv",
        csv("x,mean_pred,mean_true", (0..grid.len()).map(|i| vec![x[i], mean_pred[i], mean_true[i]])),
    );
    report.metric("node_sensor_rms", node_rms.clone());
    report.metric("mean_potential_rel_l2", relative_l2(&mean_pred, &mean_true));

    // held-out z: fresh noisy data in, predicted potential out, then solve
    let heldout = terminal_fields(&potential_stochastic, &psi0, &cfg.solve, &cfg.test2.test_z)?;
    let mut rows = Vec::new();
    let mut vs_truth = BTreeMap::new();
    let mut vs_obs = BTreeMap::new();
    for (i, (&z, truth)) in cfg.test2.test_z.iter().zip(&heldout).enumerate() {
        let noisy = noisy_sensor_values(truth, &obs.sensors, cfg.sigma, cfg.seed, HELDOUT_STREAM + i as u64)?;
        let (v, band) = predict(&pack_observations(&noisy))?;
        let pred = prop.solve(&psi0, &v)?;
        let p = at(&pred, &obs.sensors);
        let r_truth = rms(&p, &at(truth, &obs.sensors));
        let r_obs = rms(&p, &noisy);
        vs_truth.insert(format!("{z}"), r_truth);
        vs_obs.insert(format!("{z}"), r_obs);
        for j in 0..grid.len() {
            let s = band.as_ref().map_or(0.0, |b| b.std[j]);
            rows.push(vec![z, x[j], potential_stochastic(x[j], z), v[j], s]);
        }
    }
    report.file("heldout_potentials.csv", csv("z,x,v_true,v_pred,v_std", rows));
    report.metric("heldout_sensor_rms", serde_json::to_value(&vs_truth)?);
    report.metric("heldout_sensor_rms_vs_observations", serde_json::to_value(&vs_obs)?);
    report.metric("data_sigma", cfg.sigma);
    report.metric("eval_points", ds.m_eval());
    status
}

/// Temporal self-convergence of the splitting.
pub fn run_convergence(cfg: &ExperimentConfig, report: &mut Report) -> Result<()> {
    let grid = cfg.grid.build()?;
    let eps = cfg.solve.eps;
    let (psi0, v) = match cfg.convergence.potential {
        ConvergencePotential::Harmonic => {
            (cfg.initial.field(grid, eps), PotentialField::from_fn(grid, potential_quadratic)?)
        }
        ConvergencePotential::ConstantPlaneWave => {
            let mu = 2.0 * std::f64::consts::PI / grid.length();
            let a = grid.a();
            (
                WaveField::from_fn(grid, |x| Complex64::from_polar(1.0, mu * (x - a))),
                PotentialField::constant(grid, cfg.forward.value)?,
            )
        }
    };
    let rows = convergence_study(&psi0, &v, eps, cfg.solve.t_final, &cfg.convergence.steps, cfg.convergence.refine)?;
    let mut text = String::from("k,steps,error,observed_order\n");
    for r in &rows {
        let order = r.observed_order.map_or(String::new(), |o| format!("{o:e}"));
        text.push_str(&format!("{:e},{},{:e},{}\n", r.k, r.steps, r.error, order));
    }
    report.file("convergence.csv", text);
    let pairwise: Vec<f64> = rows.iter().filter_map(|r| r.observed_order).collect();
    report.metric("fitted_order", fitted_order(&rows));
    report.metric("pairwise_orders", pairwise);
    report.metric("max_error", rows.iter().map(|r| r.error).fold(0.0, f64::max));
    Ok(())
}

/// Growth of the `z`-derivative of the terminal field as `eps` shrinks.
pub fn run_regularity(cfg: &ExperimentConfig, report: &mut Report) -> Result<()> {
    let grid = cfg.grid.build()?;
    let rule = gauss_legendre(cfg.quadrature)?;
    let reg = &cfg.regularity;
    let potential: &(dyn Fn(f64, f64) -> f64 + Sync) = match reg.potential {
        RegularityPotential::Stochastic => &potential_stochastic,
        RegularityPotential::Flat => &|x, _| potential_quadratic(x),
    };
    let mut dz_norms = Vec::new();
    let mut psi_norms = Vec::new();
    for &eps in &reg.eps_list {
        let solve = SolveConfig { eps, ..cfg.solve };
        let psi0 = reg.initial.field(grid, eps);
        dz_norms.push(z_derivative_gamma_norm(&psi0, potential, &rule, reg.dz, &solve)?);
        let fields = terminal_fields(potential, &psi0, &solve, rule.nodes())?;
        psi_norms.push(gamma_norm(&fields, &rule)?);
    }
    // a potential without z-dependence gives exact zeros and no slope
    let degenerate = dz_norms.iter().any(|n| !(*n > 1e-12));
    let slope = if degenerate { None } else { Some(loglog_slope(&reg.eps_list, &dz_norms)) };
    let slope_text = slope.map_or("undefined".to_string(), |s| format!("{s:e}"));
    let mut text = String::from("eps,gamma_norm_dz,gamma_norm_psi,fitted_slope\n");
    for i in 0..reg.eps_list.len() {
        text.push_str(&format!("{:e},{:e},{:e},{}\n", reg.eps_list[i], dz_norms[i], psi_norms[i], slope_text));
    }
    report.file("regularity.csv", text);
    report.metric("slope", slope.map_or(serde_json::Value::String("undefined".into()), serde_json::Value::from));
    report.metric("gamma_norm_dz", dz_norms);
    report.metric("gamma_norm_psi", psi_norms);
    Ok(())
}
