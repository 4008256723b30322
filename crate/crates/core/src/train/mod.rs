//! Training loop, samplers and posterior summaries.
//!
//! The loop minimizes a loss `L(theta)` (SGD) or samples
//! `p(theta | data) ~ exp(-L / (2 sigma^2)) N(theta; 0, prior_std^2)` with
//! (preconditioned) Langevin dynamics.

pub mod objective;
pub mod samplers;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::nets::NetParams;

pub use objective::{
    loss_deterministic, loss_stochastic, DeterministicProblem, Evaluation, LossWeights, Objective, StochasticProblem,
};
pub use samplers::{log_posterior_gradient, preconditioner, psgld_step, sgd_step, sgld_step};

const BATCH_STREAM: u64 = 1;
const NOISE_STREAM: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    #[default]
    Sgd,
    Sgld,
    Psgld,
}

impl Optimizer {
    pub fn samples(self) -> bool {
        !matches!(self, Optimizer::Sgd)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub optimizer: Optimizer,
    /// Initial step size; `eta_k = eta0 / (1 + decay k)`.
    pub eta0: f64,
    pub decay: f64,
    /// Inverse temperature of the Langevin noise.
    pub tau: f64,
    /// Weight of `h sum V^2` in the loss.
    pub lambda_reg: f64,
    /// Preconditioner floor.
    pub lambda_pre: f64,
    /// Moving-average weight of squared gradients.
    pub omega: f64,
    pub prior_std: f64,
    /// Likelihood noise level; `None` ties it to the data noise.
    pub likelihood_sigma: Option<f64>,
    pub batch_size: usize,
    pub epochs: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    pub weights: LossWeights,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            optimizer: Optimizer::Sgd,
            eta0: 1e-3,
            decay: 1e-4,
            tau: 1.0,
            lambda_reg: 1e-4,
            lambda_pre: 1e-5,
            omega: 0.01,
            prior_std: 1.0,
            likelihood_sigma: None,
            batch_size: 1,
            epochs: 2000,
            burn_in: 1000,
            thin: 10,
            seed: 0,
            weights: LossWeights::default(),
        }
    }
}

impl TrainConfig {
    pub fn eta(&self, k: usize) -> f64 {
        self.eta0 / (1.0 + self.decay * k as f64)
    }

    pub fn iters_per_epoch(&self, items: usize) -> usize {
        items.div_ceil(self.batch_size)
    }

    pub fn total_iters(&self, items: usize) -> usize {
        self.epochs * self.iters_per_epoch(items)
    }

    pub fn validate(&self, items: usize) -> Result<()> {
        let bad = |m: &str| Err(Error::invalid(m.to_string()));
        if !(self.eta0 > 0.0) || !(self.decay >= 0.0) {
            return bad("need eta0 > 0 and decay >= 0");
        }
        if !(self.tau > 0.0) || !(self.lambda_pre > 0.0) || !(self.prior_std > 0.0) {
            return bad("tau, lambda_pre and prior_std must be positive");
        }
        if !(self.omega > 0.0 && self.omega < 1.0) {
            return bad("omega must lie in (0, 1)");
        }
        if !(self.lambda_reg >= 0.0) {
            return bad("lambda_reg must be nonnegative");
        }
        if matches!(self.likelihood_sigma, Some(s) if !(s > 0.0)) {
            return bad("likelihood_sigma must be positive");
        }
        if self.batch_size == 0 || self.batch_size > items {
            return Err(Error::invalid(format!("batch size must lie in 1..={items}")));
        }
        if self.thin == 0 {
            return bad("thin must be positive");
        }
        if self.optimizer.samples() {
            if self.likelihood_sigma.is_none() {
                return bad("Langevin samplers need a likelihood sigma");
            }
            let total = self.total_iters(items);
            if total > 0 && self.burn_in >= total {
                return Err(Error::invalid(format!("burn_in {} must be below the {total} iterations", self.burn_in)));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistoryRow {
    pub iter: usize,
    pub epoch: usize,
    pub loss: f64,
    pub misfit: f64,
    pub bc: f64,
    pub reg: f64,
    pub eta: f64,
}

pub fn history_csv(rows: &[HistoryRow]) -> String {
    let mut out = String::from("iter,epoch,loss,misfit,bc,reg,eta\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            r.iter, r.epoch, r.loss, r.misfit, r.bc, r.reg, r.eta
        );
    }
    out
}

/// Thinned parameter vectors collected after burn-in.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSamples {
    pub template: NetParams,
    pub stride: usize,
    pub vectors: Vec<Vec<f64>>,
}

impl PosteriorSamples {
    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// JSON array of parameter objects.
    pub fn to_json(&self) -> Result<String> {
        let all: Vec<NetParams> = self
            .vectors
            .iter()
            .map(|v| self.template.with_flat(v.clone()))
            .collect::<Result<_>>()?;
        Ok(serde_json::to_string(&all)?)
    }

    pub fn stats(&self, eval: impl Fn(&[f64]) -> Vec<f64>) -> Result<PosteriorBand> {
        posterior_stats(&self.vectors, eval)
    }
}

/// Pointwise mean and population standard deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorBand {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

pub fn posterior_stats(samples: &[Vec<f64>], eval: impl Fn(&[f64]) -> Vec<f64>) -> Result<PosteriorBand> {
    let Some(first) = samples.first() else {
        return Err(Error::invalid("no posterior samples"));
    };
    let outputs: Vec<Vec<f64>> = std::iter::once(eval(first)).chain(samples[1..].iter().map(|s| eval(s))).collect();
    let n = outputs[0].len();
    let count = outputs.len() as f64;
    let mut mean = vec![0.0; n];
    for o in &outputs {
        for (m, v) in mean.iter_mut().zip(o) {
            *m += v / count;
        }
    }
    let mut var = vec![0.0; n];
    for o in &outputs {
        for ((s, v), m) in var.iter_mut().zip(o).zip(&mean) {
            *s += (v - m) * (v - m) / count;
        }
    }
    Ok(PosteriorBand { mean, std: var.into_iter().map(f64::sqrt).collect() })
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: NetParams,
    pub samples: PosteriorSamples,
    pub history: Vec<HistoryRow>,
}

/// Stateful training loop. Keeps its progress when a step aborts so callers
/// can still flush partial results.
pub struct Trainer<'a, O: Objective> {
    objective: &'a O,
    cfg: TrainConfig,
    template: NetParams,
    theta: Vec<f64>,
    precond: Vec<f64>,
    batch_rng: ChaCha8Rng,
    noise_rng: ChaCha8Rng,
    iter: usize,
    history: Vec<HistoryRow>,
    samples: Vec<Vec<f64>>,
}

impl<'a, O: Objective> Trainer<'a, O> {
    pub fn new(objective: &'a O, init: &NetParams, cfg: &TrainConfig) -> Result<Self> {
        cfg.validate(objective.num_items())?;
        if init.flat.len() != objective.num_params() {
            return Err(Error::invalid("initial parameters do not fit the objective"));
        }
        let stream = |s| {
            let mut r = ChaCha8Rng::seed_from_u64(cfg.seed);
            r.set_stream(s);
            r
        };
        Ok(Self {
            objective,
            cfg: cfg.clone(),
            template: init.clone(),
            theta: init.flat.clone(),
            precond: vec![0.0; init.flat.len()],
            batch_rng: stream(BATCH_STREAM),
            noise_rng: stream(NOISE_STREAM),
            iter: 0,
            history: Vec::new(),
            samples: Vec::new(),
        })
    }

    pub fn iteration(&self) -> usize {
        self.iter
    }

    fn abort(&self, detail: impl Into<String>) -> Error {
        Error::NumericalAbort { iteration: self.iter, detail: detail.into() }
    }

    fn step(&mut self, epoch: usize, batch: &[usize]) -> Result<()> {
        let e = self.objective.evaluate(&self.theta, batch)?;
        if !e.loss.is_finite() {
            return Err(self.abort(format!("loss is {}", e.loss)));
        }
        if e.grad.iter().any(|g| !g.is_finite()) {
            return Err(self.abort("non-finite gradient"));
        }
        let eta = self.cfg.eta(self.iter);
        self.history.push(HistoryRow { iter: self.iter, epoch, loss: e.loss, misfit: e.misfit, bc: e.bc, reg: e.reg, eta });

        let c = &self.cfg;
        match c.optimizer {
            Optimizer::Sgd => sgd_step(&mut self.theta, &e.grad, eta),
            opt => {
                let sigma = c.likelihood_sigma.expect("validated");
                let g = log_posterior_gradient(&self.theta, &e.grad, c.prior_std, sigma);
                if opt == Optimizer::Sgld {
                    sgld_step(&mut self.theta, &g, eta, c.tau, &mut self.noise_rng)?;
                } else {
                    psgld_step(&mut self.theta, &g, &mut self.precond, eta, c.tau, c.lambda_pre, c.omega, &mut self.noise_rng)?;
                }
            }
        }
        if self.theta.iter().any(|t| !t.is_finite()) {
            return Err(self.abort("parameters diverged"));
        }
        self.iter += 1;
        if c.optimizer.samples() && self.iter > c.burn_in && (self.iter - c.burn_in) % c.thin == 0 {
            self.samples.push(self.theta.clone());
        }
        Ok(())
    }

    /// Runs all remaining epochs.
    pub fn run(&mut self) -> Result<()> {
        let items = self.objective.num_items();
        let per_epoch = self.cfg.iters_per_epoch(items);
        let mut order: Vec<usize> = (0..items).collect();
        while self.iter < self.cfg.total_iters(items) {
            let epoch = self.iter / per_epoch;
            order.shuffle(&mut self.batch_rng);
            for chunk in order.clone().chunks(self.cfg.batch_size) {
                self.step(epoch, chunk)?;
            }
        }
        Ok(())
    }

    /// Current state; partial if `run` aborted.
    pub fn outcome(&self) -> TrainOutcome {
        TrainOutcome {
            params: NetParams { flat: self.theta.clone(), ..self.template.clone() },
            samples: PosteriorSamples { template: self.template.clone(), stride: self.cfg.thin, vectors: self.samples.clone() },
            history: self.history.clone(),
        }
    }
}

pub fn run_training<O: Objective>(objective: &O, init: &NetParams, cfg: &TrainConfig) -> Result<TrainOutcome> {
    let mut t = Trainer::new(objective, init, cfg)?;
    t.run()?;
    Ok(t.outcome())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nets::{init_params, Activation, MlpSpec, NetSpec};

    /// `L = sum_i c_i (theta_i - 1)^2`, one item per coordinate group.
    struct Quadratic {
        n: usize,
    }

    impl Objective for Quadratic {
        fn num_params(&self) -> usize {
            self.n
        }
        fn num_items(&self) -> usize {
            2
        }
        fn evaluate(&self, p: &[f64], batch: &[usize]) -> Result<Evaluation> {
            let loss = p.iter().map(|t| (t - 1.0).powi(2)).sum::<f64>();
            let grad = p.iter().map(|t| 2.0 * (t - 1.0)).collect();
            let _ = batch;
            Ok(Evaluation { loss, misfit: loss, bc: 0.0, reg: 0.0, grad })
        }
    }

    fn init(n: usize) -> NetParams {
        // [1, w, 1] has 3w + 1 entries; the objectives here ignore the spec
        let spec = NetSpec::Mlp(MlpSpec::new(&[(n - 1) / 3], Activation::Tanh));
        let mut p = init_params(&spec, 0).unwrap();
        p.flat.iter_mut().for_each(|t| *t = 0.0);
        p
    }

    #[test]
    fn sgd_converges_on_quadratic() {
        let p = init(10);
        assert_eq!(p.flat.len(), 10);
        let obj = Quadratic { n: p.flat.len() };
        let cfg = TrainConfig { eta0: 0.1, decay: 0.0, epochs: 100, ..Default::default() };
        let out = run_training(&obj, &p, &cfg).unwrap();
        assert!(out.params.flat.iter().all(|t| (t - 1.0).abs() < 1e-6));
        assert_eq!(out.history.len(), 200);
        assert!(out.samples.is_empty());
        assert!(out.history.windows(2).all(|w| w[1].loss <= w[0].loss));
    }

    #[test]
    fn zero_epochs_returns_initial_params() {
        let p = init(10);
        let obj = Quadratic { n: p.flat.len() };
        let cfg = TrainConfig { epochs: 0, ..Default::default() };
        assert_eq!(run_training(&obj, &p, &cfg).unwrap().params, p);
    }

    #[test]
    fn sample_count_and_determinism() {
        let p = init(10);
        let obj = Quadratic { n: p.flat.len() };
        let cfg = TrainConfig {
            optimizer: Optimizer::Psgld,
            likelihood_sigma: Some(0.5),
            epochs: 50,
            burn_in: 13,
            thin: 4,
            seed: 9,
            lambda_pre: 1.0,
            ..Default::default()
        };
        let a = run_training(&obj, &p, &cfg).unwrap();
        assert_eq!(a.samples.len(), (100 - 13) / 4);
        let b = run_training(&obj, &p, &cfg).unwrap();
        assert_eq!(a.params, b.params);
        assert_eq!(a.samples, b.samples);
        assert_eq!(history_csv(&a.history), history_csv(&b.history));
        let parsed: Vec<NetParams> = serde_json::from_str(&a.samples.to_json().unwrap()).unwrap();
        assert_eq!(parsed.len(), a.samples.len());
    }

    #[test]
    fn non_finite_loss_aborts_with_iteration() {
        struct Blowup(usize);
        impl Objective for Blowup {
            fn num_params(&self) -> usize {
                self.0
            }
            fn num_items(&self) -> usize {
                1
            }
            fn evaluate(&self, p: &[f64], _: &[usize]) -> Result<Evaluation> {
                let loss = if p[0] > 2.5 { f64::NAN } else { p[0] };
                Ok(Evaluation { loss, misfit: loss, bc: 0.0, reg: 0.0, grad: vec![-1.0; self.0] })
            }
        }
        let p = init(10);
        let cfg = TrainConfig { eta0: 1.0, decay: 0.0, epochs: 10, ..Default::default() };
        let obj = Blowup(p.flat.len());
        let mut t = Trainer::new(&obj, &p, &cfg).unwrap();
        match t.run() {
            Err(Error::NumericalAbort { iteration, .. }) => assert_eq!(iteration, 3),
            other => panic!("{other:?}"),
        }
        assert_eq!(t.outcome().history.len(), 3);
    }

    #[test]
    fn config_validation() {
        let base = TrainConfig::default();
        assert!(base.validate(1).is_ok());
        assert!(TrainConfig { batch_size: 3, ..base.clone() }.validate(2).is_err());
        assert!(TrainConfig { optimizer: Optimizer::Sgld, ..base.clone() }.validate(1).is_err());
        let sgld = TrainConfig { optimizer: Optimizer::Sgld, likelihood_sigma: Some(0.1), ..base.clone() };
        assert!(sgld.validate(1).is_ok());
        assert!(TrainConfig { burn_in: 2000, ..sgld }.validate(1).is_err());
        let json = serde_json::to_string(&base).unwrap();
        assert_eq!(serde_json::from_str::<TrainConfig>(&json).unwrap(), base);
    }

    #[test]
    fn posterior_stats_cases() {
        let id = |p: &[f64]| p.to_vec();
        let one = posterior_stats(&[vec![1.0, 2.0]], id).unwrap();
        assert_eq!(one.std, vec![0.0, 0.0]);
        let two = posterior_stats(&[vec![3.0, -1.0], vec![-3.0, 1.0]], id).unwrap();
        assert_eq!(two.mean, vec![0.0, 0.0]);
        assert_eq!(two.std, vec![3.0, 1.0]);
        let s = vec![vec![0.5, 1.0], vec![1.5, 0.0], vec![2.0, 2.0]];
        let mut dup = s.clone();
        dup.extend(s.clone());
        let (a, b) = (posterior_stats(&s, id).unwrap(), posterior_stats(&dup, id).unwrap());
        for (x, y) in a.std.iter().zip(&b.std).chain(a.mean.iter().zip(&b.mean)) {
            assert!((x - y).abs() < 1e-15);
        }
        assert!(posterior_stats(&[], id).is_err());
    }
}
