//! Training objectives: potential surrogate -> TSSP solve -> sensor misfit,
//! with gradients chained from the discrete adjoint through the surrogate.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{pack_observations, ObservationSet};
use crate::error::{Error, Result};
use crate::field::WaveField;
use crate::nets::{NetParams, NetSpec, Surrogate};
use crate::tssp::{Propagator, SensorObservation, SolveConfig};

/// Surrogate evaluations are split into fixed-size chunks so the parallel
/// reduction order never depends on the thread count.
const CHUNK: usize = 32;

/// Loss value with its parts and the parameter gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub loss: f64,
    pub misfit: f64,
    pub bc: f64,
    pub reg: f64,
    pub grad: Vec<f64>,
}

impl Evaluation {
    fn zeros(n: usize) -> Self {
        Self { loss: 0.0, misfit: 0.0, bc: 0.0, reg: 0.0, grad: vec![0.0; n] }
    }

    fn add_scaled(&mut self, other: &Evaluation, c: f64) {
        self.loss += c * other.loss;
        self.misfit += c * other.misfit;
        self.bc += c * other.bc;
        self.reg += c * other.reg;
        for (g, o) in self.grad.iter_mut().zip(&other.grad) {
            *g += c * o;
        }
    }
}

/// A loss that decomposes over `num_items` data items.
pub trait Objective: Sync {
    fn num_params(&self) -> usize;
    fn num_items(&self) -> usize;
    /// Loss over `batch` rescaled by `num_items / batch.len()`, i.e. an
    /// unbiased estimate of the full-data loss.
    fn evaluate(&self, params: &[f64], batch: &[usize]) -> Result<Evaluation>;
}

pub fn eval_surrogate<S: Surrogate + ?Sized>(s: &S, params: &[f64], u: &[f64], ys: &[f64]) -> Vec<f64> {
    ys.par_chunks(CHUNK).flat_map_iter(|c| s.eval(params, u, c)).collect()
}

/// Chunked forward pass whose tapes feed [`reverse_chunks`].
pub fn forward_chunks<S: Surrogate + ?Sized>(s: &S, params: &[f64], u: &[f64], ys: &[f64]) -> (Vec<f64>, Vec<S::Tape>) {
    let parts: Vec<(Vec<f64>, S::Tape)> = ys.par_chunks(CHUNK).map(|c| s.forward(params, u, c)).collect();
    let mut out = Vec::with_capacity(ys.len());
    let mut tapes = Vec::with_capacity(parts.len());
    for (v, t) in parts {
        out.extend(v);
        tapes.push(t);
    }
    (out, tapes)
}

/// Parameter gradient of `upstream . outputs`, reduced in chunk order.
pub fn reverse_chunks<S: Surrogate + ?Sized>(s: &S, params: &[f64], tapes: &[S::Tape], upstream: &[f64]) -> Vec<f64> {
    let parts: Vec<Vec<f64>> = tapes
        .par_iter()
        .zip(upstream.par_chunks(CHUNK))
        .map(|(t, up)| {
            let mut g = vec![0.0; s.num_params()];
            s.reverse(params, t, up, &mut g);
            g
        })
        .collect();
    let mut grad = vec![0.0; s.num_params()];
    for p in &parts {
        for (g, v) in grad.iter_mut().zip(p) {
            *g += v;
        }
    }
    grad
}

pub fn pullback_surrogate<S: Surrogate + ?Sized>(s: &S, params: &[f64], u: &[f64], ys: &[f64], upstream: &[f64]) -> Vec<f64> {
    let (_, tapes) = forward_chunks(s, params, u, ys);
    reverse_chunks(s, params, &tapes, upstream)
}

fn check_len(params: &[f64], n: usize) -> Result<()> {
    if params.len() != n {
        return Err(Error::invalid(format!("expected {n} parameters, got {}", params.len())));
    }
    Ok(())
}

/// Single deterministic record: `misfit + lambda h sum V^2` with `V` the
/// surrogate sampled on the grid.
pub struct DeterministicProblem<S> {
    pub surrogate: S,
    prop: Propagator,
    psi0: WaveField,
    sensors: Vec<usize>,
    observed: Vec<Complex64>,
    points: Vec<f64>,
    pub lambda_reg: f64,
}

impl<S: Surrogate> DeterministicProblem<S> {
    pub fn new(
        surrogate: S,
        psi0: WaveField,
        cfg: SolveConfig,
        sensors: Vec<usize>,
        observed: Vec<Complex64>,
        lambda_reg: f64,
    ) -> Result<Self> {
        let grid = *psi0.grid();
        if sensors.len() != observed.len() {
            return Err(Error::invalid("sensor and observation counts differ"));
        }
        Ok(Self { surrogate, prop: Propagator::new(grid, cfg)?, psi0, points: grid.points(), sensors, observed, lambda_reg })
    }

    pub fn potential(&self, params: &[f64]) -> Vec<f64> {
        eval_surrogate(&self.surrogate, params, &[], &self.points)
    }

    pub fn propagator(&self) -> &Propagator {
        &self.prop
    }
}

impl<S: Surrogate> Objective for DeterministicProblem<S> {
    fn num_params(&self) -> usize {
        self.surrogate.num_params()
    }

    fn num_items(&self) -> usize {
        1
    }

    fn evaluate(&self, params: &[f64], batch: &[usize]) -> Result<Evaluation> {
        check_len(params, self.num_params())?;
        if batch.is_empty() {
            return Err(Error::invalid("empty batch"));
        }
        let (v, tapes) = forward_chunks(&self.surrogate, params, &[], &self.points);
        let obs = SensorObservation { indices: &self.sensors, values: &self.observed };
        let adj = self.prop.loss_and_gradient(&self.psi0, &v, &obs, self.lambda_reg)?;
        let grad = reverse_chunks(&self.surrogate, params, &tapes, &adj.grad);
        // repeated draws of the single record average to itself
        Ok(Evaluation { loss: adj.loss, misfit: adj.misfit, bc: 0.0, reg: adj.regularization, grad })
    }
}

/// `loss(params)` and its gradient for an MLP against the first record of
/// `obs`, solved from `psi0` with `cfg`.
pub fn loss_deterministic(
    params: &NetParams,
    obs: &ObservationSet,
    psi0: &WaveField,
    cfg: &SolveConfig,
    lambda_reg: f64,
) -> Result<Evaluation> {
    let NetSpec::Mlp(spec) = &params.spec else {
        return Err(Error::invalid("deterministic loss needs an MLP surrogate"));
    };
    if obs.per_z.len() != 1 {
        return Err(Error::invalid("deterministic loss needs exactly one observation record"));
    }
    if psi0.grid() != &obs.grid {
        return Err(Error::invalid("initial field and observations use different grids"));
    }
    let p = DeterministicProblem::new(spec.clone(), psi0.clone(), *cfg, obs.sensors.clone(), obs.per_z[0].clone(), lambda_reg)?;
    p.evaluate(&params.flat, &[0])
}

/// Weights of the misfit, boundary and regularization parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossWeights {
    pub misfit: f64,
    pub boundary: f64,
    pub regularization: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self { misfit: 1.0, boundary: 1.0, regularization: 1e-4 }
    }
}

#[derive(Debug, Clone)]
struct NodeData {
    u: Vec<f64>,
    observed: Vec<Complex64>,
    boundary: [f64; 2],
}

/// Three-part loss over quadrature nodes. Each item is one node; the
/// surrogate is evaluated on every grid point plus both domain ends.
pub struct StochasticProblem<S> {
    pub surrogate: S,
    prop: Propagator,
    psi0: WaveField,
    sensors: Vec<usize>,
    nodes: Vec<NodeData>,
    /// Grid points followed by `a` and `b`.
    points: Vec<f64>,
    pub lambda_reg: f64,
    pub weights: LossWeights,
}

impl<S: Surrogate> StochasticProblem<S> {
    pub fn new(
        surrogate: S,
        psi0: WaveField,
        obs: &ObservationSet,
        boundary: &[[f64; 2]],
        lambda_reg: f64,
        weights: LossWeights,
    ) -> Result<Self> {
        let grid = *psi0.grid();
        if grid != obs.grid {
            return Err(Error::invalid("initial field and observations use different grids"));
        }
        if boundary.len() != obs.per_z.len() {
            return Err(Error::invalid("one boundary pair per node is required"));
        }
        let nodes = obs
            .per_z
            .iter()
            .zip(boundary)
            .map(|(row, &b)| NodeData { u: pack_observations(row), observed: row.clone(), boundary: b })
            .collect();
        let mut points = grid.points();
        points.extend([grid.a(), grid.b()]);
        Ok(Self {
            surrogate,
            prop: Propagator::new(grid, obs.solve_meta)?,
            psi0,
            sensors: obs.sensors.clone(),
            nodes,
            points,
            lambda_reg,
            weights,
        })
    }

    pub fn propagator(&self) -> &Propagator {
        &self.prop
    }

    /// Predicted potential on the grid for packed observations `u`.
    pub fn potential(&self, params: &[f64], u: &[f64]) -> Vec<f64> {
        let m = self.prop.grid().len();
        eval_surrogate(&self.surrogate, params, u, &self.points[..m])
    }

    fn node_eval(&self, params: &[f64], node: &NodeData) -> Result<Evaluation> {
        let m = self.prop.grid().len();
        let w = self.weights;
        let (out, tape) = self.surrogate.forward(params, &node.u, &self.points);
        let (v, ends) = out.split_at(m);
        let obs = SensorObservation { indices: &self.sensors, values: &node.observed };
        let adj = self.prop.loss_and_gradient(&self.psi0, v, &obs, self.lambda_reg)?;

        // adj.grad = d misfit/dV + d reg/dV; reweight the two parts
        let h = self.prop.grid().h();
        let mut upstream = Vec::with_capacity(m + 2);
        for (g, vj) in adj.grad.iter().zip(v) {
            let dreg = 2.0 * self.lambda_reg * h * vj;
            upstream.push(w.misfit * (g - dreg) + w.regularization * dreg);
        }
        let dl = ends[0] - node.boundary[0];
        let dr = ends[1] - node.boundary[1];
        upstream.push(w.boundary * 2.0 * dl);
        upstream.push(w.boundary * 2.0 * dr);
        let bc = dl * dl + dr * dr;

        let mut grad = vec![0.0; self.surrogate.num_params()];
        self.surrogate.reverse(params, &tape, &upstream, &mut grad);
        Ok(Evaluation {
            loss: w.misfit * adj.misfit + w.boundary * bc + w.regularization * adj.regularization,
            misfit: adj.misfit,
            bc,
            reg: adj.regularization,
            grad,
        })
    }
}

impl<S: Surrogate> Objective for StochasticProblem<S> {
    fn num_params(&self) -> usize {
        self.surrogate.num_params()
    }

    fn num_items(&self) -> usize {
        self.nodes.len()
    }

    fn evaluate(&self, params: &[f64], batch: &[usize]) -> Result<Evaluation> {
        check_len(params, self.num_params())?;
        if batch.is_empty() {
            return Err(Error::invalid("empty batch"));
        }
        if let Some(&k) = batch.iter().find(|&&k| k >= self.nodes.len()) {
            return Err(Error::invalid(format!("batch item {k} out of range")));
        }
        let parts: Vec<Evaluation> = batch
            .par_iter()
            .map(|&k| self.node_eval(params, &self.nodes[k]))
            .collect::<Result<_>>()?;
        let scale = self.nodes.len() as f64 / batch.len() as f64;
        let mut total = Evaluation::zeros(self.num_params());
        for p in &parts {
            total.add_scaled(p, scale);
        }
        Ok(total)
    }
}

/// Three-part loss for a DeepONet over `batch` node indices.
pub fn loss_stochastic(
    params: &NetParams,
    batch: &[usize],
    obs: &ObservationSet,
    psi0: &WaveField,
    boundary: &[[f64; 2]],
    lambda_reg: f64,
    weights: LossWeights,
) -> Result<Evaluation> {
    let NetSpec::DeepOnet(spec) = &params.spec else {
        return Err(Error::invalid("stochastic loss needs a DeepONet surrogate"));
    };
    let p = StochasticProblem::new(spec.clone(), psi0.clone(), obs, boundary, lambda_reg, weights)?;
    p.evaluate(&params.flat, batch)
}
