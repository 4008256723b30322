//! Neural potential surrogates: a plain MLP `x -> V(x)` and an unstacked
//! DeepONet `(u, y) -> sum_k b_k(u) t_k(y)`.
//!
//! Flat parameter order is layer-major with weights before biases, and for
//! the DeepONet the whole branch block precedes the trunk block.

pub mod mlp;

use rand::distr::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
pub use mlp::Activation;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MlpSpec {
    pub layer_widths: Vec<usize>,
    #[serde(default)]
    pub activation: Activation,
}

impl MlpSpec {
    pub fn new(hidden: &[usize], activation: Activation) -> Self {
        let mut layer_widths = vec![1];
        layer_widths.extend_from_slice(hidden);
        layer_widths.push(1);
        Self { layer_widths, activation }
    }

    pub fn validate(&self) -> Result<()> {
        let w = &self.layer_widths;
        if w.len() < 2 || w[0] != 1 || w[w.len() - 1] != 1 || w.contains(&0) {
            return Err(Error::invalid(format!("MLP widths must run 1 -> .. -> 1, got {w:?}")));
        }
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        mlp::param_count(&self.layer_widths)
    }
}

impl Default for MlpSpec {
    fn default() -> Self {
        Self::new(&[50; 5], Activation::Tanh)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeepOnetSpec {
    /// `2N` observation reals in, `q` features out.
    pub branch_widths: Vec<usize>,
    /// One coordinate in, `q` features out.
    pub trunk_widths: Vec<usize>,
    #[serde(default)]
    pub activation: Activation,
}

impl DeepOnetSpec {
    pub fn new(n_sensors: usize, q: usize, branch_hidden: &[usize], trunk_hidden: &[usize]) -> Self {
        let mut branch_widths = vec![2 * n_sensors];
        branch_widths.extend_from_slice(branch_hidden);
        branch_widths.push(q);
        let mut trunk_widths = vec![1];
        trunk_widths.extend_from_slice(trunk_hidden);
        trunk_widths.push(q);
        Self { branch_widths, trunk_widths, activation: Activation::Tanh }
    }

    pub fn q(&self) -> usize {
        *self.branch_widths.last().unwrap_or(&0)
    }

    pub fn branch_input(&self) -> usize {
        self.branch_widths.first().copied().unwrap_or(0)
    }

    pub fn validate(&self) -> Result<()> {
        let (b, t) = (&self.branch_widths, &self.trunk_widths);
        if b.len() < 2 || t.len() < 2 || b.contains(&0) || t.contains(&0) {
            return Err(Error::invalid("DeepONet nets need at least one layer of nonzero width"));
        }
        if t[0] != 1 {
            return Err(Error::invalid("DeepONet trunk takes a single coordinate"));
        }
        if b[b.len() - 1] != t[t.len() - 1] {
            return Err(Error::invalid(format!(
                "branch outputs {} features but trunk outputs {}",
                b[b.len() - 1],
                t[t.len() - 1]
            )));
        }
        Ok(())
    }

    fn branch_count(&self) -> usize {
        mlp::param_count(&self.branch_widths)
    }

    pub fn param_count(&self) -> usize {
        self.branch_count() + mlp::param_count(&self.trunk_widths)
    }

    fn split<'p>(&self, params: &'p [f64]) -> (&'p [f64], &'p [f64]) {
        params.split_at(self.branch_count())
    }

    pub fn branch_features(&self, params: &[f64], u: &[f64]) -> Vec<f64> {
        let (pb, _) = self.split(params);
        mlp::forward(&self.branch_widths, self.activation, pb, u).layers.pop().unwrap()
    }

    pub fn trunk_features(&self, params: &[f64], y: f64) -> Vec<f64> {
        let (_, pt) = self.split(params);
        mlp::forward(&self.trunk_widths, self.activation, pt, &[y]).layers.pop().unwrap()
    }
}

impl Default for DeepOnetSpec {
    fn default() -> Self {
        Self::new(50, 50, &[100, 100], &[100, 100])
    }
}

/// Output of a DeepONet given both feature vectors.
pub fn combine_features(branch: &[f64], trunk: &[f64]) -> f64 {
    branch.iter().zip(trunk).map(|(b, t)| b * t).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NetSpec {
    Mlp(MlpSpec),
    DeepOnet(DeepOnetSpec),
}

impl NetSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            NetSpec::Mlp(s) => s.validate(),
            NetSpec::DeepOnet(s) => s.validate(),
        }
    }

    pub fn param_count(&self) -> usize {
        match self {
            NetSpec::Mlp(s) => s.param_count(),
            NetSpec::DeepOnet(s) => s.param_count(),
        }
    }

    /// Width of the flat input accepted by [`backward`].
    pub fn input_len(&self) -> usize {
        match self {
            NetSpec::Mlp(_) => 1,
            NetSpec::DeepOnet(s) => s.branch_input() + 1,
        }
    }

    /// Layer width lists in flat-vector order.
    fn blocks(&self) -> Vec<&[usize]> {
        match self {
            NetSpec::Mlp(s) => vec![&s.layer_widths],
            NetSpec::DeepOnet(s) => vec![&s.branch_widths, &s.trunk_widths],
        }
    }
}

/// Surrogate weights `theta` together with their architecture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetParams {
    pub spec: NetSpec,
    pub seed: u64,
    pub flat: Vec<f64>,
}

impl NetParams {
    pub fn new(spec: NetSpec, seed: u64, flat: Vec<f64>) -> Result<Self> {
        spec.validate()?;
        if flat.len() != spec.param_count() {
            return Err(Error::invalid(format!(
                "parameter vector has {} entries, architecture needs {}",
                flat.len(),
                spec.param_count()
            )));
        }
        Ok(Self { spec, seed, flat })
    }

    pub fn with_flat(&self, flat: Vec<f64>) -> Result<Self> {
        Self::new(self.spec.clone(), self.seed, flat)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: NetParams = serde_json::from_str(text)?;
        Self::new(raw.spec, raw.seed, raw.flat)
    }
}

/// Glorot-uniform weights and zero biases, deterministic in `seed`.
pub fn init_params(spec: &NetSpec, seed: u64) -> Result<NetParams> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut flat = Vec::with_capacity(spec.param_count());
    for widths in spec.blocks() {
        for w in widths.windows(2) {
            let (n_in, n_out) = (w[0], w[1]);
            let limit = (6.0 / (n_in + n_out) as f64).sqrt();
            let dist = Uniform::new_inclusive(-limit, limit).expect("finite bounds");
            flat.extend((0..n_in * n_out).map(|_| dist.sample(&mut rng)));
            flat.extend(std::iter::repeat_n(0.0, n_out));
        }
    }
    NetParams::new(spec.clone(), seed, flat)
}

pub fn mlp_eval(params: &NetParams, x: f64) -> Result<f64> {
    match &params.spec {
        NetSpec::Mlp(s) => Ok(s.eval(&params.flat, &[], &[x])[0]),
        _ => Err(Error::invalid("mlp_eval needs an MLP surrogate")),
    }
}

pub fn deeponet_eval(params: &NetParams, u: &[f64], y: f64) -> Result<f64> {
    match &params.spec {
        NetSpec::DeepOnet(s) => {
            if u.len() != s.branch_input() {
                return Err(Error::invalid(format!(
                    "branch expects {} inputs, got {}",
                    s.branch_input(),
                    u.len()
                )));
            }
            Ok(s.eval(&params.flat, u, &[y])[0])
        }
        _ => Err(Error::invalid("deeponet_eval needs a DeepONet surrogate")),
    }
}

/// Gradients of `upstream * output` with respect to all parameters and to
/// the flat input (`[x]` for an MLP, `u ++ [y]` for a DeepONet).
pub fn backward(params: &NetParams, input: &[f64], upstream: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if input.len() != params.spec.input_len() {
        return Err(Error::invalid(format!(
            "surrogate input has {} entries, expected {}",
            input.len(),
            params.spec.input_len()
        )));
    }
    let mut grad = vec![0.0; params.flat.len()];
    let grad_input = match &params.spec {
        NetSpec::Mlp(s) => {
            let cache = mlp::forward(&s.layer_widths, s.activation, &params.flat, input);
            mlp::backward(&s.layer_widths, s.activation, &params.flat, &cache, &[upstream], &mut grad)
        }
        NetSpec::DeepOnet(s) => {
            let (u, y) = input.split_at(input.len() - 1);
            let (pb, pt) = s.split(&params.flat);
            let bc = mlp::forward(&s.branch_widths, s.activation, pb, u);
            let tc = mlp::forward(&s.trunk_widths, s.activation, pt, y);
            let up_b: Vec<f64> = tc.output().iter().map(|t| upstream * t).collect();
            let up_t: Vec<f64> = bc.output().iter().map(|b| upstream * b).collect();
            let (gb, gt) = grad.split_at_mut(s.branch_count());
            let mut gi = mlp::backward(&s.branch_widths, s.activation, pb, &bc, &up_b, gb);
            gi.extend(mlp::backward(&s.trunk_widths, s.activation, pt, &tc, &up_t, gt));
            gi
        }
    };
    Ok((grad, grad_input))
}

/// A parameterized map from (optional branch input, coordinates) to potential
/// values, with a reverse-mode pullback. Implemented by both architectures so
/// the training objectives are architecture agnostic.
pub trait Surrogate: Sync {
    /// Intermediate values kept by [`Surrogate::forward`] for the reverse pass.
    type Tape: Send + Sync;

    fn num_params(&self) -> usize;

    /// Potential at each coordinate in `ys`, plus the tape.
    fn forward(&self, params: &[f64], branch_input: &[f64], ys: &[f64]) -> (Vec<f64>, Self::Tape);

    /// Adds `sum_k upstream_k d out_k / d params` into `grad`.
    fn reverse(&self, params: &[f64], tape: &Self::Tape, upstream: &[f64], grad: &mut [f64]);

    fn eval(&self, params: &[f64], branch_input: &[f64], ys: &[f64]) -> Vec<f64> {
        self.forward(params, branch_input, ys).0
    }

    fn pullback(&self, params: &[f64], branch_input: &[f64], ys: &[f64], upstream: &[f64], grad: &mut [f64]) {
        let (_, tape) = self.forward(params, branch_input, ys);
        self.reverse(params, &tape, upstream, grad);
    }
}

impl Surrogate for MlpSpec {
    type Tape = mlp::ForwardCache;

    fn num_params(&self) -> usize {
        self.param_count()
    }

    fn forward(&self, params: &[f64], _branch_input: &[f64], ys: &[f64]) -> (Vec<f64>, Self::Tape) {
        let cache = mlp::forward_batch(&self.layer_widths, self.activation, params, ys, ys.len());
        (cache.output().to_vec(), cache)
    }

    fn reverse(&self, params: &[f64], tape: &Self::Tape, upstream: &[f64], grad: &mut [f64]) {
        mlp::backward(&self.layer_widths, self.activation, params, tape, upstream, grad);
    }
}

#[derive(Debug, Clone)]
pub struct DeepOnetTape {
    branch: mlp::ForwardCache,
    trunk: mlp::ForwardCache,
}

impl Surrogate for DeepOnetSpec {
    type Tape = DeepOnetTape;

    fn num_params(&self) -> usize {
        self.param_count()
    }

    fn forward(&self, params: &[f64], branch_input: &[f64], ys: &[f64]) -> (Vec<f64>, Self::Tape) {
        let (pb, pt) = self.split(params);
        let n = ys.len();
        let branch = mlp::forward(&self.branch_widths, self.activation, pb, branch_input);
        let trunk = mlp::forward_batch(&self.trunk_widths, self.activation, pt, ys, n);
        let mut out = vec![0.0; n];
        for (bk, tk) in branch.output().iter().zip(trunk.output().chunks_exact(n.max(1))) {
            for (o, t) in out.iter_mut().zip(tk) {
                *o += bk * t;
            }
        }
        (out, DeepOnetTape { branch, trunk })
    }

    fn reverse(&self, params: &[f64], tape: &Self::Tape, upstream: &[f64], grad: &mut [f64]) {
        let (pb, pt) = self.split(params);
        let n = tape.trunk.n;
        let (gb, gt) = grad.split_at_mut(self.branch_count());
        let b = tape.branch.output();
        let t = tape.trunk.output();
        let up_b: Vec<f64> = t.chunks_exact(n.max(1)).map(|tk| tk.iter().zip(upstream).map(|(x, u)| x * u).sum()).collect();
        let up_t: Vec<f64> = b.iter().flat_map(|bk| upstream.iter().map(move |u| u * bk)).collect();
        mlp::backward(&self.trunk_widths, self.activation, pt, &tape.trunk, &up_t, gt);
        mlp::backward(&self.branch_widths, self.activation, pb, &tape.branch, &up_b, gb);
    }
}

#[derive(Debug, Clone)]
pub enum NetTape {
    Mlp(mlp::ForwardCache),
    DeepOnet(DeepOnetTape),
}

impl Surrogate for NetSpec {
    type Tape = NetTape;

    fn num_params(&self) -> usize {
        self.param_count()
    }

    fn forward(&self, params: &[f64], branch_input: &[f64], ys: &[f64]) -> (Vec<f64>, Self::Tape) {
        match self {
            NetSpec::Mlp(s) => {
                let (v, t) = s.forward(params, branch_input, ys);
                (v, NetTape::Mlp(t))
            }
            NetSpec::DeepOnet(s) => {
                let (v, t) = s.forward(params, branch_input, ys);
                (v, NetTape::DeepOnet(t))
            }
        }
    }

    fn reverse(&self, params: &[f64], tape: &Self::Tape, upstream: &[f64], grad: &mut [f64]) {
        match (self, tape) {
            (NetSpec::Mlp(s), NetTape::Mlp(t)) => s.reverse(params, t, upstream, grad),
            (NetSpec::DeepOnet(s), NetTape::DeepOnet(t)) => s.reverse(params, t, upstream, grad),
            _ => panic!("tape was recorded by a different architecture"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn small_mlp() -> NetSpec {
        NetSpec::Mlp(MlpSpec::new(&[6, 5], Activation::Tanh))
    }

    fn small_onet() -> NetSpec {
        NetSpec::DeepOnet(DeepOnetSpec::new(3, 4, &[5], &[6]))
    }

    #[test]
    fn init_is_deterministic() {
        let spec = NetSpec::Mlp(MlpSpec::new(&[50, 50, 50, 50], Activation::Tanh));
        let a = init_params(&spec, 7).unwrap();
        assert_eq!(a.flat.len(), 7801);
        assert_eq!(a, init_params(&spec, 7).unwrap());
        assert_ne!(a.flat, init_params(&spec, 8).unwrap().flat);
        // biases start at zero
        assert!(a.flat[50..100].iter().all(|b| *b == 0.0));
    }

    #[test]
    fn zero_weights_return_final_bias() {
        let spec = small_mlp();
        let mut flat = vec![0.0; spec.param_count()];
        *flat.last_mut().unwrap() = 1.25;
        let p = NetParams::new(spec, 0, flat).unwrap();
        for x in [-1.0, 0.0, 3.0] {
            assert_eq!(mlp_eval(&p, x).unwrap(), 1.25);
        }
    }

    #[test]
    fn batch_eval_matches_pointwise() {
        let p = init_params(&small_mlp(), 3).unwrap();
        let xs = [-1.0, -0.2, 0.5, 1.4];
        let batch = p.spec.eval(&p.flat, &[], &xs);
        for (x, v) in xs.iter().zip(batch) {
            assert_eq!(mlp_eval(&p, *x).unwrap(), v);
        }
    }

    #[test]
    fn deeponet_dot_product() {
        // one feature; branch and trunk are single affine maps with zero weights
        let spec = DeepOnetSpec::new(1, 1, &[], &[]);
        let mut flat = vec![0.0; spec.param_count()];
        flat[2] = 2.0; // branch bias
        flat[4] = 3.0; // trunk bias
        let p = NetParams::new(NetSpec::DeepOnet(spec), 0, flat).unwrap();
        assert_eq!(deeponet_eval(&p, &[0.3, -0.1], 0.7).unwrap(), 6.0);
        assert!(deeponet_eval(&p, &[0.3], 0.7).is_err());
    }

    #[test]
    fn deeponet_is_inner_product_of_features() {
        let p = init_params(&small_onet(), 11).unwrap();
        let NetSpec::DeepOnet(s) = &p.spec else { unreachable!() };
        let u = [0.1, -0.4, 0.2, 0.9, -0.3, 0.5];
        let b = s.branch_features(&p.flat, &u);
        for y in [-1.0, 0.25, 1.5] {
            let t = s.trunk_features(&p.flat, y);
            assert_eq!(deeponet_eval(&p, &u, y).unwrap(), combine_features(&b, &t));
            let scaled: Vec<f64> = b.iter().map(|v| 2.5 * v).collect();
            assert!((combine_features(&scaled, &t) - 2.5 * combine_features(&b, &t)).abs() < 1e-14);
            assert_eq!(combine_features(&vec![0.0; b.len()], &t), 0.0);
        }
    }

    fn check_backward(params: &NetParams, input: &[f64]) {
        let eval = |flat: &[f64], inp: &[f64]| -> f64 {
            let p = params.with_flat(flat.to_vec()).unwrap();
            match &p.spec {
                NetSpec::Mlp(_) => mlp_eval(&p, inp[0]).unwrap(),
                NetSpec::DeepOnet(_) => {
                    let (u, y) = inp.split_at(inp.len() - 1);
                    deeponet_eval(&p, u, y[0]).unwrap()
                }
            }
        };
        let up = 1.7;
        let (gp, gi) = backward(params, input, up).unwrap();
        let d = 1e-6;
        let mut flat = params.flat.clone();
        for i in 0..flat.len() {
            let orig = flat[i];
            flat[i] = orig + d;
            let f1 = eval(&flat, input);
            flat[i] = orig - d;
            let f0 = eval(&flat, input);
            flat[i] = orig;
            let fd = up * (f1 - f0) / (2.0 * d);
            assert!((fd - gp[i]).abs() <= 1e-6 * gp[i].abs().max(1e-3), "param {i}: {fd} vs {}", gp[i]);
        }
        let mut inp = input.to_vec();
        for i in 0..inp.len() {
            let orig = inp[i];
            inp[i] = orig + d;
            let f1 = eval(&params.flat, &inp);
            inp[i] = orig - d;
            let f0 = eval(&params.flat, &inp);
            inp[i] = orig;
            let fd = up * (f1 - f0) / (2.0 * d);
            assert!((fd - gi[i]).abs() <= 1e-6 * gi[i].abs().max(1e-3), "input {i}");
        }
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for seed in 0..3 {
            let mut p = init_params(&small_mlp(), seed).unwrap();
            p.flat.iter_mut().for_each(|v| *v += rng.random_range(-0.3..0.3));
            check_backward(&p, &[0.37]);
            let mut p = init_params(&small_onet(), seed).unwrap();
            p.flat.iter_mut().for_each(|v| *v += rng.random_range(-0.3..0.3));
            check_backward(&p, &[0.1, -0.4, 0.2, 0.9, -0.3, 0.5, 0.8]);
        }
    }

    #[test]
    fn backward_is_linear_in_upstream() {
        let p = init_params(&small_onet(), 5).unwrap();
        let input = [0.1, -0.4, 0.2, 0.9, -0.3, 0.5, 0.8];
        let (z, zi) = backward(&p, &input, 0.0).unwrap();
        assert!(z.iter().chain(&zi).all(|g| *g == 0.0));
        let (a, _) = backward(&p, &input, 0.4).unwrap();
        let (b, _) = backward(&p, &input, 1.1).unwrap();
        let (ab, _) = backward(&p, &input, 1.5).unwrap();
        for i in 0..a.len() {
            assert!((a[i] + b[i] - ab[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn pullback_sums_pointwise_backward() {
        let p = init_params(&small_onet(), 2).unwrap();
        let u = [0.1, -0.4, 0.2, 0.9, -0.3, 0.5];
        let ys = [-0.5, 0.3, 1.2];
        let ups = [0.7, -1.1, 0.4];
        let mut g = vec![0.0; p.flat.len()];
        p.spec.pullback(&p.flat, &u, &ys, &ups, &mut g);
        let mut want = vec![0.0; p.flat.len()];
        for (y, up) in ys.iter().zip(ups) {
            let mut inp = u.to_vec();
            inp.push(*y);
            let (gp, _) = backward(&p, &inp, up).unwrap();
            want.iter_mut().zip(gp).for_each(|(w, v)| *w += v);
        }
        for (a, b) in g.iter().zip(&want) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn json_validates_count() {
        let p = init_params(&small_onet(), 1).unwrap();
        let text = p.to_json().unwrap();
        assert_eq!(NetParams::from_json(&text).unwrap(), p);
        let mut bad: serde_json::Value = serde_json::from_str(&text).unwrap();
        bad["flat"].as_array_mut().unwrap().pop();
        assert!(NetParams::from_json(&bad.to_string()).is_err());
    }
}
