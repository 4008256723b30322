//! Gauss-Legendre quadrature on `[-1, 1]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Newton tolerance on the Legendre roots.
pub const ROOT_TOLERANCE: f64 = 1e-14;

/// Nodes in `[-1, 1]` (strictly increasing) with positive weights summing to 2.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn new(nodes: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if nodes.is_empty() || nodes.len() != weights.len() {
            return Err(Error::invalid("quadrature needs equally many nodes and weights"));
        }
        if nodes.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("quadrature nodes must be strictly increasing"));
        }
        if nodes.iter().any(|z| !(-1.0..=1.0).contains(z)) || weights.iter().any(|w| *w <= 0.0) {
            return Err(Error::invalid("quadrature nodes must lie in [-1, 1] with positive weights"));
        }
        Ok(Self { nodes, weights })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `sum_k w_k f(z_k)`, i.e. the integral over `[-1, 1]`.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(z, w)| w * f(*z)).sum()
    }

    /// Expectation under the uniform density `1/2` on `[-1, 1]`.
    pub fn expectation(&self, f: impl Fn(f64) -> f64) -> f64 {
        0.5 * self.integrate(f)
    }
}

/// Legendre polynomial `P_n(x)` and its derivative by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// `n`-point Gauss-Legendre rule, `1 <= n <= 64`.
pub fn gauss_legendre(n: usize) -> Result<QuadratureRule> {
    if !(1..=64).contains(&n) {
        return Err(Error::invalid(format!("Gauss-Legendre order must be in 1..=64, got {n}")));
    }
    let nf = n as f64;
    let half = n / 2;
    let mut pos = Vec::with_capacity(half);
    // positive roots, largest first
    for i in 0..half {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < ROOT_TOLERANCE {
                break;
            }
        }
        let (_, dp) = legendre(n, x);
        pos.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for &(x, w) in &pos {
        nodes.push(-x);
        weights.push(w);
    }
    if n % 2 == 1 {
        let (_, dp) = legendre(n, 0.0);
        nodes.push(0.0);
        weights.push(2.0 / (dp * dp));
    }
    for &(x, w) in pos.iter().rev() {
        nodes.push(x);
        weights.push(w);
    }
    QuadratureRule::new(nodes, weights)
}
