//! Dense feed-forward layers over a flat parameter slice.
//!
//! Layer `l` maps `widths[l]` inputs to `widths[l + 1]` outputs. Its block in
//! the flat vector is the row-major `out x in` weight matrix followed by the
//! `out` biases. Hidden layers apply the activation; the last layer is affine.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Tanh,
    Sigmoid,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => tanh(x),
            Activation::Sigmoid => 1.0 / (1.0 + (-x).exp()),
        }
    }

    /// Derivative expressed through the activated value.
    fn slope_from_output(self, a: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - a * a,
            Activation::Sigmoid => a * (1.0 - a),
        }
    }
}

/// `tanh` through a single `exp`; relative error below 1e-12. The libm
/// version dominated the cost of a forward pass.
fn tanh(x: f64) -> f64 {
    let ax = x.abs();
    if ax < 1e-4 {
        return x - x * x * x / 3.0;
    }
    let t = (-2.0 * ax).exp();
    ((1.0 - t) / (1.0 + t)).copysign(x)
}

pub fn param_count(widths: &[usize]) -> usize {
    widths.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

/// Activations of every layer for a batch of `n` inputs, input first.
/// Layouts are feature-major: unit `u` of point `p` sits at `u * n + p`.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub n: usize,
    pub layers: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &[f64] {
        self.layers.last().expect("cache holds at least the input")
    }
}

fn offsets(widths: &[usize]) -> Vec<usize> {
    let mut off = 0;
    widths
        .windows(2)
        .map(|w| {
            let o = off;
            off += w[0] * w[1] + w[1];
            o
        })
        .collect()
}

/// Single input; see [`forward_batch`].
pub fn forward(widths: &[usize], act: Activation, params: &[f64], input: &[f64]) -> ForwardCache {
    forward_batch(widths, act, params, input, 1)
}

pub fn forward_batch(widths: &[usize], act: Activation, params: &[f64], inputs: &[f64], n: usize) -> ForwardCache {
    debug_assert_eq!(inputs.len(), widths[0] * n);
    debug_assert_eq!(params.len(), param_count(widths));
    let n_layers = widths.len() - 1;
    let mut layers = Vec::with_capacity(widths.len());
    layers.push(inputs.to_vec());
    for (l, off) in offsets(widths).into_iter().enumerate() {
        let (n_in, n_out) = (widths[l], widths[l + 1]);
        let w = &params[off..off + n_in * n_out];
        let b = &params[off + n_in * n_out..off + n_in * n_out + n_out];
        let x = &layers[l];
        let mut y = vec![0.0; n_out * n];
        for (o, yo) in y.chunks_exact_mut(n).enumerate() {
            for (wi, xi) in w[o * n_in..(o + 1) * n_in].iter().zip(x.chunks_exact(n)) {
                for (acc, xv) in yo.iter_mut().zip(xi) {
                    *acc += wi * xv;
                }
            }
            for v in yo.iter_mut() {
                *v += b[o];
            }
        }
        if l + 1 < n_layers {
            y.iter_mut().for_each(|v| *v = act.apply(*v));
        }
        layers.push(y);
    }
    ForwardCache { n, layers }
}

/// Reverse sweep for `sum upstream * output`, with `upstream` laid out like
/// the output. Parameter gradients are added into `grad`; input gradients are
/// returned in the input layout.
pub fn backward(
    widths: &[usize],
    act: Activation,
    params: &[f64],
    cache: &ForwardCache,
    upstream: &[f64],
    grad: &mut [f64],
) -> Vec<f64> {
    let n = cache.n;
    debug_assert_eq!(upstream.len(), widths[widths.len() - 1] * n);
    let offs = offsets(widths);
    let mut delta = upstream.to_vec();
    for l in (0..widths.len() - 1).rev() {
        let (n_in, n_out) = (widths[l], widths[l + 1]);
        let off = offs[l];
        let x = &cache.layers[l];
        {
            let (gw, gb) = grad[off..off + n_in * n_out + n_out].split_at_mut(n_in * n_out);
            for (o, d) in delta.chunks_exact(n).enumerate() {
                gb[o] += d.iter().sum::<f64>();
                for (g, xi) in gw[o * n_in..(o + 1) * n_in].iter_mut().zip(x.chunks_exact(n)) {
                    *g += dot(d, xi);
                }
            }
        }
        let w = &params[off..off + n_in * n_out];
        let mut next = vec![0.0; n_in * n];
        for (o, d) in delta.chunks_exact(n).enumerate() {
            for (nx, wi) in next.chunks_exact_mut(n).zip(&w[o * n_in..(o + 1) * n_in]) {
                for (a, dv) in nx.iter_mut().zip(d) {
                    *a += wi * dv;
                }
            }
        }
        if l > 0 {
            for (nx, a) in next.iter_mut().zip(x) {
                *nx *= act.slope_from_output(*a);
            }
        }
        delta = next;
    }
    delta
}

/// Dot product with four fixed accumulators; the summation order depends
/// only on the length.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for (x, y) in ra.iter().zip(rb) {
        s += x * y;
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_evaluated_two_layer_net() {
        // 1 -> 1 (tanh) -> 1
        let widths = [1, 1, 1];
        let params = [0.7, -0.2, 1.5, 0.3];
        let x = 0.4;
        let out = forward(&widths, Activation::Tanh, &params, &[x]);
        let want = 1.5 * (0.7 * x - 0.2f64).tanh() + 0.3;
        assert!((out.output()[0] - want).abs() < 1e-12);
    }

    #[test]
    fn tanh_accuracy() {
        let mut x: f64 = -25.0;
        while x < 25.0 {
            let want = x.tanh();
            assert!((tanh(x) - want).abs() <= 1e-12 * want.abs().max(1e-300), "{x}");
            x += 0.0137;
        }
        for x in [0.0f64, 1e-9, -3e-5, 1e-4, 2e-3, 800.0, -800.0] {
            let want = x.tanh();
            assert!((tanh(x) - want).abs() <= 1e-12 * want.abs(), "{x}");
        }
    }

    #[test]
    fn counts() {
        assert_eq!(param_count(&[1, 50, 50, 50, 50, 1]), 7801);
        assert_eq!(param_count(&[2, 3]), 9);
    }

    #[test]
    fn batch_matches_single() {
        let widths = [2, 3, 4, 2];
        let params: Vec<f64> = (0..param_count(&widths)).map(|i| ((i * 37 % 11) as f64 - 5.0) / 7.0).collect();
        let pts = [[0.3, -0.7], [1.1, 0.2], [-0.4, 0.9]];
        let n = pts.len();
        let mut inputs = vec![0.0; 2 * n];
        for (p, xy) in pts.iter().enumerate() {
            inputs[p] = xy[0];
            inputs[n + p] = xy[1];
        }
        let batch = forward_batch(&widths, Activation::Tanh, &params, &inputs, n);
        let up: Vec<f64> = (0..2 * n).map(|i| 0.3 * i as f64 - 0.5).collect();
        let mut gb = vec![0.0; params.len()];
        let gin = backward(&widths, Activation::Tanh, &params, &batch, &up, &mut gb);
        let mut gs = vec![0.0; params.len()];
        for (p, xy) in pts.iter().enumerate() {
            let c = forward(&widths, Activation::Tanh, &params, xy);
            assert!((c.output()[0] - batch.output()[p]).abs() < 1e-15);
            assert!((c.output()[1] - batch.output()[n + p]).abs() < 1e-15);
            let g = backward(&widths, Activation::Tanh, &params, &c, &[up[p], up[n + p]], &mut gs);
            assert!((g[0] - gin[p]).abs() < 1e-14 && (g[1] - gin[n + p]).abs() < 1e-14);
        }
        for (a, b) in gb.iter().zip(&gs) {
            assert!((a - b).abs() < 1e-14);
        }
    }
}
