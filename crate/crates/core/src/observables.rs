//! Physical observables and discrete norms of wave fields.

use crate::error::{Error, Result};
use crate::field::WaveField;
use crate::fourier::spectral_derivative;
use crate::quadrature::QuadratureRule;

/// `n_j = |psi_j|^2`.
pub fn position_density(psi: &WaveField) -> Vec<f64> {
    psi.values().iter().map(|v| v.norm_sqr()).collect()
}

/// `J_j = eps * Im(conj(psi_j) * (d/dx psi)_j)` with a spectral derivative.
pub fn current_density(psi: &WaveField, eps: f64) -> Vec<f64> {
    let d = spectral_derivative(psi);
    psi.values()
        .iter()
        .zip(d.values())
        .map(|(p, dp)| eps * (p.conj() * dp).im)
        .collect()
}

/// Discrete mass norm `sqrt(h sum |psi_j|^2)`.
pub fn l2_norm(psi: &WaveField) -> f64 {
    (psi.grid().h() * psi.values().iter().map(|v| v.norm_sqr()).sum::<f64>()).sqrt()
}

/// Discrete L2 distance between two fields on the same grid.
pub fn l2_distance(a: &WaveField, b: &WaveField) -> f64 {
    let s: f64 = a.values().iter().zip(b.values()).map(|(x, y)| (x - y).norm_sqr()).sum();
    (a.grid().h() * s).sqrt()
}

/// Random-space averaged norm `sqrt(sum_k (w_k / 2) ||psi_k||^2)`, with the
/// uniform density `1/2` on `[-1, 1]` folded into the weights.
pub fn gamma_norm(fields: &[WaveField], rule: &QuadratureRule) -> Result<f64> {
    if fields.len() != rule.len() {
        return Err(Error::invalid(format!(
            "gamma norm got {} fields for {} quadrature nodes",
            fields.len(),
            rule.len()
        )));
    }
    let s: f64 = fields
        .iter()
        .zip(rule.weights())
        .map(|(f, w)| 0.5 * w * l2_norm(f).powi(2))
        .sum();
    Ok(s.sqrt())
}
