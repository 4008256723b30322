//! Parameter updates.
//!
//! Sign convention: `sgd_step` descends the loss, while the Langevin updates
//! ascend the log posterior, taking `grad_logpost = -theta / prior_std^2 -
//! grad_loss / (2 sigma^2)`. See [`log_posterior_gradient`].

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// `theta -= eta * grad`.
pub fn sgd_step(theta: &mut [f64], grad: &[f64], eta: f64) {
    debug_assert_eq!(theta.len(), grad.len());
    for (t, g) in theta.iter_mut().zip(grad) {
        *t -= eta * g;
    }
}

/// Gradient of the log posterior for a Gaussian prior of standard deviation
/// `prior_std` (infinite disables it) and a Gaussian likelihood whose negative
/// log equals `loss / (2 sigma^2)`.
pub fn log_posterior_gradient(theta: &[f64], grad_loss: &[f64], prior_std: f64, likelihood_sigma: f64) -> Vec<f64> {
    let prior = 1.0 / (prior_std * prior_std);
    let lik = 1.0 / (2.0 * likelihood_sigma * likelihood_sigma);
    theta.iter().zip(grad_loss).map(|(t, g)| -prior * t - lik * g).collect()
}

fn check_rate(eta: f64, tau: f64) -> Result<()> {
    if !(eta > 0.0) {
        return Err(Error::invalid(format!("step size must be positive, got {eta}")));
    }
    if !(tau > 0.0) {
        return Err(Error::invalid(format!("inverse temperature must be positive, got {tau}")));
    }
    Ok(())
}

/// `theta += eta * grad_logpost + N(0, 2 eta / tau)`. An infinite `tau`
/// turns the noise off without consuming draws.
pub fn sgld_step<R: Rng + ?Sized>(theta: &mut [f64], grad_logpost: &[f64], eta: f64, tau: f64, rng: &mut R) -> Result<()> {
    check_rate(eta, tau)?;
    let scale = (2.0 * eta / tau).sqrt();
    for (t, g) in theta.iter_mut().zip(grad_logpost) {
        *t += eta * g;
        if scale > 0.0 {
            let xi: f64 = rng.sample(StandardNormal);
            *t += scale * xi;
        }
    }
    Ok(())
}

/// Diagonal preconditioner `1 / (lambda + sqrt(v))`.
pub fn preconditioner(state: &[f64], lambda_pre: f64) -> Vec<f64> {
    state.iter().map(|v| 1.0 / (lambda_pre + v.sqrt())).collect()
}

/// Preconditioned step. `state` holds the moving average of squared
/// gradients and is updated first:
/// `v <- (1 - omega) v + omega g*g`, `P = 1 / (lambda + sqrt(v))`,
/// `theta += eta P g + N(0, 2 eta P / tau)`. The curvature correction of the
/// general Riemannian rule is omitted since `P` is frozen within the step.
#[allow(clippy::too_many_arguments)]
pub fn psgld_step<R: Rng + ?Sized>(
    theta: &mut [f64],
    grad_logpost: &[f64],
    state: &mut [f64],
    eta: f64,
    tau: f64,
    lambda_pre: f64,
    omega: f64,
    rng: &mut R,
) -> Result<()> {
    check_rate(eta, tau)?;
    if !(lambda_pre > 0.0) || !(0.0..=1.0).contains(&omega) {
        return Err(Error::invalid("preconditioner needs lambda > 0 and omega in [0, 1]"));
    }
    if state.len() != theta.len() {
        return Err(Error::invalid("preconditioner state has the wrong dimension"));
    }
    for ((t, g), v) in theta.iter_mut().zip(grad_logpost).zip(state.iter_mut()) {
        *v = (1.0 - omega) * *v + omega * g * g;
        let p = 1.0 / (lambda_pre + v.sqrt());
        *t += eta * p * g;
        let scale = (2.0 * eta * p / tau).sqrt();
        if scale > 0.0 {
            let xi: f64 = rng.sample(StandardNormal);
            *t += scale * xi;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sgd_cases() {
        let mut th = vec![1.0, -2.0];
        sgd_step(&mut th, &[0.0, 0.0], 0.5);
        assert_eq!(th, vec![1.0, -2.0]);
        let g = th.clone();
        sgd_step(&mut th, &g, 1.0);
        assert_eq!(th, vec![0.0, 0.0]);

        let g = [0.25, -1.5];
        let mut a = vec![0.5, 0.5];
        let mut b = a.clone();
        sgd_step(&mut a, &g, 0.125);
        sgd_step(&mut a, &g, 0.125);
        sgd_step(&mut b, &g, 0.25);
        assert_eq!(a, b);
    }

    #[test]
    fn preconditioner_entries() {
        let mut th = vec![0.0; 3];
        let mut state = vec![0.0; 3];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        psgld_step(&mut th, &[3.0, 3.0, 30.0], &mut state, 1e-3, f64::INFINITY, 1.0, 1.0, &mut rng).unwrap();
        let p = preconditioner(&state, 1.0);
        assert_eq!(p[0], 0.25);
        assert_eq!(p[1], 0.25);
        assert!((p[2] - 1.0 / 31.0).abs() < 1e-15);
    }

    #[test]
    fn sgld_is_deterministic_under_seed() {
        let run = || {
            let mut th = vec![0.3; 5];
            let mut rng = ChaCha8Rng::seed_from_u64(11);
            sgld_step(&mut th, &[1.0; 5], 1e-2, 1.0, &mut rng).unwrap();
            th
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn rejects_bad_rates() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(sgld_step(&mut [0.0], &[0.0], 0.0, 1.0, &mut rng).is_err());
        assert!(sgld_step(&mut [0.0], &[0.0], 1e-3, 0.0, &mut rng).is_err());
    }
}
