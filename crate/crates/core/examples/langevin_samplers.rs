//! SGD, SGLD and pSGLD on a correlated two-dimensional Gaussian posterior.
//! The Langevin chains should recover the target covariance.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use semiclassical_control::train::{psgld_step, sgd_step, sgld_step};

// negative log density 0.5 x^T A x
const A: [[f64; 2]; 2] = [[2.0, 0.8], [0.8, 1.0]];

fn grad(x: &[f64]) -> Vec<f64> {
    vec![A[0][0] * x[0] + A[0][1] * x[1], A[1][0] * x[0] + A[1][1] * x[1]]
}

fn covariance(chain: &[Vec<f64>]) -> [[f64; 2]; 2] {
    let n = chain.len() as f64;
    let m = [chain.iter().map(|c| c[0]).sum::<f64>() / n, chain.iter().map(|c| c[1]).sum::<f64>() / n];
    let mut c = [[0.0; 2]; 2];
    for s in chain {
        for i in 0..2 {
            for j in 0..2 {
                c[i][j] += (s[i] - m[i]) * (s[j] - m[j]) / n;
            }
        }
    }
    c
}

fn main() -> semiclassical_control::Result<()> {
    let det = A[0][0] * A[1][1] - A[0][1] * A[1][0];
    println!("target covariance [[{:.3}, {:.3}], [{:.3}, {:.3}]]", A[1][1] / det, -A[0][1] / det, -A[1][0] / det, A[0][0] / det);

    let mut x = vec![2.0, -2.0];
    for _ in 0..2000 {
        let g = grad(&x);
        sgd_step(&mut x, &g, 0.05);
    }
    println!("sgd minimizer ({:.2e}, {:.2e})", x[0], x[1]);

    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let (eta, steps) = (5e-3, 200_000);
    let mut x = vec![0.0, 0.0];
    let mut chain = Vec::new();
    for k in 0..steps {
        let g: Vec<f64> = grad(&x).iter().map(|v| -v).collect();
        sgld_step(&mut x, &g, eta, 1.0, &mut rng)?;
        if k > 1000 {
            chain.push(x.clone());
        }
    }
    let c = covariance(&chain);
    println!("sgld  covariance [[{:.3}, {:.3}], [{:.3}, {:.3}]]", c[0][0], c[0][1], c[1][0], c[1][1]);

    let mut x = vec![0.0, 0.0];
    let mut state = vec![0.0; 2];
    let mut chain = Vec::new();
    for k in 0..steps {
        let g: Vec<f64> = grad(&x).iter().map(|v| -v).collect();
        psgld_step(&mut x, &g, &mut state, eta, 1.0, 1.0, 0.01, &mut rng)?;
        if k > 1000 {
            chain.push(x.clone());
        }
    }
    let c = covariance(&chain);
    println!("psgld covariance [[{:.3}, {:.3}], [{:.3}, {:.3}]] (no curvature correction)", c[0][0], c[0][1], c[1][0], c[1][1]);
    Ok(())
}
