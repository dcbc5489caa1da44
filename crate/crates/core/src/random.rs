//! Random symmetrizable networks: an Erdős–Rényi support scaled row-wise by
//! log-normal intensities.

use nalgebra::DMatrix;
use rand::distributions::{Bernoulli, Distribution};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::LogNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::net::{Decomposition, DecompositionKind, WeightedNetwork};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RandomNetSpec {
    pub n: usize,
    /// Expected number of links per agent.
    pub k: f64,
    /// Mean of the intensity distribution.
    pub mu: f64,
    /// Variance of the intensity distribution.
    pub sigma2: f64,
    pub seed: u64,
}

impl RandomNetSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(invalid("random network needs n >= 1"));
        }
        if !(self.mu > 0.0) {
            return Err(invalid(format!("mu must be > 0, got {}", self.mu)));
        }
        if !(self.sigma2 >= 0.0) {
            return Err(invalid(format!("sigma2 must be >= 0, got {}", self.sigma2)));
        }
        if !(self.k > 0.0 && self.k < self.n as f64) {
            return Err(invalid(format!("k must lie in (0, n), got {}", self.k)));
        }
        Ok(())
    }

    /// `(mu_log, sigma_log)` of the log-normal with mean `mu` and variance `sigma2`.
    pub fn lognormal_params(&self) -> (f64, f64) {
        let s2 = (1.0 + self.sigma2 / (self.mu * self.mu)).ln();
        (self.mu.ln() - 0.5 * s2, s2.sqrt())
    }

    /// Draws the network together with the factors it was built from.
    pub fn sample(&self) -> Result<(WeightedNetwork, Decomposition)> {
        self.validate()?;
        let n = self.n;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut z0 = DMatrix::zeros(n, n);
        if n > 1 {
            let p = (self.k / (n - 1) as f64).min(1.0);
            let link = Bernoulli::new(p).map_err(|e| invalid(format!("link probability {p}: {e}")))?;
            for i in 0..n {
                for j in i + 1..n {
                    if link.sample(&mut rng) {
                        z0[(i, j)] = 1.0;
                        z0[(j, i)] = 1.0;
                    }
                }
            }
        }
        let (m, s) = self.lognormal_params();
        let dist = LogNormal::new(m, s).map_err(|e| invalid(format!("log-normal({m}, {s}): {e}")))?;
        let gamma: Vec<f64> = (0..n).map(|_| dist.sample(&mut rng)).collect();
        let z = DMatrix::from_fn(n, n, |i, j| gamma[i] * z0[(i, j)]);
        let net = WeightedNetwork::new(z)?;
        Ok((net, Decomposition { kind: DecompositionKind::Diagonal, gamma, z0 }))
    }
}

/// `Z = Gamma Z0`, deterministic in `spec.seed`.
pub fn random_symmetrizable(spec: &RandomNetSpec) -> Result<WeightedNetwork> {
    spec.sample().map(|(net, _)| net)
}
