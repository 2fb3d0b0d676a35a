//! Evidence lower bound with a tunable KL weight.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{TrainError, VaeModels};
use crate::models::log_sum_exp;
use crate::mr::linearize;

/// One latent value with its three log-scores.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scored {
    pub log_q: f64,
    pub log_p_x_given_z: f64,
    pub log_p_z: f64,
}

/// `E_q[log p(x|z)] - kl_weight * KL(q || p)` computed exactly over a support
/// that carries all of q's mass.
pub fn elbo_exact(support: &[Scored], kl_weight: f64) -> f64 {
    support
        .iter()
        .filter(|s| s.log_q > f64::NEG_INFINITY)
        .map(|s| s.log_q.exp() * (s.log_p_x_given_z - kl_weight * (s.log_q - s.log_p_z)))
        .sum()
}

/// `log sum_z p(z) p(x|z)` over the support.
pub fn log_marginal_exact(support: &[Scored]) -> f64 {
    let terms: Vec<f64> = support
        .iter()
        .map(|s| s.log_p_z + s.log_p_x_given_z)
        .collect();
    log_sum_exp(&terms)
}

/// Log-weights of the exact posterior `p(z|x)` over the support.
pub fn exact_posterior(support: &[Scored]) -> Vec<f64> {
    let lm = log_marginal_exact(support);
    support
        .iter()
        .map(|s| s.log_p_z + s.log_p_x_given_z - lm)
        .collect()
}

/// Monte-Carlo ELBO with ancestral samples from the parser.
pub fn elbo_estimate(
    models: &VaeModels,
    x: &[String],
    kl_weight: f64,
    n_samples: usize,
    max_steps: usize,
    seed: u64,
) -> Result<f64, TrainError> {
    if n_samples == 0 {
        return Err(TrainError::Config("n_samples must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut total = 0.0;
    for _ in 0..n_samples {
        let h = models.parser.sample(x, &mut rng, max_steps)?;
        let zs = linearize(&h.ast, models.kind)?;
        let rec = models.recon.log_prob(x, &zs.tokens)?;
        let kl = if kl_weight == 0.0 {
            0.0
        } else {
            h.score - models.prior()?.log_prob(&zs)?
        };
        total += rec - kl_weight * kl;
    }
    Ok(total / n_samples as f64)
}
