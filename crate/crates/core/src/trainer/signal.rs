use serde::{Deserialize, Serialize};

use super::TrainError;

/// One scored sample of the unsupervised objective.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearningSignalRecord {
    /// `l'(x, z)` before the baseline.
    pub raw_signal: f64,
    pub baseline: f64,
    /// `max(l' - b, k)`.
    pub signal: f64,
    pub log_q: f64,
    pub log_p_x_given_z: f64,
    pub log_p_z: f64,
    pub clipped: bool,
}

/// `l' = log p(x|z) - kl_weight * (log q(z|x) - log p(z))`.
pub fn raw_signal(log_q: f64, log_p_x_given_z: f64, log_p_z: f64, kl_weight: f64) -> f64 {
    log_p_x_given_z - kl_weight * (log_q - log_p_z)
}

/// Builds the learning signal from its components. Signals below
/// `clip_threshold` are clamped to it.
pub fn learning_signal(
    log_q: f64,
    log_p_x_given_z: f64,
    log_p_z: f64,
    baseline: f64,
    kl_weight: f64,
    clip_threshold: f64,
) -> Result<LearningSignalRecord, TrainError> {
    for (name, v) in [
        ("log q", log_q),
        ("log p(x|z)", log_p_x_given_z),
        ("log p(z)", log_p_z),
        ("b(x)", baseline),
    ] {
        if !v.is_finite() {
            return Err(TrainError::NonFinite(format!("{name} = {v}")));
        }
    }
    let raw = raw_signal(log_q, log_p_x_given_z, log_p_z, kl_weight);
    let shifted = raw - baseline;
    let clipped = shifted < clip_threshold;
    Ok(LearningSignalRecord {
        raw_signal: raw,
        baseline,
        signal: if clipped { clip_threshold } else { shifted },
        log_q,
        log_p_x_given_z,
        log_p_z,
        clipped,
    })
}

/// The baseline that turns a raw signal into a given signal.
pub fn implied_baseline(raw_signal: f64, signal: f64) -> f64 {
    raw_signal - signal
}
