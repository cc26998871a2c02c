//! Focal-weighted cross-entropy over track proposals and hard-example mining.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

/// Probabilities are clamped to at least this value before taking a log.
pub const PROB_CLAMP: f64 = 1e-12;

/// Class weights of the focal factor; the exponent is fixed at 2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FocalWeights {
    pub beta_pos: f64,
    pub beta_neg: f64,
}

impl Default for FocalWeights {
    fn default() -> Self {
        Self {
            beta_pos: 4.0,
            beta_neg: 1.0,
        }
    }
}

/// Weighted loss of one proposal with match probability `p`.
///
/// Positive: `beta_pos (1-p)^2 * -ln p`; negative: `beta_neg p^2 * -ln(1-p)`.
/// The second value reports whether the clamp was active.
pub fn focal_term(p: f64, positive: bool, w: FocalWeights) -> (f64, bool) {
    if positive {
        let clamped = p < PROB_CLAMP;
        let q = 1.0 - p;
        (w.beta_pos * q * q * -libm::log(p.max(PROB_CLAMP)), clamped)
    } else {
        let q = 1.0 - p;
        let clamped = q < PROB_CLAMP;
        (w.beta_neg * p * p * -libm::log(q.max(PROB_CLAMP)), clamped)
    }
}

/// Derivative of [`focal_term`] with respect to the logit difference
/// `u = z1 - z0`, where `p = sigmoid(u)`. The focal factor is differentiated
/// too; a clamped log contributes nothing.
pub fn focal_grad_logit(p: f64, positive: bool, w: FocalWeights) -> f64 {
    let q = 1.0 - p;
    if positive {
        let nll = -libm::log(p.max(PROB_CLAMP));
        let log_part = if p < PROB_CLAMP { 0.0 } else { q * q * q };
        w.beta_pos * (-2.0 * p * q * q * nll - log_part)
    } else {
        let nll = -libm::log(q.max(PROB_CLAMP));
        let log_part = if q < PROB_CLAMP { 0.0 } else { p * p * p };
        w.beta_neg * (2.0 * p * p * q * nll + log_part)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchLoss {
    /// `(1/MN) sum alpha_ij L_ij`.
    pub mean: f64,
    pub per_example: Vec<f64>,
}

/// Mean focal-weighted loss over a flattened batch of proposals.
pub fn batch_loss(probs: &[f64], labels: &[bool], w: FocalWeights) -> Result<BatchLoss> {
    check_len("batch labels", probs.len(), labels.len())?;
    if probs.is_empty() {
        return Err(Error::Usage("empty proposal batch".into()));
    }
    let mut per_example = Vec::with_capacity(probs.len());
    for (&p, &y) in probs.iter().zip(labels) {
        if !p.is_finite() {
            return Err(Error::NonFinite("proposal score"));
        }
        per_example.push(focal_term(p.clamp(0.0, 1.0), y, w).0);
    }
    let mean = per_example.iter().sum::<f64>() / probs.len() as f64;
    Ok(BatchLoss { mean, per_example })
}

/// Indices of the `k` largest losses, in descending loss order; ties go to
/// the lower index. Returns every index when the batch has at most `k`.
pub fn mine_hard(losses: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..losses.len()).collect();
    idx.sort_by(|&a, &b| losses[b].total_cmp(&losses[a]).then(a.cmp(&b)));
    idx.truncate(k.max(1));
    idx
}

#[cfg(test)]
mod tests {
    use super::*;

    const W: FocalWeights = FocalWeights {
        beta_pos: 4.0,
        beta_neg: 1.0,
    };

    #[test]
    fn perfect_positive_is_zero() {
        assert_eq!(focal_term(1.0, true, W).0, 0.0);
    }

    #[test]
    fn half_probability_hand_values() {
        // 4 * 0.25 * ln 2 and 1 * 0.25 * ln 2
        let pos = focal_term(0.5, true, W).0;
        let neg = focal_term(0.5, false, W).0;
        assert!((pos - 0.693_147_180_559_945_3).abs() < 1e-15);
        assert!((neg - 0.173_286_795_139_986_3).abs() < 1e-15);
        assert_eq!(alloc::format!("{pos:.4}"), "0.6931");
        assert_eq!(alloc::format!("{neg:.4}"), "0.1733");
    }

    #[test]
    fn clamp_keeps_loss_finite() {
        let (l, clamped) = focal_term(0.0, true, W);
        assert!(clamped);
        assert!((l - 4.0 * -libm::log(PROB_CLAMP)).abs() < 1e-9);
        let (l, clamped) = focal_term(1.0, false, W);
        assert!(clamped && l.is_finite());
    }

    #[test]
    fn gradient_matches_central_difference() {
        for &u in &[-3.0, -0.5, 0.0, 0.4, 2.5] {
            for &y in &[true, false] {
                let f = |u: f64| focal_term(crate::nn::kernels::sigmoid(u), y, W).0;
                let h = 1e-6;
                let num = (f(u + h) - f(u - h)) / (2.0 * h);
                let ana = focal_grad_logit(crate::nn::kernels::sigmoid(u), y, W);
                assert!((num - ana).abs() < 1e-7, "u={u} y={y}: {num} vs {ana}");
            }
        }
    }

    #[test]
    fn batch_loss_errors() {
        assert!(batch_loss(&[0.5], &[true, false], W).is_err());
        assert_eq!(
            batch_loss(&[f64::NAN], &[true], W),
            Err(Error::NonFinite("proposal score"))
        );
    }

    #[test]
    fn mining_examples() {
        assert_eq!(mine_hard(&[3.0, 1.0, 2.0], 2), alloc::vec![0, 2]);
        let twelve: Vec<f64> = (0..12).map(|i| i as f64).collect();
        assert_eq!(mine_hard(&twelve, 30).len(), 12);
        // ties: lower index first
        assert_eq!(mine_hard(&[1.0, 1.0, 1.0], 2), alloc::vec![0, 1]);
    }
}
