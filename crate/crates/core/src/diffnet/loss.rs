//! Per-cell losses in `f64` with their gradients.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::evidential::SubjectiveLogicConfig;

/// Floor applied to probabilities inside logarithms.
pub const PROB_FLOOR: f64 = 1e-12;

pub fn softmax3(z: [f64; 3]) -> [f64; 3] {
    let m = z[0].max(z[1]).max(z[2]);
    let e = z.map(|v| libm::exp(v - m));
    let s = e[0] + e[1] + e[2];
    e.map(|v| v / s)
}

/// Cross-entropy of `softmax(z)` against target masses and its gradient
/// with respect to `z`.
pub fn softmax_ce_cell(z: [f64; 3], t: [f64; 3]) -> (f64, [f64; 3]) {
    let p = softmax3(z);
    let mut loss = 0.0;
    // Only unfloored terms depend on z.
    let mut live_mass = 0.0;
    for k in 0..3 {
        loss -= t[k] * libm::log(p[k].max(PROB_FLOOR));
        if p[k] >= PROB_FLOOR {
            live_mass += t[k];
        }
    }
    let mut g = [0.0; 3];
    for j in 0..3 {
        let own = if p[j] >= PROB_FLOOR { t[j] } else { 0.0 };
        g[j] = p[j] * live_mass - own;
    }
    (loss, g)
}

/// Evidential risk of one cell for evidence `e = (e_f, e_o)`, target
/// `(b_f, b_o, u)` and base rate `a`, with its gradient in `e`:
///
/// `[Σ_k (t_k − p_k)² + p_k(1 − p_k)/(S + 1)]·(t_f + t_o) + (1 − u)²·t_u`
pub fn evidential_cell(e: [f64; 2], t: [f64; 3], a: [f64; 2]) -> (f64, [f64; 2]) {
    let k = 2.0;
    let alpha = [e[0] + k * a[0], e[1] + k * a[1]];
    let s = k + (e[0] + e[1]);
    let p = [alpha[0] / s, alpha[1] / s];
    let u = k / s;
    let known = t[0] + t[1];

    let mut risk = 0.0;
    let mut d_risk = [0.0; 2];
    for c in 0..2 {
        let var = p[c] * (1.0 - p[c]) / (s + 1.0);
        risk += (t[c] - p[c]) * (t[c] - p[c]) + var;
        for j in 0..2 {
            let dp = ((c == j) as u8 as f64 - p[c]) / s;
            let d_sq = -2.0 * (t[c] - p[c]) * dp;
            let d_var = ((1.0 - 2.0 * p[c]) * dp * (s + 1.0) - p[c] * (1.0 - p[c])) / ((s + 1.0) * (s + 1.0));
            d_risk[j] += d_sq + d_var;
        }
    }
    let unk = (1.0 - u) * (1.0 - u);
    let d_unk = 2.0 * (1.0 - u) * u / s;
    let loss = risk * known + unk * t[2];
    (loss, [d_risk[0] * known + d_unk * t[2], d_risk[1] * known + d_unk * t[2]])
}

fn check_len(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::Shape(alloc::format!("{a} predictions for {b} targets")));
    }
    Ok(())
}

/// Mean cross-entropy of per-cell probabilities against target masses.
pub fn loss_softmax_ce(probs: &[[f64; 3]], targets: &[[f64; 3]]) -> Result<f64> {
    check_len(probs.len(), targets.len())?;
    if probs.is_empty() {
        return Ok(0.0);
    }
    let total: f64 = probs
        .iter()
        .zip(targets)
        .map(|(p, t)| -(0..3).map(|k| t[k] * libm::log(p[k].max(PROB_FLOOR))).sum::<f64>())
        .sum();
    Ok(total / probs.len() as f64)
}

/// Mean evidential risk of per-cell two-class evidence.
pub fn loss_evidential(evidence: &[[f64; 2]], targets: &[[f64; 3]], cfg: &SubjectiveLogicConfig) -> Result<f64> {
    check_len(evidence.len(), targets.len())?;
    if cfg.classes() != 2 {
        return Err(Error::Config("evidential loss needs a two-class configuration".into()));
    }
    if evidence.is_empty() {
        return Ok(0.0);
    }
    let a = [cfg.base_rate()[0], cfg.base_rate()[1]];
    let total: f64 = evidence.iter().zip(targets).map(|(e, t)| evidential_cell(*e, *t, a).0).sum();
    Ok(total / evidence.len() as f64)
}

/// Channel-wise softmax of three-channel logits given as rows.
pub fn softmax_rows(z: &[[f64; 3]]) -> Vec<[f64; 3]> {
    z.iter().map(|&v| softmax3(v)).collect()
}
