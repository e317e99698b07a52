//! Discontinuous leverage: the cojump covariation estimator, its
//! self-scaling test, the cojump correlation and the Benjamini-Hochberg
//! step-up rule.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pipeline::JumpEvent;
use crate::stats::{self, TestResult};

/// Reporting scale for DLE values.
pub const DLE_SCALE: f64 = 1e7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DleResult {
    pub dle: f64,
    pub selfscale_var: f64,
    pub stat: f64,
    pub pvalue: f64,
    pub corr: f64,
    /// Sum of squared price jumps.
    pub qv_price: f64,
    /// Sum of squared volatility jumps.
    pub qv_vol: f64,
    pub n_jumps: usize,
    /// Per-event products `dx * d(sig2)`.
    pub contributions: Vec<f64>,
}

/// Sums over the events whose increment exceeds `max(a^2, threshold)`.
/// Without events every field is zero and the p-value is one.
pub fn estimate_dle(events: &[JumpEvent], a: f64) -> DleResult {
    let kept: Vec<&JumpEvent> = events
        .iter()
        .filter(|e| e.qv_inc > (a * a).max(e.threshold))
        .collect();
    let contributions: Vec<f64> = kept.iter().map(|e| e.dx_hat * e.vol_jump_size()).collect();
    let dle: f64 = contributions.iter().sum();
    let selfscale_var: f64 = kept
        .iter()
        .map(|e| {
            e.dx_hat.powi(2) * 8.0 * e.eta * (e.sig2_right.max(0.0).powf(1.5) + e.sig2_left.max(0.0).powf(1.5))
        })
        .sum();
    let qv_price: f64 = kept.iter().map(|e| e.dx_hat.powi(2)).sum();
    let qv_vol: f64 = kept.iter().map(|e| e.vol_jump_size().powi(2)).sum();
    let denom = (qv_price * qv_vol).sqrt();
    let corr = if denom > 0.0 { (dle / denom).clamp(-1.0, 1.0) } else { 0.0 };
    let rate = kept.first().map_or(1.0, |e| e.rate);
    let mut out = DleResult {
        dle,
        selfscale_var,
        stat: 0.0,
        pvalue: 1.0,
        corr,
        qv_price,
        qv_vol,
        n_jumps: kept.len(),
        contributions,
    };
    if let Ok(t) = dle_test(&out, rate) {
        out.stat = t.stat;
        out.pvalue = t.pvalue;
    }
    out
}

/// `rate * dle / sqrt(selfscale_var)`.
pub fn dle_test(result: &DleResult, rate: f64) -> Result<TestResult> {
    if result.dle == 0.0 {
        return Ok(TestResult {
            stat: 0.0,
            variance: result.selfscale_var,
            pvalue: 1.0,
        });
    }
    if !(result.selfscale_var > 0.0) {
        return Err(Error::DegenerateVariance(format!(
            "self-scaling variance {} with dle {}",
            result.selfscale_var, result.dle
        )));
    }
    Ok(TestResult::from_stat(
        rate * result.dle / result.selfscale_var.sqrt(),
        result.selfscale_var,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiasVariance {
    pub bias: f64,
    pub variance: f64,
}

pub const MIN_REPLICATIONS: usize = 100;

/// Bias and variance of DLE estimates around `truth`, both on the reporting
/// scale.
pub fn dle_bias_variance(estimates: &[f64], truth: f64) -> Result<BiasVariance> {
    if estimates.len() < MIN_REPLICATIONS {
        return Err(Error::TooShort {
            needed: MIN_REPLICATIONS,
            got: estimates.len(),
        });
    }
    let scaled: Vec<f64> = estimates.iter().map(|v| v * DLE_SCALE).collect();
    Ok(BiasVariance {
        bias: stats::mean(&scaled) - truth * DLE_SCALE,
        variance: stats::variance(&scaled),
    })
}

/// Benjamini-Hochberg step-up: with `p_(1) <= ... <= p_(m)`, rejects the
/// hypotheses of ranks `1..=i` for the largest `i` with `p_(i) <= i alpha / m`.
pub fn bh_stepup(pvalues: &[f64], alpha: f64) -> Vec<bool> {
    let m = pvalues.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| pvalues[a].total_cmp(&pvalues[b]));
    let cut = (1..=m)
        .rev()
        .find(|&i| pvalues[order[i - 1]] <= i as f64 * alpha / m as f64)
        .unwrap_or(0);
    let mut reject = vec![false; m];
    for &idx in &order[..cut] {
        reject[idx] = true;
    }
    reject
}

/// Events whose volatility-jump test survives BH at level `alpha`.
pub fn significant_vol_jumps(events: &[JumpEvent], alpha: f64) -> Vec<JumpEvent> {
    let p: Vec<f64> = events.iter().map(|e| e.vol_jump.pvalue).collect();
    events
        .iter()
        .zip(bh_stepup(&p, alpha))
        .filter(|(_, keep)| *keep)
        .map(|(e, _)| e.clone())
        .collect()
}
