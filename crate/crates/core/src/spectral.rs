//! Spectral sine-basis statistics, pilot estimators, adaptive weights and the
//! spectral price-jump estimator and test.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::TickSeries;
use crate::stats::TestResult;

const EDGE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Side {
    Left,
    Right,
}

/// Variance used to standardize the jump estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum AvarRule {
    /// Exact variance of the weighted sum under the plug-in weights, which
    /// converges to the asymptotic one as the cut-off grows.
    #[default]
    FiniteSample,
    /// `2 sqrt((sig2_left + sig2_right) / 2) eta`.
    Asymptotic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralConfig {
    /// Window constant in `h = kappa log(n) / sqrt(n)`.
    pub kappa: f64,
    /// Explicit window length, overriding `kappa`.
    pub h: Option<f64>,
    /// Number of odd frequencies `1, 3, ..., 2J - 1`; default `round(5 log n)`.
    pub cutoff: Option<usize>,
    /// Truncation exponent in `u = h^varpi`.
    pub varpi: f64,
    /// Constant in the pilot bin count `ceil(scale n^{1/4} / log n)`.
    pub pilot_scale: f64,
    /// Explicit pilot bin count per side.
    pub pilot_bins: Option<usize>,
    /// Highest frequency averaged by the pilot.
    pub pilot_freqs: usize,
    /// Floor applied to pilot squared volatilities.
    pub sig2_floor: f64,
    /// Passes re-estimating the pilot bins with adaptive frequency weights.
    pub pilot_refinements: usize,
    pub avar: AvarRule,
}

impl Default for SpectralConfig {
    fn default() -> Self {
        Self {
            kappa: 5.0 / 12.0,
            h: None,
            cutoff: None,
            varpi: 0.35,
            pilot_scale: 3.0,
            pilot_bins: None,
            pilot_freqs: 10,
            sig2_floor: 1e-10,
            pilot_refinements: 2,
            avar: AvarRule::FiniteSample,
        }
    }
}

impl SpectralConfig {
    pub fn moderate_noise() -> Self {
        Self::default()
    }

    pub fn large_noise() -> Self {
        Self {
            kappa: 2.0 / 3.0,
            ..Self::default()
        }
    }

    pub fn window(&self, n: usize) -> f64 {
        self.h
            .unwrap_or_else(|| self.kappa * (n as f64).ln() / (n as f64).sqrt())
    }

    pub fn cutoff(&self, n: usize) -> usize {
        self.cutoff
            .unwrap_or_else(|| (5.0 * (n as f64).ln()).round() as usize)
            .max(1)
    }

    pub fn pilot_bin_count(&self, n: usize) -> usize {
        self.pilot_bins.unwrap_or_else(|| {
            let nf = n as f64;
            (self.pilot_scale * nf.powf(0.25) / nf.ln()).ceil() as usize
        })
        .max(1)
    }

    pub fn threshold(&self, h: f64) -> f64 {
        h.powf(self.varpi)
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        let h = self.window(n);
        if !(h > 0.0 && h < 1.0) {
            return Err(Error::InvalidInput(format!("window length {h} outside (0, 1)")));
        }
        if !(self.varpi > 0.0 && self.varpi < 1.0) {
            return Err(Error::InvalidInput(format!("varpi {} outside (0, 1)", self.varpi)));
        }
        if self.pilot_freqs == 0 || !(self.sig2_floor > 0.0) {
            return Err(Error::InvalidInput("pilot settings must be positive".into()));
        }
        Ok(())
    }
}

/// `sqrt(2/h) sin(j pi (t - (tau - h/2)) / h)` on `[tau - h/2, tau + h/2]`, zero outside.
pub fn sine_basis(j: usize, tau: f64, h: f64, t: f64) -> Result<f64> {
    if j == 0 {
        return Err(Error::InvalidInput("frequency must be at least 1".into()));
    }
    let lo = tau - 0.5 * h;
    if t < lo || t > lo + h {
        return Ok(0.0);
    }
    Ok((2.0 / h).sqrt() * (j as f64 * PI * (t - lo) / h).sin())
}

/// Variance factor of the noise part of the frequency-`j` statistic per unit
/// noise variance: `pi^2 j^2 / (h^2 n)`.
#[inline]
pub fn noise_factor(j: usize, h: f64, n: usize) -> f64 {
    let jf = j as f64;
    PI * PI * jf * jf / (h * h * n as f64)
}

/// Spectral statistics `S_1, ..., S_jmax` on the window `[lo, lo + h]`.
///
/// Every return with midpoint in the window contributes; the sines are
/// generated by the Chebyshev recurrence.
pub fn window_stats(ts: &TickSeries, lo: f64, h: f64, jmax: usize) -> Result<Vec<f64>> {
    let hi = lo + h;
    if lo < -EDGE_TOL || hi > 1.0 + EDGE_TOL {
        return Err(Error::WindowOutOfBounds { lo, hi });
    }
    let range = ts.returns_in(lo, hi);
    if range.is_empty() {
        return Err(Error::EmptyWindow { lo, hi });
    }
    let norm = (2.0 / h).sqrt();
    let mut out = vec![0.0; jmax];
    for i in range {
        let x = PI * (ts.mid(i) - lo) / h;
        let r = ts.ret(i) * norm;
        let two_cos = 2.0 * x.cos();
        let (mut prev, mut cur) = (0.0, x.sin());
        for s in out.iter_mut() {
            *s += r * cur;
            let next = two_cos * cur - prev;
            prev = cur;
            cur = next;
        }
    }
    Ok(out)
}

/// `sum_i dY_i Phi_{j,tau}(midpoint_i)` over the window centred at `tau`.
pub fn spectral_statistic(ts: &TickSeries, tau: f64, h: f64, j: usize) -> Result<f64> {
    if j == 0 {
        return Err(Error::InvalidInput("frequency must be at least 1".into()));
    }
    Ok(window_stats(ts, tau - 0.5 * h, h, j)?[j - 1])
}

/// `-(1/n) sum dY_i dY_{i-1}`, floored at zero.
pub fn estimate_noise_variance(ts: &TickSeries) -> Result<f64> {
    let n = ts.n();
    if n < 3 {
        return Err(Error::TooShort { needed: 4, got: n + 1 });
    }
    Ok(local_noise_variance(ts, 1..n + 1) * (n - 1) as f64 / n as f64)
}

/// First-order autocovariance estimator applied to the returns in `range`,
/// normalized by the number of adjacent pairs and floored at zero.
pub fn local_noise_variance(ts: &TickSeries, range: std::ops::Range<usize>) -> f64 {
    if range.len() < 2 {
        return 0.0;
    }
    let pairs = range.len() - 1;
    let acov: f64 = (range.start + 1..range.end)
        .map(|i| ts.ret(i) * ts.ret(i - 1))
        .sum();
    (-acov / pairs as f64).max(0.0)
}

/// Truncated mean of per-bin values, dropping those with `h |v| > u level`.
/// `level` is the variance scale the values are measured against.
pub fn truncated_mean(values: &[f64], h: f64, u: f64, level: f64) -> Result<f64> {
    let kept: Vec<f64> = values.iter().copied().filter(|v| h * v.abs() <= u * level).collect();
    if kept.is_empty() {
        return Err(Error::AllBinsTruncated(values.len()));
    }
    Ok(kept.iter().sum::<f64>() / kept.len() as f64)
}

/// Median absolute low-frequency bin estimate over a partition of the sample
/// into windows of length `h`, floored at `floor`. Robust to a few jump bins.
pub fn variance_level(ts: &TickSeries, h: f64, jp: usize, eta2: f64, floor: f64) -> Result<f64> {
    let n = ts.n();
    let bins = ((1.0 + EDGE_TOL) / h).floor() as usize;
    let values = (0..bins.max(1))
        .map(|k| {
            let s = window_stats(ts, k as f64 * h, h, jp)?;
            Ok(bias_corrected(&s, &vec![1.0 / jp as f64; jp], h, n, eta2).abs())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(median(&values).max(floor))
}

pub(crate) fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Pilot spot squared volatility from whole bins of width `h` adjacent to the
/// jump window centred at `tau`.
pub fn pilot_spot_vol(
    ts: &TickSeries,
    tau: f64,
    side: Side,
    cfg: &SpectralConfig,
    eta2: f64,
) -> Result<f64> {
    let n = ts.n();
    let h = cfg.window(n);
    let level = variance_level(ts, h, cfg.pilot_freqs, eta2, cfg.sig2_floor)?;
    pilot_with_level(ts, tau, side, cfg, eta2, level)
}

fn pilot_with_level(ts: &TickSeries, tau: f64, side: Side, cfg: &SpectralConfig, eta2: f64, level: f64) -> Result<f64> {
    let n = ts.n();
    let h = cfg.window(n);
    let values = pilot_bins(ts, tau, side, cfg, cfg.pilot_freqs)?
        .iter()
        .map(|s| bias_corrected(s, &vec![1.0 / s.len() as f64; s.len()], h, n, eta2))
        .collect::<Vec<_>>();
    Ok(truncated_mean(&values, h, cfg.threshold(h), level)?.max(cfg.sig2_floor))
}

/// [`pilot_spot_vol`] followed by `cfg.pilot_refinements` passes that
/// re-estimate every bin with adaptive weights over the full cut-off, using
/// the previous estimate in the weights.
pub fn refined_spot_vol(
    ts: &TickSeries,
    tau: f64,
    side: Side,
    cfg: &SpectralConfig,
    eta2: f64,
) -> Result<f64> {
    let n = ts.n();
    let h = cfg.window(n);
    let level = variance_level(ts, h, cfg.pilot_freqs, eta2, cfg.sig2_floor)?;
    let mut sig2 = pilot_with_level(ts, tau, side, cfg, eta2, level)?;
    if cfg.pilot_refinements == 0 {
        return Ok(sig2);
    }
    let stats = pilot_bins(ts, tau, side, cfg, cfg.cutoff(n))?;
    for _ in 0..cfg.pilot_refinements {
        let w = adaptive_weights(sig2, eta2, h, n, cfg.cutoff(n));
        let values: Vec<f64> = stats.iter().map(|s| bias_corrected(s, &w, h, n, eta2)).collect();
        sig2 = truncated_mean(&values, h, cfg.threshold(h), level)?.max(cfg.sig2_floor);
    }
    Ok(sig2)
}

fn pilot_bins(ts: &TickSeries, tau: f64, side: Side, cfg: &SpectralConfig, jmax: usize) -> Result<Vec<Vec<f64>>> {
    let n = ts.n();
    let h = cfg.window(n);
    let bins = cfg.pilot_bin_count(n);
    (1..=bins)
        .map(|k| {
            let centre = match side {
                Side::Left => tau - k as f64 * h,
                Side::Right => tau + k as f64 * h,
            };
            let lo = centre - 0.5 * h;
            if lo < -EDGE_TOL || lo + h > 1.0 + EDGE_TOL {
                return Err(Error::InsufficientBins {
                    side: side_name(side),
                    needed: bins,
                    available: k - 1,
                });
            }
            window_stats(ts, lo, h, jmax)
        })
        .collect()
}

/// `sum_j w_j (S_j^2 - pi^2 j^2 eta2 / (h^2 n))`.
pub fn bias_corrected(stats: &[f64], weights: &[f64], h: f64, n: usize, eta2: f64) -> f64 {
    stats
        .iter()
        .zip(weights)
        .enumerate()
        .map(|(k, (s, w))| w * (s * s - noise_factor(k + 1, h, n) * eta2))
        .sum()
}

/// Weights proportional to `(sig2 + pi^2 j^2 eta2 / (h^2 n))^{-2}` for
/// `j = 1..=cutoff`, normalized.
pub fn adaptive_weights(sig2: f64, eta2: f64, h: f64, n: usize, cutoff: usize) -> Vec<f64> {
    let raw: Vec<f64> = (1..=cutoff)
        .map(|j| (sig2 + noise_factor(j, h, n) * eta2).powi(-2))
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

pub(crate) fn side_name(side: Side) -> &'static str {
    match side {
        Side::Left => "left",
        Side::Right => "right",
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PilotEstimates {
    pub eta2: f64,
    pub sig2_left: f64,
    pub sig2_right: f64,
}

impl PilotEstimates {
    /// Global noise variance and refined pilot volatilities on both sides
    /// of `tau`.
    pub fn estimate(ts: &TickSeries, tau: f64, cfg: &SpectralConfig) -> Result<Self> {
        let eta2 = estimate_noise_variance(ts)?;
        Ok(Self {
            eta2,
            sig2_left: refined_spot_vol(ts, tau, Side::Left, cfg, eta2)?,
            sig2_right: refined_spot_vol(ts, tau, Side::Right, cfg, eta2)?,
        })
    }
}

/// Inverse-variance weights of the odd frequencies `1, 3, ..., 2J - 1`,
/// normalized to sum to one.
pub fn oracle_weights(
    sig2_left: f64,
    sig2_right: f64,
    eta2: f64,
    h: f64,
    n: usize,
    cutoff: usize,
) -> Result<Vec<f64>> {
    Ok(normalize(&odd_variances(sig2_left, sig2_right, eta2, h, n, cutoff, 1.0)?))
}

fn odd_variances(
    sig2_left: f64,
    sig2_right: f64,
    eta2: f64,
    h: f64,
    n: usize,
    cutoff: usize,
    spacing: f64,
) -> Result<Vec<f64>> {
    if !(sig2_left > 0.0 && sig2_right > 0.0 && eta2 >= 0.0 && h > 0.0) || cutoff == 0 {
        return Err(Error::DegenerateVariance(format!(
            "weight inputs sig2=({sig2_left}, {sig2_right}), eta2={eta2}, h={h}, J={cutoff}"
        )));
    }
    let sig2 = 0.5 * (sig2_left + sig2_right);
    Ok((1..=cutoff)
        .map(|j| sig2 + noise_factor(2 * j - 1, h, n) * eta2 * spacing)
        .collect())
}

fn normalize(variances: &[f64]) -> Vec<f64> {
    let inv: Vec<f64> = variances.iter().map(|v| 1.0 / v).collect();
    let total: f64 = inv.iter().sum();
    inv.into_iter().map(|w| w / total).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpEstimate {
    pub value: f64,
    /// Asymptotic variance of `n^{1/4} (value - jump)`.
    pub avar: f64,
    /// Exact variance of `n^{1/4} (value - jump)` under the plug-in weights.
    pub avar_finite: f64,
    pub rate_factor: f64,
    pub h: f64,
    pub weights: Vec<f64>,
}

impl JumpEstimate {
    pub fn variance(&self, rule: AvarRule) -> f64 {
        match rule {
            AvarRule::FiniteSample => self.avar_finite,
            AvarRule::Asymptotic => self.avar,
        }
    }
}

/// Weighted alternating sum of odd-frequency statistics on the window centred
/// at `tau`, rescaled so that a jump at `tau` is recovered.
pub fn spectral_jump_estimator(
    ts: &TickSeries,
    tau: f64,
    cfg: &SpectralConfig,
    pilots: &PilotEstimates,
) -> Result<JumpEstimate> {
    let n = ts.n();
    let h = cfg.window(n);
    let cutoff = cfg.cutoff(n);
    let lo = tau - 0.5 * h;
    let spacing = ts.local_spacing_factor(lo, lo + h);
    let vars = odd_variances(
        pilots.sig2_left,
        pilots.sig2_right,
        pilots.eta2,
        h,
        n,
        cutoff,
        spacing,
    )?;
    let weights = normalize(&vars);
    let s = window_stats(ts, lo, h, 2 * cutoff - 1)?;
    let value = (h / 2.0).sqrt()
        * weights
            .iter()
            .enumerate()
            .map(|(j, a)| if j % 2 == 0 { a * s[2 * j] } else { -a * s[2 * j] })
            .sum::<f64>();
    let sig = (0.5 * (pilots.sig2_left + pilots.sig2_right)).sqrt();
    let avar = 2.0 * sig * pilots.eta2.sqrt() * spacing.sqrt();
    let inv_total: f64 = vars.iter().map(|v| 1.0 / v).sum();
    let avar_finite = (n as f64).sqrt() * (h / 2.0) / inv_total;
    Ok(JumpEstimate {
        value,
        avar,
        avar_finite,
        rate_factor: (n as f64).powf(0.25),
        h,
        weights,
    })
}

pub fn spectral_jump_test(
    ts: &TickSeries,
    tau: f64,
    cfg: &SpectralConfig,
    pilots: &PilotEstimates,
) -> Result<TestResult> {
    let est = spectral_jump_estimator(ts, tau, cfg, pilots)?;
    Ok(standardize(&est, cfg.avar))
}

pub fn standardize(est: &JumpEstimate, rule: AvarRule) -> TestResult {
    let var = est.variance(rule);
    TestResult::from_stat(est.rate_factor * est.value / var.sqrt(), var)
}
