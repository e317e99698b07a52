//! Bin-wise adaptive spectral spot volatility and the volatility-jump test.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::TickSeries;
pub use crate::spectral::adaptive_weights;
use crate::spectral::{self, bias_corrected, side_name, truncated_mean, Side};
use crate::stats::TestResult;

/// Normalizing rate of the spot-volatility difference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum RateRule {
    /// `sqrt(m h sqrt(n))` for `m` averaged bins of width `h`, the rate the
    /// chosen bin counts actually deliver.
    #[default]
    Realized,
    /// `n^{beta / 2}`.
    Beta(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpotVolConfig {
    /// Bins partitioning `[0, 1]`; default `floor(3 sqrt(n) / log n)`.
    pub bins: Option<usize>,
    /// Bins averaged per side; default `ceil(3 n^{1/4} / log n)`.
    pub span: Option<usize>,
    /// Frequencies per bin; default `round(5 log n)`.
    pub cutoff: Option<usize>,
    pub varpi: f64,
    pub pilot_freqs: usize,
    pub sig2_floor: f64,
    /// Passes re-estimating pilot bins with adaptive frequency weights.
    pub pilot_refinements: usize,
    pub beta: f64,
    pub rate: RateRule,
}

impl Default for SpotVolConfig {
    fn default() -> Self {
        Self {
            bins: None,
            span: None,
            cutoff: None,
            varpi: 0.35,
            pilot_freqs: 10,
            sig2_floor: 1e-10,
            pilot_refinements: 2,
            beta: 0.2,
            rate: RateRule::Realized,
        }
    }
}

pub fn default_bin_count(n: usize) -> usize {
    let nf = n as f64;
    (3.0 * nf.sqrt() / nf.ln()).floor() as usize
}

impl SpotVolConfig {
    pub fn bin_count(&self, n: usize) -> usize {
        self.bins.unwrap_or_else(|| default_bin_count(n))
    }

    pub fn span(&self, n: usize) -> usize {
        self.span
            .unwrap_or_else(|| {
                let nf = n as f64;
                (3.0 * nf.powf(0.25) / nf.ln()).ceil() as usize
            })
            .max(1)
    }

    pub fn cutoff(&self, n: usize) -> usize {
        self.cutoff
            .unwrap_or_else(|| (5.0 * (n as f64).ln()).round() as usize)
            .max(1)
    }

    pub fn rate(&self, n: usize) -> f64 {
        let nf = n as f64;
        match self.rate {
            RateRule::Realized => {
                let h = 1.0 / self.bin_count(n) as f64;
                (self.span(n) as f64 * h * nf.sqrt()).sqrt()
            }
            RateRule::Beta(beta) => nf.powf(beta / 2.0),
        }
    }
}

/// Spectral statistics `S_{jk}` for all bins `[k/K, (k+1)/K]`.
#[derive(Debug, Clone)]
pub struct BinStats {
    pub h: f64,
    pub n: usize,
    stats: Vec<Vec<f64>>,
}

impl BinStats {
    pub fn compute(ts: &TickSeries, bins: usize, cutoff: usize) -> Result<Self> {
        if bins < 1 {
            return Err(Error::InvalidInput("need at least one bin".into()));
        }
        let h = 1.0 / bins as f64;
        let stats = (0..bins)
            .map(|k| spectral::window_stats(ts, k as f64 * h, h, cutoff))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { h, n: ts.n(), stats })
    }

    pub fn bins(&self) -> usize {
        self.stats.len()
    }

    pub fn stats(&self, k: usize) -> &[f64] {
        &self.stats[k]
    }

    fn check(&self, k: usize) -> Result<()> {
        if k >= self.bins() {
            return Err(Error::IndexOutOfRange {
                index: k,
                max: self.bins() - 1,
            });
        }
        Ok(())
    }

    /// Unweighted mean of bias-corrected squares over frequencies `1..=jp`.
    pub fn pilot(&self, k: usize, jp: usize, eta2: f64) -> Result<f64> {
        self.check(k)?;
        let s = &self.stats[k];
        let jp = jp.min(s.len());
        Ok(bias_corrected(&s[..jp], &vec![1.0 / jp as f64; jp], self.h, self.n, eta2))
    }

    /// Median absolute per-bin pilot: the variance scale for truncation.
    pub fn level(&self, jp: usize, eta2: f64, floor: f64) -> Result<f64> {
        let values = (0..self.bins())
            .map(|k| self.pilot(k, jp, eta2).map(f64::abs))
            .collect::<Result<Vec<_>>>()?;
        Ok(spectral::median(&values).max(floor))
    }

    /// Adaptive weighted bias-corrected squared statistics on bin `k`.
    pub fn adaptive(&self, k: usize, sig2: f64, eta2: f64) -> Result<f64> {
        self.check(k)?;
        let w = adaptive_weights(sig2, eta2, self.h, self.n, self.stats[k].len());
        Ok(bias_corrected(&self.stats[k], &w, self.h, self.n, eta2))
    }
}

/// `zeta_ad` on bin `k`, with the pilot volatility taken from that bin alone.
pub fn bin_adaptive_stat(ts: &TickSeries, k: usize, cfg: &SpotVolConfig, eta2: f64) -> Result<f64> {
    let n = ts.n();
    let bins = cfg.bin_count(n);
    if k >= bins {
        return Err(Error::IndexOutOfRange { index: k, max: bins - 1 });
    }
    let h = 1.0 / bins as f64;
    let cutoff = cfg.cutoff(n);
    let s = spectral::window_stats(ts, k as f64 * h, h, cutoff)?;
    let one = BinStats {
        h,
        n,
        stats: vec![s],
    };
    let pilot = one.pilot(0, cfg.pilot_freqs, eta2)?.max(cfg.sig2_floor);
    one.adaptive(0, pilot, eta2)
}

/// Truncated pilot over the bins in `range`: the unweighted low-frequency
/// average, then `cfg.pilot_refinements` adaptive re-estimations.
pub fn refined_pilot(
    stats: &BinStats,
    range: std::ops::Range<usize>,
    cfg: &SpotVolConfig,
    eta2: f64,
    level: f64,
) -> Result<f64> {
    let h = stats.h;
    let u = h.powf(cfg.varpi);
    let raw = range
        .clone()
        .map(|k| stats.pilot(k, cfg.pilot_freqs, eta2))
        .collect::<Result<Vec<_>>>()?;
    let mut sig2 = truncated_mean(&raw, h, u, level)?.max(cfg.sig2_floor);
    for _ in 0..cfg.pilot_refinements {
        let values = range
            .clone()
            .map(|k| stats.adaptive(k, sig2, eta2))
            .collect::<Result<Vec<_>>>()?;
        sig2 = truncated_mean(&values, h, u, level)?.max(cfg.sig2_floor);
    }
    Ok(sig2)
}

/// Spot volatility on one side of a time point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SideEstimate {
    pub sig2: f64,
    pub pilot: f64,
    /// Noise variance estimated from the returns in the averaging span.
    pub eta2_local: f64,
    pub kept: usize,
}

/// Bin containing `tau`.
pub fn bin_of(tau: f64, bins: usize) -> usize {
    ((tau * bins as f64).floor() as usize).min(bins - 1)
}

/// Bins averaged on `side` of bin `b`, excluding `b` itself.
pub fn side_bins(b: usize, span: usize, bins: usize, side: Side) -> Result<std::ops::Range<usize>> {
    let range = match side {
        Side::Left if b >= span => b - span..b,
        Side::Right if b + span < bins => b + 1..b + 1 + span,
        _ => {
            let available = match side {
                Side::Left => b,
                Side::Right => bins - 1 - b,
            };
            return Err(Error::InsufficientBins {
                side: side_name(side),
                needed: span,
                available,
            });
        }
    };
    Ok(range)
}

/// Spot volatility from precomputed bin statistics around bin `b`.
pub fn side_estimate(
    ts: &TickSeries,
    stats: &BinStats,
    b: usize,
    side: Side,
    cfg: &SpotVolConfig,
    eta2: f64,
) -> Result<SideEstimate> {
    let span = cfg.span(ts.n());
    let range = side_bins(b, span, stats.bins(), side)?;
    let h = stats.h;
    let u = h.powf(cfg.varpi);
    let level = stats.level(cfg.pilot_freqs, eta2, cfg.sig2_floor)?;
    let pilot = refined_pilot(stats, range.clone(), cfg, eta2, level)?;
    let zetas = range
        .clone()
        .map(|k| stats.adaptive(k, pilot, eta2))
        .collect::<Result<Vec<_>>>()?;
    let kept = zetas.iter().filter(|z| h * z.abs() <= u * level).count();
    let sig2 = truncated_mean(&zetas, h, u, level)?.max(0.0);
    let lo = range.start as f64 * h;
    let hi = range.end as f64 * h;
    let eta2_local = spectral::local_noise_variance(ts, ts.returns_in(lo, hi));
    Ok(SideEstimate {
        sig2,
        pilot,
        eta2_local,
        kept,
    })
}

/// Spot squared volatility averaged over the bins strictly left or right of
/// the bin containing `tau`.
pub fn spot_vol(ts: &TickSeries, tau: f64, side: Side, cfg: &SpotVolConfig, eta2: f64) -> Result<f64> {
    let n = ts.n();
    let stats = BinStats::compute(ts, cfg.bin_count(n), cfg.cutoff(n))?;
    let b = bin_of(tau, stats.bins());
    Ok(side_estimate(ts, &stats, b, side, cfg, eta2)?.sig2)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpotVolEstimate {
    pub sig2_left: f64,
    pub sig2_right: f64,
    pub r_inv: usize,
    /// `8 (sigma_right^3 + sigma_left^3) eta`.
    pub avar: f64,
    pub eta: f64,
    pub rate: f64,
    pub beta: f64,
}

impl SpotVolEstimate {
    pub fn from_sides(left: &SideEstimate, right: &SideEstimate, r_inv: usize, rate: f64, beta: f64) -> Self {
        let eta = (0.5 * (left.eta2_local + right.eta2_local)).sqrt();
        Self {
            sig2_left: left.sig2,
            sig2_right: right.sig2,
            r_inv,
            avar: 8.0 * (left.sig2.powf(1.5) + right.sig2.powf(1.5)) * eta,
            eta,
            rate,
            beta,
        }
    }

    pub fn jump(&self) -> f64 {
        self.sig2_right - self.sig2_left
    }

    pub fn test(&self) -> Result<TestResult> {
        vol_jump_stat(self.sig2_left, self.sig2_right, self.eta, self.rate)
    }
}

/// Both sides of `tau` with the rate and variance needed for testing.
pub fn estimate_spot_vols(ts: &TickSeries, tau: f64, cfg: &SpotVolConfig, eta2: f64) -> Result<SpotVolEstimate> {
    let n = ts.n();
    let stats = BinStats::compute(ts, cfg.bin_count(n), cfg.cutoff(n))?;
    let b = bin_of(tau, stats.bins());
    let left = side_estimate(ts, &stats, b, Side::Left, cfg, eta2)?;
    let right = side_estimate(ts, &stats, b, Side::Right, cfg, eta2)?;
    Ok(SpotVolEstimate::from_sides(&left, &right, cfg.span(n), cfg.rate(n), cfg.beta))
}

/// `rate (right - left) / sqrt(8 (right^{3/2} + left^{3/2}) eta)`.
pub fn vol_jump_stat(sig2_left: f64, sig2_right: f64, eta: f64, rate: f64) -> Result<TestResult> {
    let var = 8.0 * (sig2_left.max(0.0).powf(1.5) + sig2_right.max(0.0).powf(1.5)) * eta;
    let diff = sig2_right - sig2_left;
    if diff == 0.0 {
        return Ok(TestResult {
            stat: 0.0,
            variance: var,
            pvalue: 1.0,
        });
    }
    if !(var > 0.0) {
        return Err(Error::DegenerateVariance(format!(
            "volatility-jump variance {var} with difference {diff}"
        )));
    }
    Ok(TestResult::from_stat(rate * diff / var.sqrt(), var))
}

pub fn vol_jump_test(ts: &TickSeries, tau: f64, cfg: &SpotVolConfig, eta2: f64) -> Result<TestResult> {
    estimate_spot_vols(ts, tau, cfg, eta2)?.test()
}
