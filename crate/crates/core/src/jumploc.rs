//! Jump-bin detection by bin-wise thresholding, sub-interval refinement of the
//! jump time and jump-size estimation with the jump window cut out.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::TickSeries;
use crate::spectral::{self, noise_factor, JumpEstimate, PilotEstimates, SpectralConfig};
use crate::spotvol::{self, BinStats, SpotVolConfig};

pub const MIN_TICKS: usize = 100;

/// Partition of `[0, 1]` into `K` bins with pilot volatilities, thresholds and
/// the statistics used to locate jumps.
#[derive(Debug, Clone)]
pub struct BinGrid {
    pub h: f64,
    pub eta2: f64,
    /// Pilot spot squared volatility per bin.
    pub pilots: Vec<f64>,
    /// `2 log(K) / K * pilot` per bin.
    pub thresholds: Vec<f64>,
    pub zeta_tilde: Vec<f64>,
    pub stats: BinStats,
}

impl BinGrid {
    pub fn bins(&self) -> usize {
        self.pilots.len()
    }

    /// Start and end time of bin `k`.
    pub fn bounds(&self, k: usize) -> (f64, f64) {
        (k as f64 * self.h, (k + 1) as f64 * self.h)
    }

    /// Jump-variation increment `h zeta_k 1{zeta_k > max(neighbours)}` for
    /// interior bins; zero elsewhere.
    pub fn qv_increment(&self, k: usize) -> f64 {
        let z = &self.zeta_tilde;
        if k == 0 || k + 1 >= z.len() {
            return 0.0;
        }
        if z[k] > z[k - 1].max(z[k + 1]) {
            self.h * z[k]
        } else {
            0.0
        }
    }

    pub fn shifted_bin_stat(&self, k: usize) -> Result<f64> {
        self.zeta_tilde
            .get(k)
            .copied()
            .ok_or(Error::IndexOutOfRange {
                index: k,
                max: self.bins() - 1,
            })
    }
}

/// `floor(3 sqrt(n) / log n)`.
pub fn bin_count_rule(n: usize) -> usize {
    spotvol::default_bin_count(n)
}

/// Builds the grid: per-bin pilots from the bins just before each bin (just
/// after it near the start of the sample), thresholds, and the shifted
/// statistics.
pub fn make_bin_grid(ts: &TickSeries, cfg: &SpotVolConfig, eta2: f64) -> Result<BinGrid> {
    let n = ts.n();
    if n + 1 < MIN_TICKS {
        return Err(Error::TooShort {
            needed: MIN_TICKS,
            got: n + 1,
        });
    }
    let bins = cfg.bin_count(n);
    if bins < 3 {
        return Err(Error::TooShort {
            needed: MIN_TICKS,
            got: n + 1,
        });
    }
    let cutoff = cfg.cutoff(n);
    let stats = BinStats::compute(ts, bins, cutoff)?;
    let h = stats.h;
    let span = cfg.span(n).min(bins - 1);
    let level = stats.level(cfg.pilot_freqs, eta2, cfg.sig2_floor)?;
    let pilots = (0..bins)
        .map(|k| {
            let near = if k >= span { k - span..k } else { k + 1..(k + 1 + span).min(bins) };
            // a fully truncated neighbourhood falls back to the floor
            spotvol::refined_pilot(&stats, near, cfg, eta2, level).unwrap_or(cfg.sig2_floor)
        })
        .collect::<Vec<_>>();
    let scale = 2.0 * (bins as f64).ln() / bins as f64;
    let thresholds = pilots.iter().map(|p| scale * p).collect();
    let shifted = (1..bins)
        .map(|l| spectral::window_stats(ts, (l as f64 - 0.5) * h, h, cutoff))
        .collect::<Result<Vec<_>>>()?;
    let zeta_tilde = (0..bins)
        .map(|k| {
            let candidates = [k.checked_sub(1), (k + 1 < bins).then_some(k)];
            candidates
                .iter()
                .flatten()
                .map(|&l| odd_combined(stats.stats(k), &shifted[l], pilots[k], eta2, h, n))
                .fold(f64::NEG_INFINITY, f64::max)
                .max(0.0)
        })
        .collect();
    Ok(BinGrid {
        h,
        eta2,
        pilots,
        thresholds,
        zeta_tilde,
        stats,
    })
}

/// Odd-frequency weighted `S^2 / 2 + S_shift^2 / 2 - bias`.
fn odd_combined(s: &[f64], shifted: &[f64], sig2: f64, eta2: f64, h: f64, n: usize) -> f64 {
    let mut num = 0.0;
    let mut total = 0.0;
    for j in (1..=s.len()).step_by(2) {
        let bias = noise_factor(j, h, n) * eta2;
        let w = (sig2 + bias).powi(-2);
        num += w * (0.5 * s[j - 1].powi(2) + 0.5 * shifted[j - 1].powi(2) - bias);
        total += w;
    }
    num / total
}

/// Interior bins whose jump-variation increment exceeds `max(a^2, u_k)`.
pub fn detect_jump_bins(grid: &BinGrid, a: f64) -> Vec<usize> {
    detect_jump_bins_scaled(grid, a, 1.0)
}

/// [`detect_jump_bins`] with every bin threshold multiplied by `u_scale`.
pub fn detect_jump_bins_scaled(grid: &BinGrid, a: f64, u_scale: f64) -> Vec<usize> {
    (1..grid.bins().saturating_sub(1))
        .filter(|&k| grid.qv_increment(k) > (a * a).max(u_scale * grid.thresholds[k]))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Refinement {
    /// Observation indices bounding the cut-out window.
    pub window: (usize, usize),
    pub tau_hat: f64,
    pub subintervals: usize,
}

/// Splits bin `k` into `r` runs of returns and returns the run with the
/// largest absolute pre-averaged increment.
pub fn refine_jump_time(ts: &TickSeries, grid: &BinGrid, k: usize, r: usize) -> Result<Refinement> {
    if r == 0 {
        return Err(Error::InvalidInput("need at least one sub-interval".into()));
    }
    let (lo, hi) = grid.bounds(k);
    let returns = ts.returns_in(lo, hi);
    let nb = returns.len();
    if nb == 0 {
        return Err(Error::EmptyWindow { lo, hi });
    }
    let mut used = r;
    if nb < 2 * r {
        used = (nb / 2).max(1);
        warn!("bin {k} holds {nb} returns; using {used} sub-intervals instead of {r}");
    }
    let i0 = returns.start - 1;
    let y = ts.y();
    let mut best = (f64::NEG_INFINITY, 0, 0);
    for i in 0..used {
        let s = i0 + i * nb / used;
        let len = i0 + (i + 1) * nb / used - s;
        let m = (len / 2).max(1);
        let right = y[s + len + 1 - m..=s + len].iter().sum::<f64>() / m as f64;
        let left = y[s..s + m].iter().sum::<f64>() / m as f64;
        let stat = (right - left).abs();
        if stat > best.0 {
            best = (stat, s, len);
        }
    }
    let (_, s, len) = best;
    let t = ts.times();
    let tau_hat = (0.5 * (t[s] + t[s + len])).clamp(lo, hi);
    Ok(Refinement {
        window: (s, s + len),
        tau_hat,
        subintervals: used,
    })
}

/// Series with the observations strictly inside `window` deleted and the
/// right flank moved left so that `Y_b - Y_a` becomes one return of typical
/// length. Returns the series and the midpoint of that return.
pub fn cut_out(ts: &TickSeries, window: (usize, usize)) -> Result<(TickSeries, f64)> {
    let (a, b) = window;
    let n = ts.n();
    if a >= b || b > n {
        return Err(Error::WindowOutOfBounds {
            lo: a as f64,
            hi: b as f64,
        });
    }
    let t = ts.times();
    let y = ts.y();
    let step = 1.0 / n as f64;
    let shift = t[b] - t[a] - step;
    let mut times = Vec::with_capacity(n + 1 - (b - a - 1));
    let mut prices = Vec::with_capacity(times.capacity());
    times.extend_from_slice(&t[..=a]);
    prices.extend_from_slice(&y[..=a]);
    times.extend(t[b..].iter().map(|v| v - shift));
    prices.extend_from_slice(&y[b..]);
    let centre = t[a] + 0.5 * step;
    Ok((TickSeries::new(times, prices)?, centre))
}

/// Spectral jump estimate centred on the cut-out return `Y_b - Y_a`, with the
/// window length and cut-off of the original series.
pub fn estimate_jump_at_window(
    ts: &TickSeries,
    window: (usize, usize),
    cfg: &SpectralConfig,
    pilots: &PilotEstimates,
) -> Result<JumpEstimate> {
    let fixed = SpectralConfig {
        h: Some(cfg.window(ts.n())),
        cutoff: Some(cfg.cutoff(ts.n())),
        ..*cfg
    };
    let (virt, centre) = cut_out(ts, window)?;
    spectral::spectral_jump_estimator(&virt, centre, &fixed, pilots)
}
