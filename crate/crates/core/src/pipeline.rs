//! End-to-end jump detection: bin grid, thresholding, refinement, spot
//! volatilities on both sides and the cut-out jump-size estimate.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::jumploc::{self, BinGrid};
use crate::series::TickSeries;
use crate::spectral::{self, PilotEstimates, Side, SpectralConfig};
use crate::spotvol::{self, SpotVolConfig, SpotVolEstimate};
use crate::stats::TestResult;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub spot: SpotVolConfig,
    /// Jump-size estimator settings; the window length and cut-off default to
    /// the bin width and bin cut-off.
    pub spectral: SpectralConfig,
    pub subintervals: usize,
    /// Tail cutoff: only increments above `a^2` count as jumps.
    pub a: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            spot: SpotVolConfig::default(),
            spectral: SpectralConfig::default(),
            subintervals: 6,
            a: 0.0,
        }
    }
}

impl PipelineConfig {
    /// Settings of the one-day cojump study: `K` bins, 30 frequencies and
    /// eight bins per side for spot volatility.
    pub fn cojump_study(bins: usize) -> Self {
        let mut cfg = Self::default();
        cfg.spot.bins = Some(bins);
        cfg.spot.cutoff = Some(30);
        cfg.spot.span = Some(8);
        cfg
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpEvent {
    pub bin: usize,
    pub tau_hat: f64,
    pub window: (usize, usize),
    pub dx_hat: f64,
    pub dx_avar: f64,
    pub qv_inc: f64,
    pub threshold: f64,
    pub sig2_left: f64,
    pub sig2_right: f64,
    /// Local noise level around the jump.
    pub eta: f64,
    /// Normalizing rate of the spot-volatility difference.
    pub rate: f64,
    pub vol_jump: TestResult,
}

impl JumpEvent {
    pub fn vol_jump_size(&self) -> f64 {
        self.sig2_right - self.sig2_left
    }
}

#[derive(Debug, Clone)]
pub struct Detection {
    pub grid: BinGrid,
    pub flagged: Vec<usize>,
    pub events: Vec<JumpEvent>,
}

pub fn detect_events(ts: &TickSeries, cfg: &PipelineConfig) -> Result<Detection> {
    let n = ts.n();
    let eta2 = spectral::estimate_noise_variance(ts)?;
    let grid = jumploc::make_bin_grid(ts, &cfg.spot, eta2)?;
    let flagged = jumploc::detect_jump_bins(&grid, cfg.a);
    let est_cfg = SpectralConfig {
        h: Some(cfg.spectral.h.unwrap_or(grid.h)),
        cutoff: Some(cfg.spectral.cutoff.unwrap_or(cfg.spot.cutoff(n))),
        ..cfg.spectral
    };
    let span = cfg.spot.span(n);
    let rate = cfg.spot.rate(n);
    let mut events = Vec::with_capacity(flagged.len());
    for &k in &flagged {
        match event_at(ts, &grid, k, cfg, &est_cfg, span, rate) {
            Ok(ev) => events.push(ev),
            Err(e) => warn!("skipping flagged bin {k}: {e}"),
        }
    }
    Ok(Detection {
        grid,
        flagged,
        events,
    })
}

fn event_at(
    ts: &TickSeries,
    grid: &BinGrid,
    k: usize,
    cfg: &PipelineConfig,
    est_cfg: &SpectralConfig,
    span: usize,
    rate: f64,
) -> Result<JumpEvent> {
    let refn = jumploc::refine_jump_time(ts, grid, k, cfg.subintervals)?;
    let left = spotvol::side_estimate(ts, &grid.stats, k, Side::Left, &cfg.spot, grid.eta2)?;
    let right = spotvol::side_estimate(ts, &grid.stats, k, Side::Right, &cfg.spot, grid.eta2)?;
    let spot = SpotVolEstimate::from_sides(&left, &right, span, rate, cfg.spot.beta);
    let floor = cfg.spectral.sig2_floor;
    let pilots = PilotEstimates {
        eta2: grid.eta2,
        sig2_left: left.sig2.max(floor),
        sig2_right: right.sig2.max(floor),
    };
    let jump = jumploc::estimate_jump_at_window(ts, refn.window, est_cfg, &pilots)?;
    Ok(JumpEvent {
        bin: k,
        tau_hat: refn.tau_hat,
        window: refn.window,
        dx_hat: jump.value,
        dx_avar: jump.variance(est_cfg.avar),
        qv_inc: grid.qv_increment(k),
        threshold: grid.thresholds[k],
        sig2_left: spot.sig2_left,
        sig2_right: spot.sig2_right,
        eta: spot.eta,
        rate,
        vol_jump: spot.test()?,
    })
}
