//! Monte Carlo studies: size, power and RMSE of the two local jump tests at a
//! known jump time, and the one-day cojump (DLE) study.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dle::{self, DLE_SCALE};
use crate::error::Result;
use crate::pipeline::{self, PipelineConfig};
use crate::preavg::{self, LmConfig};
use crate::rng::{self, stage};
use crate::simkit::{self, NoiseModel, PriceJump, SimConfig, VolJump, VolJumpSize, HOURS_PER_DAY};
use crate::spectral::{self, PilotEstimates, SpectralConfig};
use crate::spotvol;
use crate::stats;

/// Runs `f` for replications `0..reps` on the rayon pool, keeping the
/// replication order in the output.
pub fn replicate<T, F>(reps: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    (0..reps as u64).into_par_iter().map(f).collect()
}

/// Mixes a cell identifier into the root seed so that cells use independent
/// streams.
pub fn cell_seed(root: u64, cell: u64) -> u64 {
    root ^ cell.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TableConfig {
    pub reps: usize,
    pub seed: u64,
    pub qs: Vec<f64>,
    pub ns: Vec<usize>,
    /// Jump sizes as multiples of `q`.
    pub multiples: Vec<u32>,
    pub alpha: f64,
    pub noise: NoiseModel,
    /// Length of the simulated window in trading days.
    pub time_scale: f64,
    /// Moderate-noise threshold on `q` separating the two tuning regimes.
    pub large_noise_from: f64,
    /// Overrides the regime's pre-average window constant.
    pub lm_c: Option<f64>,
    /// Overrides the regime's spectral window constant.
    pub kappa: Option<f64>,
}

impl Default for TableConfig {
    fn default() -> Self {
        Self {
            reps: 6000,
            seed: 20_240_601,
            qs: vec![0.0005, 0.005],
            ns: vec![1200, 1800, 3600],
            multiples: vec![0, 1, 2, 3],
            alpha: 0.05,
            noise: NoiseModel::Additive,
            time_scale: 1.0 / HOURS_PER_DAY,
            large_noise_from: 0.001,
            lm_c: None,
            kappa: None,
        }
    }
}

impl TableConfig {
    pub fn lm_config(&self, q: f64, multiple: u32) -> LmConfig {
        let mut cfg = self.regime_lm_config(q, multiple);
        cfg.c = self.lm_c.unwrap_or(cfg.c);
        cfg
    }

    fn regime_lm_config(&self, q: f64, multiple: u32) -> LmConfig {
        if q >= self.large_noise_from {
            LmConfig {
                multiplier: if multiple >= 2 { 2 } else { 1 },
                ..LmConfig::large_noise()
            }
        } else {
            LmConfig::moderate_noise()
        }
    }

    pub fn spectral_config(&self, q: f64) -> SpectralConfig {
        let mut cfg = if q >= self.large_noise_from {
            SpectralConfig::large_noise()
        } else {
            SpectralConfig::moderate_noise()
        };
        cfg.kappa = self.kappa.unwrap_or(cfg.kappa);
        cfg
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalRep {
    pub lm_stat: f64,
    pub lm_est: f64,
    pub spectral_stat: f64,
    pub spectral_est: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellResult {
    pub q: f64,
    pub n: usize,
    pub multiple: u32,
    pub jump: f64,
    pub lm_window: usize,
    pub h: f64,
    pub reps: usize,
    pub failed: usize,
    pub lm_reject: f64,
    pub spectral_reject: f64,
    pub lm_rmse: f64,
    pub spectral_rmse: f64,
    pub lm_stats: Vec<f64>,
    pub spectral_stats: Vec<f64>,
}

/// One replication of the local test experiment: a one-hour path with an
/// optional jump at `tau = (floor(n/2) + U) / n`, tested at `tau`.
pub fn local_replication(
    sim: &SimConfig,
    lm: &LmConfig,
    spec: &SpectralConfig,
    jump: f64,
) -> Result<LocalRep> {
    let n = sim.n;
    let u: f64 = rng::stream(sim.seed, sim.replication, stage::JUMP_TIME).random();
    let tau = ((n / 2) as f64 + u) / n as f64;
    let cfg = SimConfig {
        price_jump: (jump != 0.0).then_some(PriceJump { time: tau, size: jump }),
        ..sim.clone()
    };
    let ts = simkit::simulate_path(&cfg)?.ticks();
    let pilots = PilotEstimates::estimate(&ts, tau, spec)?;
    let m = lm.window(n);
    let lm_est = preavg::lm_statistic(&ts, tau, m)?;
    let lm_test = preavg::lm_test(&ts, tau, m, pilots.sig2_left, pilots.sig2_right, pilots.eta2)?;
    let est = spectral::spectral_jump_estimator(&ts, tau, spec, &pilots)?;
    let spec_test = spectral::standardize(&est, spec.avar);
    Ok(LocalRep {
        lm_stat: lm_test.stat,
        lm_est,
        spectral_stat: spec_test.stat,
        spectral_est: est.value,
    })
}

pub fn run_cell(cfg: &TableConfig, cell: u64, q: f64, n: usize, multiple: u32) -> CellResult {
    let jump = q * multiple as f64;
    let lm = cfg.lm_config(q, multiple);
    let spec = cfg.spectral_config(q);
    let base = SimConfig {
        n,
        q,
        noise: cfg.noise,
        time_scale: cfg.time_scale,
        seed: cell_seed(cfg.seed, cell),
        ..SimConfig::default()
    };
    let reps = replicate(cfg.reps, |r| {
        let sim = SimConfig {
            replication: r,
            ..base.clone()
        };
        local_replication(&sim, &lm, &spec, jump).ok()
    });
    let ok: Vec<LocalRep> = reps.iter().flatten().copied().collect();
    let crit = stats::norm_quantile(1.0 - cfg.alpha / 2.0);
    let rate = |f: fn(&LocalRep) -> f64| {
        ok.iter().filter(|r| f(r).abs() > crit).count() as f64 / ok.len().max(1) as f64
    };
    let lm_ests: Vec<f64> = ok.iter().map(|r| r.lm_est).collect();
    let spectral_ests: Vec<f64> = ok.iter().map(|r| r.spectral_est).collect();
    CellResult {
        q,
        n,
        multiple,
        jump,
        lm_window: lm.window(n),
        h: spec.window(n),
        reps: ok.len(),
        failed: cfg.reps - ok.len(),
        lm_reject: rate(|r| r.lm_stat),
        spectral_reject: rate(|r| r.spectral_stat),
        lm_rmse: stats::rmse(&lm_ests, jump),
        spectral_rmse: stats::rmse(&spectral_ests, jump),
        lm_stats: ok.iter().map(|r| r.lm_stat).collect(),
        spectral_stats: ok.iter().map(|r| r.spectral_stat).collect(),
    }
}

/// Rejection rates of both tests in every `(q, n, multiple)` cell.
pub fn run_mc_table1(cfg: &TableConfig) -> Vec<CellResult> {
    run_cells(cfg, &cfg.multiples)
}

/// RMSE of both jump-size estimators in the cells with a jump.
pub fn run_mc_table2(cfg: &TableConfig) -> Vec<CellResult> {
    let multiples: Vec<u32> = cfg.multiples.iter().copied().filter(|&m| m > 0).collect();
    run_cells(cfg, &multiples)
}

fn run_cells(cfg: &TableConfig, multiples: &[u32]) -> Vec<CellResult> {
    let mut out = Vec::new();
    for (qi, &q) in cfg.qs.iter().enumerate() {
        for &n in &cfg.ns {
            for &m in multiples {
                let cell = ((qi as u64) << 32) | ((n as u64) << 8) | m as u64;
                out.push(run_cell(cfg, cell, q, n, m));
            }
        }
    }
    out
}

/// Published values of the local-test experiment: `(q, n, multiple, LM, spectral)`.
pub const REJECTION_REFERENCE: [(f64, usize, u32, f64, f64); 24] = [
    (0.0005, 1200, 0, 0.049, 0.045),
    (0.0005, 1200, 1, 0.199, 0.274),
    (0.0005, 1200, 2, 0.473, 0.677),
    (0.0005, 1200, 3, 0.777, 0.924),
    (0.0005, 1800, 0, 0.050, 0.053),
    (0.0005, 1800, 1, 0.280, 0.382),
    (0.0005, 1800, 2, 0.695, 0.828),
    (0.0005, 1800, 3, 0.937, 0.988),
    (0.0005, 3600, 0, 0.049, 0.056),
    (0.0005, 3600, 1, 0.281, 0.594),
    (0.0005, 3600, 2, 0.697, 0.982),
    (0.0005, 3600, 3, 0.950, 1.0),
    (0.005, 1200, 0, 0.052, 0.049),
    (0.005, 1200, 1, 0.296, 0.996),
    (0.005, 1200, 2, 0.803, 1.0),
    (0.005, 1200, 3, 0.997, 1.0),
    (0.005, 1800, 0, 0.053, 0.052),
    (0.005, 1800, 1, 0.465, 0.999),
    (0.005, 1800, 2, 0.937, 1.0),
    (0.005, 1800, 3, 0.988, 1.0),
    (0.005, 3600, 0, 0.050, 0.049),
    (0.005, 3600, 1, 0.829, 1.0),
    (0.005, 3600, 2, 0.994, 1.0),
    (0.005, 3600, 3, 0.997, 1.0),
];

/// Published RMSEs times `1e4`: `(q, n, multiple, LM, spectral)`.
pub const RMSE_REFERENCE: [(f64, usize, u32, f64, f64); 18] = [
    (0.0005, 1200, 1, 11.0, 9.9),
    (0.0005, 1200, 2, 11.1, 10.2),
    (0.0005, 1200, 3, 11.9, 10.8),
    (0.0005, 1800, 1, 6.8, 5.3),
    (0.0005, 1800, 2, 6.9, 6.0),
    (0.0005, 1800, 3, 7.9, 6.8),
    (0.0005, 3600, 1, 4.7, 2.6),
    (0.0005, 3600, 2, 4.8, 3.6),
    (0.0005, 3600, 3, 6.3, 4.7),
    (0.005, 1200, 1, 14.8, 14.4),
    (0.005, 1200, 2, 15.0, 14.5),
    (0.005, 1200, 3, 15.2, 14.5),
    (0.005, 1800, 1, 10.0, 9.4),
    (0.005, 1800, 2, 10.2, 9.5),
    (0.005, 1800, 3, 10.6, 9.5),
    (0.005, 3600, 1, 5.6, 4.5),
    (0.005, 3600, 2, 5.9, 4.6),
    (0.005, 3600, 3, 6.4, 4.6),
];

/// Median empirical volatility jump, in percent of the pre-jump level.
pub const MEDIAN_VOL_JUMP_PCT: f64 = 137.3;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DleStudyConfig {
    pub reps: usize,
    pub seed: u64,
    pub n: usize,
    pub q: f64,
    pub noise: NoiseModel,
    pub time_scale: f64,
    pub price_jump: Option<f64>,
    pub vol_jump: Option<VolJumpSize>,
    /// Jump times are drawn uniformly from this interval.
    pub jump_window: (f64, f64),
    pub alpha: f64,
    pub pipeline: PipelineConfig,
}

impl DleStudyConfig {
    /// One trading day on a grid of `n` points with `bins` bins, a 0.2%
    /// downward price jump and a volatility jump of the median empirical size
    /// relative to the long-run daily variance.
    pub fn cojump_day(n: usize, bins: usize) -> Self {
        let base = SimConfig::default();
        let time_scale = 1.0 / HOURS_PER_DAY;
        let level = base.theta * base.variance_unit;
        Self {
            reps: 500,
            seed: 7_775_001,
            n,
            q: 0.0005,
            noise: NoiseModel::Additive,
            time_scale,
            price_jump: Some(-0.002),
            vol_jump: Some(VolJumpSize::Absolute(MEDIAN_VOL_JUMP_PCT / 100.0 * level)),
            jump_window: (0.1, 0.9),
            alpha: 0.05,
            pipeline: PipelineConfig::cojump_study(bins),
        }
    }

    pub fn one_second() -> Self {
        Self::cojump_day(23_400, 100)
    }

    pub fn three_second() -> Self {
        Self::cojump_day(7_800, 50)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DleRep {
    pub truth: f64,
    pub dle: f64,
    pub stat: f64,
    pub pvalue: f64,
    pub selfscale_var: f64,
    pub n_jumps: usize,
    /// Whether the bin containing the true jump time was flagged.
    pub hit: bool,
    pub dx_hat: f64,
    pub vol_jump_hat: f64,
    /// Volatility-jump test at the true jump time.
    /// `None` when the jump is too close to the edge for the side spans.
    pub vol_stat: Option<f64>,
    pub vol_pvalue: Option<f64>,
}

impl DleRep {
    /// Statistic centred at the true DLE.
    pub fn centred_stat(&self) -> f64 {
        if self.selfscale_var > 0.0 {
            self.stat * (self.dle - self.truth) / self.dle
        } else {
            0.0
        }
    }
}

pub fn dle_replication(cfg: &DleStudyConfig, rep: u64) -> Result<DleRep> {
    let u: f64 = rng::stream(cfg.seed, rep, stage::JUMP_TIME).random();
    let (lo, hi) = cfg.jump_window;
    let tau = lo + (hi - lo) * u;
    let sim = SimConfig {
        n: cfg.n,
        q: cfg.q,
        noise: cfg.noise,
        time_scale: cfg.time_scale,
        price_jump: cfg.price_jump.map(|size| PriceJump { time: tau, size }),
        vol_jump: cfg.vol_jump.map(|size| VolJump { time: tau, size }),
        seed: cfg.seed,
        replication: rep,
        ..SimConfig::default()
    };
    let path = simkit::simulate_path(&sim)?;
    let idx = sim.grid_index(tau);
    let vol_jump = match cfg.vol_jump {
        Some(VolJumpSize::Absolute(d)) => d,
        Some(VolJumpSize::Relative(r)) => r * path.sig2[idx - 1],
        None => 0.0,
    };
    let truth = cfg.price_jump.unwrap_or(0.0) * vol_jump;
    let ts = path.ticks();
    let det = pipeline::detect_events(&ts, &cfg.pipeline)?;
    let res = dle::estimate_dle(&det.events, cfg.pipeline.a);
    let true_bin = spotvol::bin_of(ts.mid(idx), det.grid.bins());
    let hit = det.flagged.contains(&true_bin);
    let vol_test = spotvol::estimate_spot_vols(&ts, tau, &cfg.pipeline.spot, det.grid.eta2)
        .and_then(|v| v.test())
        .ok();
    let top = det
        .events
        .iter()
        .max_by(|a, b| a.qv_inc.total_cmp(&b.qv_inc));
    Ok(DleRep {
        truth,
        dle: res.dle,
        stat: res.stat,
        pvalue: res.pvalue,
        selfscale_var: res.selfscale_var,
        n_jumps: res.n_jumps,
        hit,
        dx_hat: top.map_or(0.0, |e| e.dx_hat),
        vol_jump_hat: top.map_or(0.0, |e| e.vol_jump_size()),
        vol_stat: vol_test.map(|t| t.stat),
        vol_pvalue: vol_test.map(|t| t.pvalue),
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DleStudyResult {
    pub reps: usize,
    pub failed: usize,
    /// True DLE of the first replication (constant for absolute jumps).
    pub truth: f64,
    /// Both on the `1e7` reporting scale.
    pub bias: f64,
    pub variance: f64,
    pub power: f64,
    pub detection_rate: f64,
    pub spurious_rate: f64,
    pub vol_reject: f64,
    pub ks_stat: f64,
    pub ks_pvalue: f64,
    pub runs: Vec<DleRep>,
}

pub fn run_mc_dle(cfg: &DleStudyConfig) -> DleStudyResult {
    let runs: Vec<DleRep> = replicate(cfg.reps, |r| dle_replication(cfg, r).ok())
        .into_iter()
        .flatten()
        .collect();
    summarize_dle(cfg, runs)
}

pub fn summarize_dle(cfg: &DleStudyConfig, runs: Vec<DleRep>) -> DleStudyResult {
    let m = runs.len().max(1) as f64;
    let scaled_err: Vec<f64> = runs.iter().map(|r| (r.dle - r.truth) * DLE_SCALE).collect();
    let scaled: Vec<f64> = runs.iter().map(|r| r.dle * DLE_SCALE).collect();
    let centred: Vec<f64> = runs
        .iter()
        .filter(|r| r.selfscale_var > 0.0)
        .map(DleRep::centred_stat)
        .collect();
    let ks_stat = if centred.is_empty() { 1.0 } else { stats::ks_statistic_normal(&centred) };
    let frac = |f: &dyn Fn(&DleRep) -> bool| runs.iter().filter(|r| f(r)).count() as f64 / m;
    DleStudyResult {
        reps: runs.len(),
        failed: cfg.reps - runs.len(),
        truth: runs.first().map_or(0.0, |r| r.truth),
        bias: stats::mean(&scaled_err),
        variance: if runs.len() > 1 { stats::variance(&scaled) } else { 0.0 },
        power: frac(&|r| r.pvalue < cfg.alpha),
        detection_rate: frac(&|r| r.hit),
        spurious_rate: frac(&|r| r.n_jumps > usize::from(r.hit)),
        vol_reject: {
            let p: Vec<f64> = runs.iter().filter_map(|r| r.vol_pvalue).collect();
            p.iter().filter(|&&v| v < cfg.alpha).count() as f64 / p.len().max(1) as f64
        },
        ks_stat,
        ks_pvalue: stats::ks_pvalue(ks_stat, centred.len().max(1)),
        runs,
    }
}
