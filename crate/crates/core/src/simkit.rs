//! Simulation of the benchmark data-generating process: Heston-type
//! stochastic variance, the efficient log price, optional injected price and
//! variance jumps, and return-correlated microstructure noise.
//!
//! Variance parameters are given in percent-squared per trading day, the
//! convention of the benchmark study. `variance_unit` converts them to
//! log-price units and `time_scale` is the length of the simulated `[0, 1]`
//! window in trading days. The reported `sig2` path is the spot variance per
//! unit of the `[0, 1]` window in log-price units, i.e. the quantity the
//! estimators target.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, stage};
use crate::series::TickSeries;

/// Lower clip applied to the variance state before taking square roots.
pub const VARIANCE_CLIP: f64 = 1e-12;

/// Trading hours per day; one hour of data is `1 / 6.5` trading days.
pub const HOURS_PER_DAY: f64 = 6.5;

/// Coefficients of the return-correlated noise model.
pub const NOISE_RETURN_COEF: f64 = 0.0861;
pub const NOISE_MA_COEF: f64 = 0.06;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseModel {
    /// `eps_i = 0.0861 dX_i + 0.06 (dX_i + dX_{i-1}) + U_i`, `U_i ~ N(0, q^2)`.
    #[default]
    Additive,
    /// `eps_i = 0.0861 dX_i + 0.06 (dX_i + dX_{i-1}) U_i`, `U_i ~ N(0, q^2)`.
    Multiplicative,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriceJump {
    pub time: f64,
    pub size: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VolJumpSize {
    /// Added to the reported spot variance (log-price units per window).
    Absolute(f64),
    /// Multiple of the pre-jump variance.
    Relative(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VolJump {
    pub time: f64,
    pub size: VolJumpSize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n: usize,
    pub kappa_mr: f64,
    pub theta: f64,
    pub xi: f64,
    /// Initial variance; `None` starts at `theta`.
    pub sig2_0: Option<f64>,
    pub variance_unit: f64,
    pub time_scale: f64,
    pub x0: f64,
    pub q: f64,
    pub noise: NoiseModel,
    pub price_jump: Option<PriceJump>,
    pub vol_jump: Option<VolJump>,
    pub seed: u64,
    pub replication: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n: 23_400,
            kappa_mr: 0.0162,
            theta: 0.8465,
            xi: 0.117,
            sig2_0: None,
            variance_unit: 1e-4,
            time_scale: 1.0,
            x0: 1.0,
            q: 0.0005,
            noise: NoiseModel::Additive,
            price_jump: None,
            vol_jump: None,
            seed: 0,
            replication: 0,
        }
    }
}

impl SimConfig {
    /// One trading hour on the `[0, 1]` window.
    pub fn one_hour(n: usize, q: f64) -> Self {
        Self {
            n,
            q,
            time_scale: 1.0 / HOURS_PER_DAY,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidInput(format!("n = {} < 2", self.n)));
        }
        if !(self.kappa_mr > 0.0 && self.theta > 0.0 && self.xi >= 0.0) {
            return Err(Error::InvalidInput(
                "kappa_mr and theta must be positive, xi nonnegative".into(),
            ));
        }
        if !(self.variance_unit > 0.0 && self.time_scale > 0.0 && self.q >= 0.0) {
            return Err(Error::InvalidInput(
                "variance_unit and time_scale must be positive, q nonnegative".into(),
            ));
        }
        let jump_times = self
            .price_jump
            .map(|j| j.time)
            .into_iter()
            .chain(self.vol_jump.map(|j| j.time));
        for t in jump_times {
            if !(t > 0.0 && t < 1.0) {
                return Err(Error::InvalidInput(format!("jump time {t} outside (0, 1)")));
            }
        }
        Ok(())
    }

    /// Factor turning the Heston state into the reported spot variance.
    pub fn variance_scale(&self) -> f64 {
        self.variance_unit * self.time_scale
    }

    /// Grid index of the first observation at or after `t`.
    pub fn grid_index(&self, t: f64) -> usize {
        ((t * self.n as f64).ceil() as usize).clamp(1, self.n)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimPath {
    pub times: Vec<f64>,
    pub x: Vec<f64>,
    pub sig2: Vec<f64>,
    pub y: Vec<f64>,
}

impl SimPath {
    pub fn n(&self) -> usize {
        self.x.len() - 1
    }

    pub fn noise(&self) -> Vec<f64> {
        self.y.iter().zip(&self.x).map(|(y, x)| y - x).collect()
    }

    /// The observed prices as an estimator input.
    pub fn ticks(&self) -> TickSeries {
        TickSeries::new(self.times.clone(), self.y.clone())
            .expect("simulated grid is strictly increasing")
    }
}

/// Simulates the efficient price and variance path and then adds noise with
/// scale `cfg.q`. The noise uses its own random stream, so `x` and `sig2` do
/// not depend on `q`.
pub fn simulate_path(cfg: &SimConfig) -> Result<SimPath> {
    cfg.validate()?;
    let n = cfg.n;
    let dt = cfg.time_scale / n as f64;
    let scale = cfg.variance_scale();
    let mut var_rng = rng::stream(cfg.seed, cfg.replication, stage::VARIANCE);
    let mut price_rng = rng::stream(cfg.seed, cfg.replication, stage::PRICE);

    let vol_jump_at = cfg.vol_jump.map(|j| (cfg.grid_index(j.time), j.size));
    let price_jump_at = cfg.price_jump.map(|j| (cfg.grid_index(j.time), j.size));

    let mut v = cfg.sig2_0.unwrap_or(cfg.theta).max(VARIANCE_CLIP);
    let mut sig2 = Vec::with_capacity(n + 1);
    let mut x = Vec::with_capacity(n + 1);
    sig2.push(v * scale);
    x.push(cfg.x0);
    for i in 1..=n {
        let zb: f64 = var_rng.sample(StandardNormal);
        let zw: f64 = price_rng.sample(StandardNormal);
        let prev_sig2 = v * scale;
        let mut next = v + cfg.kappa_mr * (cfg.theta - v) * dt + cfg.xi * v.sqrt() * dt.sqrt() * zb;
        if let Some((idx, size)) = vol_jump_at {
            if idx == i {
                next += match size {
                    VolJumpSize::Absolute(d) => d / scale,
                    VolJumpSize::Relative(r) => r * v,
                };
            }
        }
        v = next.max(VARIANCE_CLIP);
        let mut dx = (prev_sig2 / n as f64).sqrt() * zw;
        if let Some((idx, size)) = price_jump_at {
            if idx == i {
                dx += size;
            }
        }
        x.push(x[i - 1] + dx);
        sig2.push(v * scale);
    }
    let times = (0..=n).map(|i| i as f64 / n as f64).collect();
    let path = SimPath {
        times,
        y: x.clone(),
        x,
        sig2,
    };
    let mut noise_rng = rng::stream(cfg.seed, cfg.replication, stage::NOISE);
    Ok(add_noise(&path, cfg.q, cfg.noise, &mut noise_rng))
}

/// Replaces `y` by `x + eps` with the return-correlated noise model.
/// The return before the first observation is taken as zero.
pub fn add_noise<R: Rng + ?Sized>(path: &SimPath, q: f64, model: NoiseModel, rng: &mut R) -> SimPath {
    let x = &path.x;
    let mut y = Vec::with_capacity(x.len());
    let mut prev_dx = 0.0;
    for i in 0..x.len() {
        let dx = if i == 0 { 0.0 } else { x[i] - x[i - 1] };
        let u: f64 = rng.sample::<f64, _>(StandardNormal) * q;
        let ma = NOISE_MA_COEF * (dx + prev_dx);
        let eps = NOISE_RETURN_COEF * dx
            + match model {
                NoiseModel::Additive => ma + u,
                NoiseModel::Multiplicative => ma * u,
            };
        y.push(x[i] + eps);
        prev_dx = dx;
    }
    SimPath {
        y,
        ..path.clone()
    }
}

/// [`add_noise`] driven by the noise stream of `seed`.
pub fn add_noise_seeded(path: &SimPath, q: f64, model: NoiseModel, seed: u64) -> SimPath {
    add_noise(path, q, model, &mut rng::stream(seed, 0, stage::NOISE))
}
