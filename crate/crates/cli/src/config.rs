//! Flat run configuration shared by all subcommands. Every field is optional
//! so a config file and the command line can be merged field by field.

use anyhow::{bail, Result};
use clap::{Args, ValueEnum};
use jumplev::io::IngestOptions;
use jumplev::mc::{DleStudyConfig, TableConfig};
use jumplev::pipeline::PipelineConfig;
use jumplev::simkit::{NoiseModel, PriceJump, SimConfig, VolJump, VolJumpSize, HOURS_PER_DAY};
use jumplev::spotvol::RateRule;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Noise {
    Additive,
    Multiplicative,
}

impl From<Noise> for NoiseModel {
    fn from(n: Noise) -> Self {
        match n {
            Noise::Additive => NoiseModel::Additive,
            Noise::Multiplicative => NoiseModel::Multiplicative,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Rate {
    /// `sqrt(m h sqrt(n))` from the bins actually averaged.
    Realized,
    /// `n^(beta/2)`.
    Beta,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Sampling {
    /// 23400 observations, 100 bins.
    OneSecond,
    /// 7800 observations, 50 bins.
    ThreeSecond,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Root seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Monte Carlo replications.
    #[arg(long)]
    pub reps: Option<usize>,
    /// Observations per simulated window.
    #[arg(long)]
    pub n: Option<usize>,
    /// Noise standard deviation.
    #[arg(long)]
    pub q: Option<f64>,
    #[arg(long, value_enum)]
    pub noise: Option<Noise>,
    /// Length of the simulated window in trading days.
    #[arg(long)]
    pub time_scale: Option<f64>,
    /// Price jump size in log-price units.
    #[arg(long, allow_hyphen_values = true)]
    pub price_jump: Option<f64>,
    /// Time of the injected jumps in (0, 1).
    #[arg(long)]
    pub jump_time: Option<f64>,
    /// Absolute volatility jump in spot-variance units.
    #[arg(long, allow_hyphen_values = true, conflicts_with = "vol_jump_rel")]
    pub vol_jump: Option<f64>,
    /// Volatility jump as a multiple of the pre-jump variance.
    #[arg(long, allow_hyphen_values = true)]
    pub vol_jump_rel: Option<f64>,
    #[arg(long, value_enum)]
    pub sampling: Option<Sampling>,

    /// Window constant of the spectral jump estimator.
    #[arg(long)]
    pub kappa: Option<f64>,
    /// Explicit window length of the spectral jump estimator.
    #[arg(long)]
    pub h: Option<f64>,
    /// Window constant of the pre-averaged statistic.
    #[arg(long)]
    pub lm_c: Option<f64>,
    /// Number of bins on [0, 1].
    #[arg(long)]
    pub bins: Option<usize>,
    /// Spectral frequencies per bin.
    #[arg(long)]
    pub cutoff: Option<usize>,
    /// Truncation exponent.
    #[arg(long)]
    pub varpi: Option<f64>,
    /// Rate exponent of the volatility-jump test.
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long, value_enum)]
    pub rate: Option<Rate>,
    /// Sub-intervals per flagged bin for locating the jump.
    #[arg(long)]
    pub subintervals: Option<usize>,
    /// Bins averaged on each side for spot volatility.
    #[arg(long)]
    pub span: Option<usize>,
    /// Frequencies averaged by the pilot.
    #[arg(long)]
    pub pilot_freqs: Option<usize>,
    /// Tail cutoff on jump sizes.
    #[arg(long)]
    pub a: Option<f64>,
    /// Test level.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// BH level for the significant-volatility-jump DLE mode.
    #[arg(long)]
    pub bh_alpha: Option<f64>,
    /// Also report DLE over events whose volatility jump survives BH.
    #[arg(long)]
    pub significant_only: Option<bool>,

    /// Minimum tick count accepted on ingestion.
    #[arg(long)]
    pub min_ticks: Option<usize>,
    /// Drop ticks that repeat the previous price.
    #[arg(long)]
    pub drop_zero_returns: Option<bool>,
}

macro_rules! merge_fields {
    ($hi:expr, $lo:expr, $($f:ident),*) => {
        RunConfig { $($f: $hi.$f.or($lo.$f)),* }
    };
}

fn positive(name: &str, v: Option<f64>) -> Result<()> {
    match v {
        Some(x) if !(x > 0.0 && x.is_finite()) => bail!("{name} must be positive, got {x}"),
        _ => Ok(()),
    }
}

fn at_least(name: &str, v: Option<usize>, min: usize) -> Result<()> {
    match v {
        Some(x) if x < min => bail!("{name} must be at least {min}, got {x}"),
        _ => Ok(()),
    }
}

fn open_unit(name: &str, v: Option<f64>) -> Result<()> {
    match v {
        Some(x) if !(x > 0.0 && x < 1.0) => bail!("{name} must lie in (0, 1), got {x}"),
        _ => Ok(()),
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    #[cfg(test)]
    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    /// Fields set in `self` win over `file`.
    pub fn over(&self, file: &RunConfig) -> RunConfig {
        merge_fields!(
            self, file, seed, reps, n, q, noise, time_scale, price_jump, jump_time, vol_jump, vol_jump_rel,
            sampling, kappa, h, lm_c, bins, cutoff, varpi, beta, rate, subintervals, span, pilot_freqs, a,
            alpha, bh_alpha, significant_only, min_ticks, drop_zero_returns
        )
    }

    pub fn validate(&self) -> Result<()> {
        at_least("reps", self.reps, 1)?;
        at_least("n", self.n, 2)?;
        if let Some(q) = self.q {
            if !(q >= 0.0 && q.is_finite()) {
                bail!("q must be nonnegative, got {q}");
            }
        }
        positive("time_scale", self.time_scale)?;
        open_unit("jump_time", self.jump_time)?;
        positive("kappa", self.kappa)?;
        open_unit("h", self.h)?;
        positive("lm_c", self.lm_c)?;
        at_least("bins", self.bins, 3)?;
        at_least("cutoff", self.cutoff, 1)?;
        open_unit("varpi", self.varpi)?;
        open_unit("beta", self.beta)?;
        at_least("subintervals", self.subintervals, 2)?;
        at_least("span", self.span, 1)?;
        at_least("pilot_freqs", self.pilot_freqs, 1)?;
        if let Some(a) = self.a {
            if !(a >= 0.0 && a.is_finite()) {
                bail!("a must be nonnegative, got {a}");
            }
        }
        open_unit("alpha", self.alpha)?;
        open_unit("bh_alpha", self.bh_alpha)?;
        if let Some(v) = self.vol_jump_rel {
            if v <= -1.0 {
                bail!("vol_jump_rel must exceed -1, got {v}");
            }
        }
        if self.vol_jump.is_some() && self.vol_jump_rel.is_some() {
            bail!("set at most one of vol_jump and vol_jump_rel");
        }
        Ok(())
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    fn vol_jump_size(&self) -> Option<VolJumpSize> {
        self.vol_jump
            .map(VolJumpSize::Absolute)
            .or(self.vol_jump_rel.map(VolJumpSize::Relative))
    }

    /// Defaults follow the one-second cojump study.
    pub fn sim(&self) -> SimConfig {
        let time = self.jump_time.unwrap_or(0.5);
        SimConfig {
            n: self.n.unwrap_or(23_400),
            q: self.q.unwrap_or(0.0005),
            noise: self.noise.map_or(NoiseModel::Additive, Into::into),
            time_scale: self.time_scale.unwrap_or(1.0 / HOURS_PER_DAY),
            price_jump: self.price_jump.map(|size| PriceJump { time, size }),
            vol_jump: self.vol_jump_size().map(|size| VolJump { time, size }),
            seed: self.seed(),
            ..SimConfig::default()
        }
    }

    pub fn ingest(&self) -> IngestOptions {
        let d = IngestOptions::default();
        IngestOptions {
            min_ticks: self.min_ticks.unwrap_or(d.min_ticks),
            drop_zero_returns: self.drop_zero_returns.unwrap_or(d.drop_zero_returns),
        }
    }

    pub fn pipeline(&self, base: PipelineConfig) -> PipelineConfig {
        let mut p = base;
        p.spot.bins = self.bins.or(p.spot.bins);
        p.spot.cutoff = self.cutoff.or(p.spot.cutoff);
        p.spot.span = self.span.or(p.spot.span);
        if let Some(v) = self.varpi {
            p.spot.varpi = v;
            p.spectral.varpi = v;
        }
        if let Some(j) = self.pilot_freqs {
            p.spot.pilot_freqs = j;
            p.spectral.pilot_freqs = j;
        }
        if let Some(b) = self.beta {
            p.spot.beta = b;
        }
        match self.rate {
            Some(Rate::Beta) => p.spot.rate = RateRule::Beta(p.spot.beta),
            Some(Rate::Realized) => p.spot.rate = RateRule::Realized,
            None => {}
        }
        if let Some(k) = self.kappa {
            p.spectral.kappa = k;
        }
        p.spectral.h = self.h.or(p.spectral.h);
        p.subintervals = self.subintervals.unwrap_or(p.subintervals);
        p.a = self.a.unwrap_or(p.a);
        p
    }

    pub fn table(&self) -> TableConfig {
        let d = TableConfig::default();
        TableConfig {
            reps: self.reps.unwrap_or(d.reps),
            seed: self.seed.unwrap_or(d.seed),
            alpha: self.alpha.unwrap_or(d.alpha),
            noise: self.noise.map_or(d.noise, Into::into),
            time_scale: self.time_scale.unwrap_or(d.time_scale),
            lm_c: self.lm_c,
            kappa: self.kappa,
            ..d
        }
    }

    pub fn dle_study(&self) -> DleStudyConfig {
        let d = match self.sampling.unwrap_or(Sampling::OneSecond) {
            Sampling::OneSecond => DleStudyConfig::one_second(),
            Sampling::ThreeSecond => DleStudyConfig::three_second(),
        };
        DleStudyConfig {
            reps: self.reps.unwrap_or(d.reps),
            seed: self.seed.unwrap_or(d.seed),
            n: self.n.unwrap_or(d.n),
            q: self.q.unwrap_or(d.q),
            noise: self.noise.map_or(d.noise, Into::into),
            time_scale: self.time_scale.unwrap_or(d.time_scale),
            price_jump: self.price_jump.or(d.price_jump),
            vol_jump: self.vol_jump_size().or(d.vol_jump),
            alpha: self.alpha.unwrap_or(d.alpha),
            pipeline: self.pipeline(d.pipeline),
            ..d
        }
    }
}
