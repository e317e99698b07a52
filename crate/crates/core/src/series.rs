//! Validated tick series: strictly increasing observation times on `[0, 1]`
//! and the matching noisy log prices.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TickSeries {
    times: Vec<f64>,
    y: Vec<f64>,
}

impl TickSeries {
    /// Builds a series after checking length, finiteness, range and ordering.
    pub fn new(times: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if times.len() != y.len() {
            return Err(Error::InvalidInput(format!(
                "times ({}) and prices ({}) differ in length",
                times.len(),
                y.len()
            )));
        }
        if times.len() < 3 {
            return Err(Error::TooShort {
                needed: 2,
                got: times.len().saturating_sub(1),
            });
        }
        for (i, (&t, &p)) in times.iter().zip(&y).enumerate() {
            if !t.is_finite() || !p.is_finite() {
                return Err(Error::InvalidInput(format!("non-finite value at index {i}")));
            }
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::InvalidInput(format!(
                    "time {t} at index {i} outside [0, 1]"
                )));
            }
            if i > 0 && t <= times[i - 1] {
                return Err(Error::InvalidInput(format!(
                    "times not strictly increasing at index {i}"
                )));
            }
        }
        Ok(Self { times, y })
    }

    /// Equidistant grid `t_i = i/n` for the given prices.
    pub fn equidistant(y: Vec<f64>) -> Result<Self> {
        let n = y.len().saturating_sub(1).max(1) as f64;
        let times = (0..y.len()).map(|i| i as f64 / n).collect();
        Self::new(times, y)
    }

    /// Number of returns.
    pub fn n(&self) -> usize {
        self.y.len() - 1
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    /// Return `Y_{t_i} - Y_{t_{i-1}}` for `i` in `1..=n`.
    #[inline]
    pub fn ret(&self, i: usize) -> f64 {
        self.y[i] - self.y[i - 1]
    }

    /// Midpoint of the `i`-th return interval.
    #[inline]
    pub fn mid(&self, i: usize) -> f64 {
        0.5 * (self.times[i - 1] + self.times[i])
    }

    /// Index range of returns whose midpoints fall inside `[lo, hi]`.
    pub fn returns_in(&self, lo: f64, hi: f64) -> std::ops::Range<usize> {
        // midpoints are strictly increasing, so both ends are partition points
        let mids = |i: usize| self.mid(i);
        let n = self.n();
        let first = partition(1, n + 1, |i| mids(i) < lo);
        let last = partition(first, n + 1, |i| mids(i) <= hi);
        first..last
    }

    /// Index range of observations with `lo <= t < hi`.
    pub fn observations_in(&self, lo: f64, hi: f64) -> std::ops::Range<usize> {
        let a = self.times.partition_point(|&t| t < lo);
        let b = self.times.partition_point(|&t| t < hi);
        a..b.max(a)
    }

    /// Same times, prices shifted by a constant.
    pub fn shifted(&self, c: f64) -> Self {
        Self {
            times: self.times.clone(),
            y: self.y.iter().map(|v| v + c).collect(),
        }
    }

    /// Time reversal `t -> 1 - t`, observations reordered accordingly.
    pub fn reversed(&self) -> Self {
        Self {
            times: self.times.iter().rev().map(|t| 1.0 - t).collect(),
            y: self.y.iter().rev().copied().collect(),
        }
    }

    /// Average observation spacing times `n` on `[lo, hi]`: a plug-in for the
    /// local derivative of the quantile transform governing the sampling.
    pub fn local_spacing_factor(&self, lo: f64, hi: f64) -> f64 {
        let r = self.returns_in(lo, hi);
        if r.len() < 2 {
            return 1.0;
        }
        let span = self.times[r.end - 1] - self.times[r.start - 1];
        span / r.len() as f64 * self.n() as f64
    }
}

/// First index in `lo..hi` for which `pred` is false, assuming `pred` is
/// monotone (true then false).
fn partition(mut lo: usize, mut hi: usize, pred: impl Fn(usize) -> bool) -> usize {
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if pred(mid) {
            lo = mid + 1;
        } else {
            hi = mid;
        }
    }
    lo
}
