//! Pre-averaged (Lee-Mykland type) local jump statistic and test.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::TickSeries;
use crate::stats::TestResult;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LmConfig {
    /// Window proportionality constant.
    pub c: f64,
    /// Assumed dependence order of the noise; the window is computed on the
    /// sub-sampled size `n / order`.
    pub order: usize,
    /// Integer multiplier applied to the computed window.
    pub multiplier: usize,
}

impl Default for LmConfig {
    fn default() -> Self {
        Self {
            c: 1.0 / 19.0,
            order: 2,
            multiplier: 1,
        }
    }
}

impl LmConfig {
    pub fn moderate_noise() -> Self {
        Self::default()
    }

    pub fn large_noise() -> Self {
        Self {
            c: 1.0 / 9.0,
            ..Self::default()
        }
    }

    /// Pre-average window length for `n` returns, at least one observation.
    pub fn window(&self, n: usize) -> usize {
        let base = (self.c * (n as f64 / self.order.max(1) as f64).sqrt()).floor() as usize;
        base.max(1) * self.multiplier.max(1)
    }
}

/// Mean of `y[j..=min(j + m - 1, n)]`.
pub fn preaveraged_price(ts: &TickSeries, j: usize, m: usize) -> Result<f64> {
    let n = ts.n();
    if j > n {
        return Err(Error::IndexOutOfRange { index: j, max: n });
    }
    if m == 0 {
        return Err(Error::InvalidInput("pre-average window must be positive".into()));
    }
    let end = (j + m - 1).min(n);
    let block = &ts.y()[j..=end];
    Ok(block.iter().sum::<f64>() / block.len() as f64)
}

/// Index of the first observation strictly after `tau`.
pub fn index_after(ts: &TickSeries, tau: f64) -> usize {
    ts.times().partition_point(|&t| t <= tau)
}

fn check_window(ts: &TickSeries, lo: usize, hi: usize, m: usize) -> Result<()> {
    if m == 0 || lo < m || hi + m - 1 > ts.n() || lo > hi {
        return Err(Error::WindowOutOfBounds {
            lo: lo as f64,
            hi: hi as f64,
        });
    }
    Ok(())
}

/// Difference of the pre-averaged prices just after and just before `tau`.
pub fn lm_statistic(ts: &TickSeries, tau: f64, m: usize) -> Result<f64> {
    let l = index_after(ts, tau);
    lm_statistic_at(ts, l, m)
}

/// [`lm_statistic`] with the first post-`tau` index given directly.
pub fn lm_statistic_at(ts: &TickSeries, l: usize, m: usize) -> Result<f64> {
    adjusted_lm_statistic(ts, (l, l), m)
}

/// The same statistic written as a weighted sum of returns with triangular
/// weights around `l`.
pub fn lm_statistic_weighted(ts: &TickSeries, l: usize, m: usize) -> Result<f64> {
    check_window(ts, l, l, m)?;
    let mf = m as f64;
    let right: f64 = (1..m).map(|k| ts.ret(l + k) * (m - k) as f64 / mf).sum();
    let left: f64 = (0..m).map(|k| ts.ret(l - k) * (m - k) as f64 / mf).sum();
    Ok(right + left)
}

/// Pre-averaged prices taken to the right of `window.1` and to the left of
/// `window.0`, skipping the observations in between.
pub fn adjusted_lm_statistic(ts: &TickSeries, window: (usize, usize), m: usize) -> Result<f64> {
    let (lo, hi) = window;
    check_window(ts, lo, hi, m)?;
    Ok(preaveraged_price(ts, hi, m)? - preaveraged_price(ts, lo - m, m)?)
}

/// Standardized pre-average test. The window constant entering the variance
/// is the effective `m / sqrt(n)`.
pub fn lm_test(
    ts: &TickSeries,
    tau: f64,
    m: usize,
    sig2_left: f64,
    sig2_right: f64,
    eta2: f64,
) -> Result<TestResult> {
    if !(sig2_left > 0.0 && sig2_right > 0.0 && eta2 >= 0.0) {
        return Err(Error::DegenerateVariance(format!(
            "plug-ins sig2_left={sig2_left}, sig2_right={sig2_right}, eta2={eta2}"
        )));
    }
    let t = lm_statistic(ts, tau, m)?;
    let c = m as f64 / (ts.n() as f64).sqrt();
    let var = (sig2_left + sig2_right) * c * c / 3.0 + 2.0 * eta2;
    Ok(TestResult::from_stat((m as f64).sqrt() * t / var.sqrt(), var))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ts(y: &[f64]) -> TickSeries {
        TickSeries::equidistant(y.to_vec()).unwrap()
    }

    #[test]
    fn preaverage_examples() {
        let s = ts(&[0.0, 1.0, 2.0, 3.0]);
        assert_eq!(preaveraged_price(&s, 2, 2).unwrap(), 2.5);
        assert_eq!(preaveraged_price(&s, 3, 4).unwrap(), 3.0);
        assert_eq!(preaveraged_price(&s, 2, 5).unwrap(), 2.5);
        assert!(preaveraged_price(&s, 4, 1).is_err());
        let c = ts(&[7.5; 9]);
        for j in 0..=8 {
            assert_eq!(preaveraged_price(&c, j, 3).unwrap(), 7.5);
        }
    }

    #[test]
    fn statistic_examples() {
        let s = ts(&[0.0, 1.0, 2.0, 3.0]);
        // tau in [1/3, 2/3) picks l = 2
        assert_eq!(index_after(&s, 0.4), 2);
        assert_eq!(lm_statistic(&s, 0.4, 2).unwrap(), 2.0);
        assert_eq!(lm_statistic_weighted(&s, 2, 2).unwrap(), 2.0);
        assert!(lm_statistic(&s, 0.1, 2).is_err());
        assert_eq!(lm_statistic(&ts(&[3.0; 12]), 0.5, 3).unwrap(), 0.0);
    }

    #[test]
    fn step_path_recovers_jump() {
        let y: Vec<f64> = (0..=20).map(|i| if i > 10 { 0.004 } else { 0.0 }).collect();
        let s = ts(&y);
        let est = lm_statistic(&s, 0.5, 4).unwrap();
        assert!((est - 0.004).abs() < 1e-15);
        let adj = adjusted_lm_statistic(&s, (8, 13), 3).unwrap();
        assert_eq!(adj, 0.004);
    }

    #[test]
    fn cut_out_differs_by_window_interior_only() {
        let y: Vec<f64> = (0..=40).map(|i| ((i * 37 % 11) as f64).sin()).collect();
        let s = ts(&y);
        let m = 4;
        let (lo, hi) = (18, 23);
        let plain = lm_statistic_at(&s, lo, m).unwrap();
        let cut = adjusted_lm_statistic(&s, (lo, hi), m).unwrap();
        let shift: f64 = (0..m).map(|k| (y[hi + k] - y[lo + k]) / m as f64).sum();
        assert!((cut - plain - shift).abs() < 1e-12);
    }

    #[test]
    fn window_rule() {
        let lm = LmConfig::moderate_noise();
        assert_eq!(lm.window(1200), 1);
        assert_eq!(lm.window(3600), 2);
        let big = LmConfig {
            multiplier: 2,
            ..LmConfig::large_noise()
        };
        assert_eq!(big.window(3600), 8);
    }

    #[test]
    fn test_rejects_bad_plugins() {
        let s = ts(&(0..30).map(|i| i as f64).collect::<Vec<_>>());
        assert!(lm_test(&s, 0.5, 2, 0.0, 1.0, 1.0).is_err());
        let r = lm_test(&s, 0.5, 2, 1.0, 1.0, 0.0).unwrap();
        assert!(r.variance > 0.0 && r.pvalue <= 1.0);
    }
}
