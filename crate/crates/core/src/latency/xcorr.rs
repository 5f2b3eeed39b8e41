//! Time-domain cross-correlation delay estimate between two gyro traces.

use thiserror::Error;

use super::GyroTrace;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayOptions {
    /// Largest lag searched, seconds.
    pub max_lag_s: f64,
    /// Smallest time-aligned overlap of the two traces, seconds.
    pub min_overlap_s: f64,
}

impl Default for DelayOptions {
    fn default() -> Self {
        DelayOptions {
            max_lag_s: 1.0,
            min_overlap_s: 4.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DelayError {
    #[error("sample rates differ: master {master} Hz, slave {slave} Hz")]
    RateMismatch { master: f64, slave: f64 },
    #[error("undefined delay: {0} trace has zero variance")]
    UndefinedDelay(&'static str),
    #[error("insufficient data: traces overlap {overlap_s:.3} s, need {required_s:.3} s")]
    InsufficientData { overlap_s: f64, required_s: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayEstimate {
    pub delay_ms: f64,
    /// Integer lag of the correlation maximum, samples.
    pub peak_lag: usize,
    pub peak_corr: f64,
    /// Highest other local maximum in the search range, if any.
    pub second_peak_corr: Option<f64>,
}

impl DelayEstimate {
    /// Peak over second-peak correlation; `None` without a positive second
    /// peak.
    pub fn peak_ratio(&self) -> Option<f64> {
        self.second_peak_corr
            .filter(|&s| s > 0.0)
            .map(|s| self.peak_corr / s)
    }
}

/// Delay of `slave` behind `master` in milliseconds, with default options.
pub fn estimate_delay(master: &GyroTrace, slave: &GyroTrace) -> Result<f64, DelayError> {
    estimate_delay_with(master, slave, &DelayOptions::default()).map(|e| e.delay_ms)
}

fn centered(samples: &[f64]) -> Vec<f64> {
    let mean = samples.iter().sum::<f64>() / samples.len().max(1) as f64;
    samples.iter().map(|v| v - mean).collect()
}

/// Correlation over lags `0..=max_lag` with sub-sample parabolic refinement.
///
/// Both traces are zero-meaned, and each lag's correlation is the Pearson
/// coefficient of the overlapping parts only, so the shrinking overlap at
/// larger lags does not bias the peak toward zero.
pub fn estimate_delay_with(
    master: &GyroTrace,
    slave: &GyroTrace,
    opts: &DelayOptions,
) -> Result<DelayEstimate, DelayError> {
    if (master.rate_hz - slave.rate_hz).abs() > 1e-6 * master.rate_hz.abs().max(1.0) {
        return Err(DelayError::RateMismatch {
            master: master.rate_hz,
            slave: slave.rate_hz,
        });
    }
    let period_us = master.period_us();
    let a = centered(&master.samples);
    let b = centered(&slave.samples);

    // slave sample j sits at master index j + n0, plus `resid_us`
    let offset_us = slave.t0_us as f64 - master.t0_us as f64;
    let n0 = (offset_us / period_us).round() as i64;
    let resid_us = offset_us - n0 as f64 * period_us;

    let span = |k: i64| -> (usize, usize) {
        let lo = (n0 - k).max(0);
        let hi = (a.len() as i64).min(b.len() as i64 + n0 - k);
        if hi <= lo {
            (0, 0)
        } else {
            (lo as usize, hi as usize)
        }
    };
    let (lo, hi) = span(0);
    let overlap_s = (hi - lo) as f64 / master.rate_hz;
    if overlap_s + 1e-9 < opts.min_overlap_s {
        return Err(DelayError::InsufficientData {
            overlap_s,
            required_s: opts.min_overlap_s,
        });
    }
    if a[lo..hi].iter().all(|v| v.abs() < 1e-12) {
        return Err(DelayError::UndefinedDelay("master"));
    }
    let j0 = (lo as i64 - n0) as usize;
    if b[j0..j0 + (hi - lo)].iter().all(|v| v.abs() < 1e-12) {
        return Err(DelayError::UndefinedDelay("slave"));
    }

    let corr = |k: i64| -> Option<f64> {
        let (lo, hi) = span(k);
        if hi - lo < 2 {
            return None;
        }
        let n = (hi - lo) as f64;
        let (mut sa, mut sb, mut ab, mut aa, mut bb) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for i in lo..hi {
            let x = a[i];
            let y = b[(i as i64 + k - n0) as usize];
            sa += x;
            sb += y;
            ab += x * y;
            aa += x * x;
            bb += y * y;
        }
        let cov = ab - sa * sb / n;
        let norm = ((aa - sa * sa / n) * (bb - sb * sb / n)).sqrt();
        (norm > 1e-12).then(|| cov / norm)
    };

    let max_lag = (opts.max_lag_s * master.rate_hz).round().max(0.0) as i64;
    let c: Vec<Option<f64>> = (0..=max_lag).map(corr).collect();
    let (peak, peak_corr) = c
        .iter()
        .enumerate()
        .filter_map(|(k, v)| v.map(|v| (k, v)))
        .fold(None, |best: Option<(usize, f64)>, (k, v)| match best {
            Some((_, bv)) if bv >= v => best,
            _ => Some((k, v)),
        })
        .ok_or(DelayError::UndefinedDelay("slave"))?;

    let at = |k: i64| -> Option<f64> {
        if (0..=max_lag).contains(&k) {
            c[k as usize]
        } else {
            corr(k)
        }
    };
    let k = peak as i64;
    let delta = match (at(k - 1), at(k + 1)) {
        (Some(cm), Some(cp)) => {
            let denom = cm - 2.0 * peak_corr + cp;
            if denom < 0.0 {
                (0.5 * (cm - cp) / denom).clamp(-0.5, 0.5)
            } else {
                0.0
            }
        }
        _ => 0.0,
    };

    let second_peak_corr = (0..=max_lag)
        .filter(|&j| j != k)
        .filter_map(|j| {
            let v = at(j)?;
            let left = at(j - 1).is_none_or(|l| v >= l);
            let right = at(j + 1).is_none_or(|r| v >= r);
            (left && right).then_some(v)
        })
        .reduce(f64::max);

    let delay_us = (k as f64 + delta) * period_us + resid_us;
    Ok(DelayEstimate {
        delay_ms: (delay_us / 1000.0).max(0.0),
        peak_lag: peak,
        peak_corr,
        second_peak_corr,
    })
}
