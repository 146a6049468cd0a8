//! Time-dependent reproduction number R(t) from an incidence proxy.
//!
//! The estimator is the aggregated Wallinga–Teunis form: each case on day `s`
//! is attributed to earlier cases on day `u` in proportion to `N_u * w(s - u)`,
//! and R(t) is the mean number of attributed infectees per case on day `t`:
//!
//! ```text
//! R(t) = sum_{s>t} N_s * w(s - t) / D_s,    D_s = sum_{u<s} N_u * w(s - u)
//! ```

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Gamma};
use thiserror::Error;

use crate::dataset::{Calendar, IncidenceSeries, UnitId};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReproError {
    #[error("invalid serial interval parameters: {0}")]
    InvalidParams(String),
    #[error("empty incidence series")]
    EmptySeries,
    #[error("smoothing window must be odd and at least 1, got {0}")]
    InvalidWindow(usize),
}

/// Probability mass of the serial interval over lags `1..=max_lag` days.
#[derive(Debug, Clone, PartialEq)]
pub struct SerialInterval {
    pmf: Vec<f64>,
}

impl SerialInterval {
    /// `pmf[0]` is the weight of a one-day lag. Weights must be nonnegative
    /// and sum to one within 1e-9.
    pub fn from_pmf(pmf: Vec<f64>) -> Result<Self, ReproError> {
        if pmf.is_empty() {
            return Err(ReproError::InvalidParams("pmf needs at least one lag".into()));
        }
        if pmf.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(ReproError::InvalidParams(
                "pmf weights must be finite and nonnegative".into(),
            ));
        }
        let total: f64 = pmf.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(ReproError::InvalidParams(format!(
                "pmf sums to {total}, expected 1"
            )));
        }
        Ok(Self { pmf })
    }

    /// Point mass at a single lag.
    pub fn fixed(lag: usize) -> Result<Self, ReproError> {
        if lag == 0 {
            return Err(ReproError::InvalidParams("lag must be at least one day".into()));
        }
        let mut pmf = vec![0.0; lag];
        pmf[lag - 1] = 1.0;
        Ok(Self { pmf })
    }

    pub fn max_lag(&self) -> usize {
        self.pmf.len()
    }

    /// Weight of a lag of `tau` days; zero outside `1..=max_lag`.
    pub fn weight(&self, tau: usize) -> f64 {
        if tau == 0 || tau > self.pmf.len() {
            0.0
        } else {
            self.pmf[tau - 1]
        }
    }

    pub fn pmf(&self) -> &[f64] {
        &self.pmf
    }

    pub fn mean(&self) -> f64 {
        self.pmf
            .iter()
            .enumerate()
            .map(|(i, w)| (i + 1) as f64 * w)
            .sum()
    }
}

/// Parameters of the discretized gamma serial interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SiParams {
    pub mean: f64,
    pub sd: f64,
    pub max_lag: usize,
}

impl Default for SiParams {
    fn default() -> Self {
        Self {
            mean: 6.5,
            sd: 4.0,
            max_lag: 30,
        }
    }
}

impl SiParams {
    pub fn build(&self) -> Result<SerialInterval, ReproError> {
        discretize_gamma_si(self.mean, self.sd, self.max_lag)
    }
}

/// Discretizes a gamma distribution with the given mean and standard
/// deviation onto lags `1..=max_lag`: lag `tau` gets `F(tau+0.5) - F(tau-0.5)`,
/// the last lag absorbs the right tail, and the result is renormalized.
pub fn discretize_gamma_si(mean: f64, sd: f64, max_lag: usize) -> Result<SerialInterval, ReproError> {
    if !(mean.is_finite() && mean > 0.0) || !(sd.is_finite() && sd > 0.0) {
        return Err(ReproError::InvalidParams(format!(
            "mean and sd must be positive, got mean={mean} sd={sd}"
        )));
    }
    if max_lag == 0 {
        return Err(ReproError::InvalidParams("max_lag must be at least one day".into()));
    }
    let shape = (mean / sd).powi(2);
    let rate = mean / (sd * sd);
    let gamma = Gamma::new(shape, rate)
        .map_err(|e| ReproError::InvalidParams(format!("gamma({shape}, {rate}): {e}")))?;

    let mut pmf = Vec::with_capacity(max_lag);
    let mut lower = gamma.cdf(0.5);
    for tau in 1..max_lag {
        let upper = gamma.cdf(tau as f64 + 0.5);
        pmf.push((upper - lower).max(0.0));
        lower = upper;
    }
    pmf.push((1.0 - lower).max(0.0));

    let total: f64 = pmf.iter().sum();
    if !(total > 0.0) {
        return Err(ReproError::InvalidParams(format!(
            "gamma(mean={mean}, sd={sd}) puts no mass on lags >= 1"
        )));
    }
    pmf.iter_mut().for_each(|w| *w /= total);
    Ok(SerialInterval { pmf })
}

/// Daily R(t) for one unit. `None` marks days where the estimator is
/// undefined. `low_confidence[t]` is set where the day's count was imputed.
#[derive(Debug, Clone, PartialEq)]
pub struct RtSeries {
    pub unit: UnitId,
    pub calendar: Calendar,
    pub values: Vec<Option<f64>>,
    pub low_confidence: Vec<bool>,
}

impl RtSeries {
    pub fn is_valid(&self, day: usize) -> bool {
        self.values[day].is_some()
    }

    pub fn valid_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_some()).count()
    }
}

/// Wallinga–Teunis R(t). Day `t` is undefined when `N_t = 0`, when
/// `t >= T - L` (the last `L` days cannot see all their infectees), or when a
/// contributing day has a zero attribution denominator.
pub fn estimate_rt(series: &IncidenceSeries, si: &SerialInterval) -> Result<RtSeries, ReproError> {
    let counts = &series.counts;
    let n = counts.len();
    if n == 0 {
        return Err(ReproError::EmptySeries);
    }
    let lag = si.max_lag();

    // Attribution denominators D_s.
    let mut denom = vec![0.0; n];
    for (s, d) in denom.iter_mut().enumerate().skip(1) {
        let first = s.saturating_sub(lag);
        *d = (first..s).map(|u| counts[u] * si.weight(s - u)).sum();
    }

    let mut values = vec![None; n];
    for (t, value) in values.iter_mut().enumerate() {
        if counts[t] == 0.0 || t + lag >= n {
            continue;
        }
        let mut rt = 0.0;
        let mut defined = true;
        for s in t + 1..=t + lag {
            let num = counts[s] * si.weight(s - t);
            if num == 0.0 {
                continue;
            }
            if denom[s] == 0.0 {
                defined = false;
                break;
            }
            rt += num / denom[s];
        }
        if defined {
            *value = Some(rt);
        }
    }

    Ok(RtSeries {
        unit: series.unit.clone(),
        calendar: series.calendar,
        values,
        low_confidence: series.imputed.clone(),
    })
}

/// Centered moving average over valid days. A day is valid in the output when
/// at least `ceil(window / 2)` of the days in its window are valid.
pub fn smooth_rt(rt: &RtSeries, window: usize) -> Result<RtSeries, ReproError> {
    if window == 0 || window % 2 == 0 {
        return Err(ReproError::InvalidWindow(window));
    }
    let half = window / 2;
    let need = half + 1;
    let n = rt.values.len();
    let values = (0..n)
        .map(|t| {
            let lo = t.saturating_sub(half);
            let hi = (t + half).min(n - 1);
            let mut sum = 0.0;
            let mut count = 0usize;
            for v in rt.values[lo..=hi].iter().flatten() {
                sum += v;
                count += 1;
            }
            (count >= need).then(|| sum / count as f64)
        })
        .collect();
    Ok(RtSeries {
        unit: rt.unit.clone(),
        calendar: rt.calendar,
        values,
        low_confidence: rt.low_confidence.clone(),
    })
}
