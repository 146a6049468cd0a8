//! Dynamic Time Warping between R(t) trends and the pairwise distance matrix.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::UnitId;
use crate::repro::RtSeries;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DtwError {
    #[error("cannot align an empty series")]
    EmptySeries,
    #[error("band half-width {band} is narrower than the length difference {diff}")]
    InfeasibleWindow { band: usize, diff: usize },
    #[error("unit {0} has no valid R(t) day")]
    AllInvalid(String),
    #[error("a distance matrix needs at least two units, got {0}")]
    TooFewUnits(usize),
    #[error("invalid distance matrix: {0}")]
    InvalidMatrix(String),
}

/// Local move weights of the DTW recursion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum StepPattern {
    /// Horizontal, vertical and diagonal moves all weigh the local cost once.
    Symmetric1,
    /// Diagonal moves weigh the local cost twice.
    #[default]
    Symmetric2,
}

impl std::str::FromStr for StepPattern {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "symmetric1" => Ok(Self::Symmetric1),
            "symmetric2" => Ok(Self::Symmetric2),
            other => Err(format!("unknown step pattern {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DtwConfig {
    pub step: StepPattern,
    /// Sakoe–Chiba band half-width in days; `None` allows any warping.
    pub window: Option<usize>,
    pub normalize: bool,
}

impl Default for DtwConfig {
    fn default() -> Self {
        Self {
            step: StepPattern::Symmetric2,
            window: None,
            normalize: true,
        }
    }
}

/// DTW distance with local cost `|x_i - y_j|`.
///
/// Normalization divides by `len(x) + len(y)` under `symmetric2` and by
/// `max(len(x), len(y))` under `symmetric1`.
pub fn dtw_distance(x: &[f64], y: &[f64], cfg: &DtwConfig) -> Result<f64, DtwError> {
    let (n, m) = (x.len(), y.len());
    if n == 0 || m == 0 {
        return Err(DtwError::EmptySeries);
    }
    let band = match cfg.window {
        Some(w) => {
            let diff = n.abs_diff(m);
            if w < diff {
                return Err(DtwError::InfeasibleWindow { band: w, diff });
            }
            w
        }
        None => usize::MAX,
    };
    let diag_weight = match cfg.step {
        StepPattern::Symmetric1 => 1.0,
        StepPattern::Symmetric2 => 2.0,
    };

    let mut prev = vec![f64::INFINITY; m];
    let mut cur = vec![f64::INFINITY; m];
    for i in 0..n {
        let lo = i.saturating_sub(band);
        let hi = i.saturating_add(band).min(m - 1);
        cur.iter_mut().for_each(|c| *c = f64::INFINITY);
        for j in lo..=hi {
            let cost = (x[i] - y[j]).abs();
            cur[j] = if i == 0 && j == 0 {
                diag_weight * cost
            } else {
                let mut best = f64::INFINITY;
                if i > 0 {
                    best = best.min(prev[j] + cost);
                }
                if j > 0 {
                    best = best.min(cur[j - 1] + cost);
                }
                if i > 0 && j > 0 {
                    best = best.min(prev[j - 1] + diag_weight * cost);
                }
                best
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }

    let total = prev[m - 1];
    Ok(if cfg.normalize {
        match cfg.step {
            StepPattern::Symmetric1 => total / n.max(m) as f64,
            StepPattern::Symmetric2 => total / (n + m) as f64,
        }
    } else {
        total
    })
}

/// Reduces a masked R(t) series to the gap-free sequence fed to DTW: leading
/// and trailing invalid days are trimmed, interior gaps are linearly
/// interpolated.
pub fn prepare_trend(rt: &RtSeries) -> Result<Vec<f64>, DtwError> {
    let valid: Vec<(usize, f64)> = rt
        .values
        .iter()
        .enumerate()
        .filter_map(|(d, v)| v.map(|v| (d, v)))
        .collect();
    let (first, last) = match (valid.first(), valid.last()) {
        (Some(a), Some(b)) => (a.0, b.0),
        _ => return Err(DtwError::AllInvalid(rt.unit.id.clone())),
    };
    let mut out = Vec::with_capacity(last - first + 1);
    for pair in valid.windows(2) {
        let ((d0, v0), (d1, v1)) = (pair[0], pair[1]);
        out.push(v0);
        let span = (d1 - d0) as f64;
        for gap in 1..d1 - d0 {
            let frac = gap as f64 / span;
            out.push(v0 + (v1 - v0) * frac);
        }
    }
    out.push(valid[valid.len() - 1].1);
    Ok(out)
}

/// Symmetric matrix of pairwise DTW distances, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    units: Vec<UnitId>,
    values: Vec<f64>,
}

impl DistanceMatrix {
    /// Builds a matrix from row-major values, checking symmetry, a zero
    /// diagonal and finite nonnegative entries.
    pub fn from_values(units: Vec<UnitId>, values: Vec<f64>) -> Result<Self, DtwError> {
        let n = units.len();
        if values.len() != n * n {
            return Err(DtwError::InvalidMatrix(format!(
                "{} values for {n} units",
                values.len()
            )));
        }
        for i in 0..n {
            if values[i * n + i] != 0.0 {
                return Err(DtwError::InvalidMatrix(format!(
                    "nonzero diagonal at {}",
                    units[i].id
                )));
            }
            for j in 0..n {
                let v = values[i * n + j];
                if !v.is_finite() || v < 0.0 {
                    return Err(DtwError::InvalidMatrix(format!(
                        "entry ({}, {}) = {v}",
                        units[i].id, units[j].id
                    )));
                }
                if v != values[j * n + i] {
                    return Err(DtwError::InvalidMatrix(format!(
                        "asymmetric entry ({}, {})",
                        units[i].id, units[j].id
                    )));
                }
            }
        }
        Ok(Self { units, values })
    }

    /// Builds a matrix by evaluating `f(i, j)` for `i < j` and mirroring.
    pub fn from_fn(units: Vec<UnitId>, f: impl Fn(usize, usize) -> f64) -> Result<Self, DtwError> {
        let n = units.len();
        let mut values = vec![0.0; n * n];
        for i in 0..n {
            for j in i + 1..n {
                let v = f(i, j);
                values[i * n + j] = v;
                values[j * n + i] = v;
            }
        }
        Self::from_values(units, values)
    }

    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }

    pub fn units(&self) -> &[UnitId] {
        &self.units
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.units.len() + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.units.len();
        &self.values[i * n..(i + 1) * n]
    }

    /// Same matrix with every entry multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            units: self.units.clone(),
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }
}

/// Pairwise DTW distances between the prepared trends, in input order.
pub fn distance_matrix(trends: &[RtSeries], cfg: &DtwConfig) -> Result<DistanceMatrix, DtwError> {
    let n = trends.len();
    if n < 2 {
        return Err(DtwError::TooFewUnits(n));
    }
    let prepared: Vec<Vec<f64>> = trends.iter().map(prepare_trend).collect::<Result<_, _>>()?;

    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (i + 1..n)
                .map(|j| dtw_distance(&prepared[i], &prepared[j], cfg))
                .collect::<Result<Vec<f64>, DtwError>>()
        })
        .collect::<Result<_, _>>()?;

    let mut values = vec![0.0; n * n];
    for (i, row) in rows.iter().enumerate() {
        for (offset, v) in row.iter().enumerate() {
            let j = i + 1 + offset;
            values[i * n + j] = *v;
            values[j * n + i] = *v;
        }
    }
    DistanceMatrix::from_values(trends.iter().map(|t| t.unit.clone()).collect(), values)
}
