//! Synthetic renewal epidemics on a lattice with a known zoning, and the
//! adjusted Rand index for scoring recovered partitions against it.
//!
//! Each cell runs its own renewal process driven by its region's R profile;
//! cells do not infect each other. Randomness comes from one ChaCha8 stream
//! per cell, seeded from `splitmix64(seed ^ fnv1a64(cell_id))`, so a cell's
//! series depends only on the scenario seed and its id.

use std::collections::{BTreeMap, VecDeque};

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Calendar, IncidenceSeries, Point, PolygonPart, UnitGeometry, UnitId};
use crate::repro::{ReproError, SerialInterval, SiParams};
use crate::zoning::Partition;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("invalid R profile: {0}")]
    InvalidProfile(String),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("region {0} is not connected on the lattice")]
    DisconnectedRegion(usize),
    #[error("partitions cover different units")]
    UnitMismatch,
    #[error(transparent)]
    SerialInterval(#[from] ReproError),
}

/// How new cases are drawn from the expected count `lambda_t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Noise {
    #[default]
    Poisson,
    /// `N_t = lambda_t` exactly.
    Deterministic,
}

/// Runs `N_0 = i0`, `N_t = draw(R(t) * sum_{tau=1..min(t,L)} N_{t-tau} w(tau))`
/// for `t < r.len()`.
pub fn simulate_renewal<G: Rng + ?Sized>(
    r: &[f64],
    si: &SerialInterval,
    i0: f64,
    noise: Noise,
    rng: &mut G,
) -> Result<Vec<f64>, SynthError> {
    if let Some(bad) = r.iter().find(|v| !v.is_finite() || **v < 0.0) {
        return Err(SynthError::InvalidProfile(format!("R value {bad} is not a finite nonnegative number")));
    }
    if !(i0.is_finite() && i0 >= 1.0) {
        return Err(SynthError::InvalidProfile(format!("initial cases {i0} must be at least 1")));
    }
    if r.len() <= si.max_lag() {
        return Err(SynthError::InvalidProfile(format!(
            "{} days do not exceed the serial interval support of {} days",
            r.len(),
            si.max_lag()
        )));
    }
    let mut n = Vec::with_capacity(r.len());
    n.push(i0);
    for t in 1..r.len() {
        let pressure: f64 = (1..=t.min(si.max_lag())).map(|tau| n[t - tau] * si.weight(tau)).sum();
        let lambda = r[t] * pressure;
        let draw = match noise {
            Noise::Deterministic => lambda,
            Noise::Poisson if lambda <= 0.0 => 0.0,
            Noise::Poisson => Poisson::new(lambda)
                .map_err(|e| SynthError::InvalidProfile(format!("expected count {lambda} on day {t}: {e}")))?
                .sample(rng),
        };
        n.push(draw);
    }
    Ok(n)
}

/// One constant piece of an R profile, in force from `from_day` until the
/// next segment starts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Segment {
    pub from_day: usize,
    pub r: f64,
}

/// Piecewise-constant R over days.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Profile(pub Vec<Segment>);

impl Profile {
    pub fn constant(r: f64) -> Self {
        Self(vec![Segment { from_day: 0, r }])
    }

    pub fn step(before: f64, change_day: usize, after: f64) -> Self {
        Self(vec![
            Segment { from_day: 0, r: before },
            Segment {
                from_day: change_day,
                r: after,
            },
        ])
    }

    fn validate(&self) -> Result<(), SynthError> {
        let first = self.0.first().ok_or_else(|| SynthError::InvalidProfile("no segments".into()))?;
        if first.from_day != 0 {
            return Err(SynthError::InvalidProfile("first segment must start on day 0".into()));
        }
        if self.0.windows(2).any(|w| w[1].from_day <= w[0].from_day) {
            return Err(SynthError::InvalidProfile("segment start days must increase".into()));
        }
        if let Some(s) = self.0.iter().find(|s| !(s.r.is_finite() && s.r > 0.0)) {
            return Err(SynthError::InvalidProfile(format!("R value {} must be positive", s.r)));
        }
        Ok(())
    }

    /// Daily values for `days` days.
    pub fn values(&self, days: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(days);
        let mut seg = 0;
        for t in 0..days {
            while seg + 1 < self.0.len() && self.0[seg + 1].from_day <= t {
                seg += 1;
            }
            out.push(self.0[seg].r);
        }
        out
    }
}

fn default_start() -> NaiveDate {
    NaiveDate::from_ymd_opt(2020, 2, 24).unwrap()
}

fn default_initial_cases() -> f64 {
    100.0
}

/// A lattice of unit-square cells, each assigned to a region (or left empty
/// with `null`), with one R profile per region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub rows: usize,
    pub cols: usize,
    /// `regions[row][col]` is a zero-based index into `profiles`, or `null`
    /// for a cell that does not exist.
    pub regions: Vec<Vec<Option<usize>>>,
    pub profiles: Vec<Profile>,
    pub days: usize,
    #[serde(default = "default_initial_cases")]
    pub initial_cases: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub noise: Noise,
    #[serde(default = "default_start")]
    pub start_date: NaiveDate,
    #[serde(default)]
    pub serial_interval: SiParams,
}

impl Scenario {
    /// Every cell in region 0.
    pub fn uniform(rows: usize, cols: usize, profile: Profile, days: usize) -> Self {
        Self {
            rows,
            cols,
            regions: vec![vec![Some(0); cols]; rows],
            profiles: vec![profile],
            days,
            initial_cases: default_initial_cases(),
            seed: 0,
            noise: Noise::default(),
            start_date: default_start(),
            serial_interval: SiParams::default(),
        }
    }

    /// Left half of the columns in region 0, right half in region 1.
    pub fn halves(rows: usize, cols: usize, left: Profile, right: Profile, days: usize) -> Self {
        let mut sc = Self::uniform(rows, cols, left, days);
        sc.profiles.push(right);
        for row in &mut sc.regions {
            for (c, cell) in row.iter_mut().enumerate() {
                *cell = Some(usize::from(c >= cols / 2));
            }
        }
        sc
    }

    /// `profiles.len()` horizontal bands of near-equal height.
    pub fn bands(rows: usize, cols: usize, profiles: Vec<Profile>, days: usize) -> Self {
        let k = profiles.len().max(1);
        let mut sc = Self::uniform(rows, cols, Profile::constant(1.0), days);
        sc.profiles = profiles;
        for (r, row) in sc.regions.iter_mut().enumerate() {
            row.iter_mut().for_each(|cell| *cell = Some(r * k / rows));
        }
        sc
    }

    pub fn from_json(text: &str) -> Result<Self, SynthError> {
        serde_json::from_str(text).map_err(|e| SynthError::InvalidScenario(e.to_string()))
    }

    pub fn cell_id(&self, row: usize, col: usize) -> String {
        let width = self.rows.max(self.cols).saturating_sub(1).to_string().len();
        format!("r{row:0width$}c{col:0width$}")
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let invalid = |m: String| Err(SynthError::InvalidScenario(m));
        if self.rows < 2 || self.cols < 2 {
            return invalid(format!("lattice {}x{} is smaller than 2x2", self.rows, self.cols));
        }
        if self.regions.len() != self.rows || self.regions.iter().any(|r| r.len() != self.cols) {
            return invalid(format!("region map must be {} rows of {} cells", self.rows, self.cols));
        }
        if !(self.initial_cases.is_finite() && self.initial_cases >= 1.0) {
            return invalid(format!("initial_cases {} must be at least 1", self.initial_cases));
        }
        for p in &self.profiles {
            p.validate()?;
        }
        let mut sizes = vec![0usize; self.profiles.len()];
        for cell in self.regions.iter().flatten().flatten() {
            match sizes.get_mut(*cell) {
                Some(s) => *s += 1,
                None => return invalid(format!("region {cell} has no profile")),
            }
        }
        if let Some(empty) = sizes.iter().position(|s| *s == 0) {
            return invalid(format!("region {empty} has no cells"));
        }
        for region in 0..self.profiles.len() {
            if !self.region_connected(region) {
                return Err(SynthError::DisconnectedRegion(region));
            }
        }
        Ok(())
    }

    fn region_connected(&self, region: usize) -> bool {
        let cells: Vec<(usize, usize)> = (0..self.rows)
            .flat_map(|r| (0..self.cols).map(move |c| (r, c)))
            .filter(|&(r, c)| self.regions[r][c] == Some(region))
            .collect();
        let mut seen = vec![vec![false; self.cols]; self.rows];
        let mut queue = VecDeque::from([cells[0]]);
        seen[cells[0].0][cells[0].1] = true;
        let mut reached = 0;
        while let Some((r, c)) = queue.pop_front() {
            reached += 1;
            let neighbours = [
                (r.wrapping_sub(1), c),
                (r + 1, c),
                (r, c.wrapping_sub(1)),
                (r, c + 1),
            ];
            for (nr, nc) in neighbours {
                if nr < self.rows && nc < self.cols && !seen[nr][nc] && self.regions[nr][nc] == Some(region) {
                    seen[nr][nc] = true;
                    queue.push_back((nr, nc));
                }
            }
        }
        reached == cells.len()
    }
}

/// 64-bit FNV-1a.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(*b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Random stream of one cell.
pub fn cell_rng(seed: u64, cell_id: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix64(seed ^ fnv1a64(cell_id.as_bytes())))
}

/// Unit labels without costs, as read from a truth or clusters file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    pub units: Vec<UnitId>,
    pub labels: Vec<usize>,
}

impl Assignment {
    pub fn cluster_sizes(&self) -> BTreeMap<usize, usize> {
        let mut out = BTreeMap::new();
        for l in &self.labels {
            *out.entry(*l).or_insert(0) += 1;
        }
        out
    }
}

impl From<&Partition> for Assignment {
    fn from(p: &Partition) -> Self {
        Self {
            units: p.units.clone(),
            labels: p.labels.clone(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticDataset {
    pub series: Vec<IncidenceSeries>,
    pub geoms: Vec<UnitGeometry>,
    /// Region of each cell, numbered from 1 in order of first appearance.
    pub truth: Assignment,
}

/// Simulates every cell of the scenario. Output is sorted by cell id, which
/// is row-major lattice order.
pub fn make_scenario(sc: &Scenario) -> Result<SyntheticDataset, SynthError> {
    sc.validate()?;
    let si = sc.serial_interval.build()?;
    let calendar = Calendar::new(sc.start_date, sc.days).map_err(|e| SynthError::InvalidScenario(e.to_string()))?;
    let profiles: Vec<Vec<f64>> = sc.profiles.iter().map(|p| p.values(sc.days)).collect();
    let cells: Vec<(usize, usize, usize)> = (0..sc.rows)
        .flat_map(|r| (0..sc.cols).map(move |c| (r, c)))
        .filter_map(|(r, c)| sc.regions[r][c].map(|g| (r, c, g)))
        .collect();

    let series = cells
        .par_iter()
        .map(|&(r, c, g)| {
            let id = sc.cell_id(r, c);
            let mut rng = cell_rng(sc.seed, &id);
            let counts = simulate_renewal(&profiles[g], &si, sc.initial_cases, sc.noise, &mut rng)?;
            IncidenceSeries::new(UnitId::new(id), calendar, counts)
                .map_err(|e| SynthError::InvalidScenario(e.to_string()))
        })
        .collect::<Result<Vec<_>, _>>()?;

    let geoms = cells
        .iter()
        .map(|&(r, c, _)| {
            let (x0, y0) = (c as f64, (sc.rows - 1 - r) as f64);
            let p = Point::new;
            let square = vec![p(x0, y0), p(x0 + 1.0, y0), p(x0 + 1.0, y0 + 1.0), p(x0, y0 + 1.0), p(x0, y0)];
            UnitGeometry {
                unit: UnitId::new(sc.cell_id(r, c)),
                centroid: p(x0 + 0.5, y0 + 0.5),
                polygon: Some(vec![PolygonPart {
                    outer: square,
                    holes: vec![],
                }]),
            }
        })
        .collect();

    let mut relabel = BTreeMap::new();
    let labels = cells
        .iter()
        .map(|&(_, _, g)| {
            let next = relabel.len() + 1;
            *relabel.entry(g).or_insert(next)
        })
        .collect();
    let truth = Assignment {
        units: series.iter().map(|s| s.unit.clone()).collect(),
        labels,
    };
    Ok(SyntheticDataset { series, geoms, truth })
}

fn choose2(n: u64) -> f64 {
    (n * n.saturating_sub(1) / 2) as f64
}

/// Adjusted Rand index between two labellings of the same units, matched by
/// unit id. Two single-cluster labellings score 1.
pub fn adjusted_rand_index(p: &Assignment, truth: &Assignment) -> Result<f64, SynthError> {
    if p.units.len() != truth.units.len() || p.labels.len() != p.units.len() || truth.labels.len() != truth.units.len() {
        return Err(SynthError::UnitMismatch);
    }
    let truth_of: BTreeMap<&str, usize> = truth
        .units
        .iter()
        .zip(&truth.labels)
        .map(|(u, l)| (u.id.as_str(), *l))
        .collect();
    if truth_of.len() != truth.units.len() {
        return Err(SynthError::UnitMismatch);
    }
    let mut table: BTreeMap<(usize, usize), u64> = BTreeMap::new();
    let mut rows: BTreeMap<usize, u64> = BTreeMap::new();
    let mut cols: BTreeMap<usize, u64> = BTreeMap::new();
    for (u, a) in p.units.iter().zip(&p.labels) {
        let b = *truth_of.get(u.id.as_str()).ok_or(SynthError::UnitMismatch)?;
        *table.entry((*a, b)).or_insert(0) += 1;
        *rows.entry(*a).or_insert(0) += 1;
        *cols.entry(b).or_insert(0) += 1;
    }
    let index: f64 = table.values().map(|n| choose2(*n)).sum();
    let sum_a: f64 = rows.values().map(|n| choose2(*n)).sum();
    let sum_b: f64 = cols.values().map(|n| choose2(*n)).sum();
    let total = choose2(p.units.len() as u64);
    // (index - expected) / (max - expected), scaled by `total` so integer
    // tables give exact quotients.
    let chance = sum_a * sum_b;
    let den = (sum_a + sum_b) / 2.0 * total - chance;
    if den == 0.0 {
        return Ok(1.0);
    }
    Ok((index * total - chance) / den)
}
