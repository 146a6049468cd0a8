use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;
use std::path::Path;

use chrono::{Datelike, NaiveDate};
use serde::Serialize;

use super::{open, read_dated_values, AggregationMap, IngestError};
use crate::dataset::{Calendar, IncidenceSeries, UnitId};

/// Daily deaths of one unit, split by calendar year.
///
/// Every year present anywhere in the source file appears in `by_year`, so a
/// unit with no deaths in some year still contributes zeros to that year's
/// baseline.
#[derive(Debug, Clone, PartialEq)]
pub struct MortalityPanel {
    pub unit: UnitId,
    pub by_year: BTreeMap<i32, Vec<(NaiveDate, f64)>>,
}

impl MortalityPanel {
    pub fn years(&self) -> impl Iterator<Item = i32> + '_ {
        self.by_year.keys().copied()
    }

    fn deaths_by_day(&self, year: i32) -> BTreeMap<(u32, u32), f64> {
        let mut out = BTreeMap::new();
        for (date, v) in self.by_year.get(&year).into_iter().flatten() {
            if !is_leap_day(date) {
                *out.entry((date.month(), date.day())).or_insert(0.0) += v;
            }
        }
        out
    }
}

fn is_leap_day(d: &NaiveDate) -> bool {
    d.month() == 2 && d.day() == 29
}

pub fn parse_mortality_csv(path: impl AsRef<Path>) -> Result<Vec<MortalityPanel>, IngestError> {
    parse_mortality_reader(open(path.as_ref())?)
}

pub fn parse_mortality_reader<R: Read>(reader: R) -> Result<Vec<MortalityPanel>, IngestError> {
    let records = read_dated_values(reader, "deaths")?;
    let years: BTreeSet<i32> = records.values().flatten().map(|(d, _)| d.year()).collect();
    Ok(records
        .into_iter()
        .map(|(unit, rows)| {
            let mut by_year: BTreeMap<i32, Vec<(NaiveDate, f64)>> =
                years.iter().map(|y| (*y, Vec::new())).collect();
            for (date, v) in rows {
                by_year.entry(date.year()).or_default().push((date, v));
            }
            MortalityPanel {
                unit: UnitId::new(unit),
                by_year,
            }
        })
        .collect())
}

/// Sums the panels of fine units inside each coarse unit, sorted by coarse id.
pub fn aggregate_panels(
    panels: &[MortalityPanel],
    map: &AggregationMap,
) -> Result<Vec<MortalityPanel>, IngestError> {
    let mut groups: BTreeMap<&str, BTreeMap<i32, BTreeMap<NaiveDate, f64>>> = BTreeMap::new();
    for p in panels {
        let coarse = map
            .coarse_of(&p.unit.id)
            .ok_or_else(|| IngestError::UnmappedUnit(p.unit.id.clone()))?;
        let group = groups.entry(coarse).or_default();
        for (year, rows) in &p.by_year {
            let days = group.entry(*year).or_default();
            for (date, v) in rows {
                *days.entry(*date).or_insert(0.0) += v;
            }
        }
    }
    Ok(groups
        .into_iter()
        .map(|(coarse, years)| MortalityPanel {
            unit: UnitId::new(coarse),
            by_year: years
                .into_iter()
                .map(|(y, days)| (y, days.into_iter().collect()))
                .collect(),
        })
        .collect())
}

/// Target-year deaths minus the same-day baseline mean.
#[derive(Debug, Clone, PartialEq)]
pub struct Excess {
    /// Target-year deaths per calendar day (0 on Feb 29).
    pub target: Vec<f64>,
    /// Unfloored differential per calendar day. Feb 29 carries 0.
    pub raw: Vec<f64>,
    /// `max(raw, 0)`; Feb 29 is flagged imputed.
    pub floored: IncidenceSeries,
}

/// Excess mortality over the span of dates observed in the target year.
pub fn compute_excess(panel: &MortalityPanel, target_year: i32) -> Result<Excess, IngestError> {
    let rows = panel
        .by_year
        .get(&target_year)
        .filter(|r| !r.is_empty())
        .ok_or(IngestError::MissingTargetYear(target_year))?;
    let first = rows.iter().map(|(d, _)| *d).min().unwrap();
    let last = rows.iter().map(|(d, _)| *d).max().unwrap();
    compute_excess_on(panel, target_year, Calendar::spanning(first, last)?)
}

/// Excess mortality on an explicit calendar, which must lie in the target
/// year. Days with no target-year row count as zero deaths.
pub fn compute_excess_on(
    panel: &MortalityPanel,
    target_year: i32,
    calendar: Calendar,
) -> Result<Excess, IngestError> {
    if !panel.by_year.contains_key(&target_year) {
        return Err(IngestError::MissingTargetYear(target_year));
    }
    if calendar.start.year() != target_year || calendar.end().year() != target_year {
        return Err(IngestError::MissingTargetYear(target_year));
    }
    let baseline_years: Vec<i32> = panel.years().filter(|y| *y != target_year).collect();
    if baseline_years.is_empty() {
        return Err(IngestError::EmptyBaseline);
    }
    let target = panel.deaths_by_day(target_year);
    let mut baseline_sum: BTreeMap<(u32, u32), f64> = BTreeMap::new();
    for y in &baseline_years {
        for (key, v) in panel.deaths_by_day(*y) {
            *baseline_sum.entry(key).or_insert(0.0) += v;
        }
    }
    let n = baseline_years.len() as f64;
    let mut deaths = Vec::with_capacity(calendar.len);
    let mut raw = Vec::with_capacity(calendar.len);
    let mut imputed = Vec::with_capacity(calendar.len);
    for date in calendar.dates() {
        if is_leap_day(&date) {
            deaths.push(0.0);
            raw.push(0.0);
            imputed.push(true);
            continue;
        }
        let key = (date.month(), date.day());
        let t = target.get(&key).copied().unwrap_or(0.0);
        let b = baseline_sum.get(&key).copied().unwrap_or(0.0) / n;
        deaths.push(t);
        raw.push(t - b);
        imputed.push(false);
    }
    let floored = raw.iter().map(|r| r.max(0.0)).collect();
    let floored = IncidenceSeries::with_imputed(panel.unit.clone(), calendar, floored, imputed)?;
    Ok(Excess {
        target: deaths,
        raw,
        floored,
    })
}

/// Total of one 7-day block and its change against a reference block.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeeklyChange {
    pub week_start: NaiveDate,
    pub total: f64,
    /// `100 * (total - reference) / reference`; absent when the reference
    /// total is zero.
    pub percent_change: Option<f64>,
}

/// Splits `values` into consecutive 7-day blocks from the calendar start
/// (a trailing partial block is dropped) and expresses each block relative to
/// block `reference_week`.
pub fn weekly_percent_change(values: &[f64], calendar: Calendar, reference_week: usize) -> Vec<WeeklyChange> {
    let totals: Vec<f64> = values.chunks_exact(7).map(|w| w.iter().sum()).collect();
    let reference = totals.get(reference_week).copied().filter(|r| *r != 0.0);
    totals
        .iter()
        .enumerate()
        .map(|(w, &total)| WeeklyChange {
            week_start: calendar.date(7 * w),
            total,
            percent_change: reference.map(|r| 100.0 * (total - r) / r),
        })
        .collect()
}
