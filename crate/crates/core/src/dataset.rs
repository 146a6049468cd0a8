//! Shared domain types: calendars, unit identifiers, incidence series and
//! unit geometry, plus the dataset validation that fixes unit ordering for
//! every downstream matrix and graph.

use std::collections::{BTreeMap, BTreeSet};

use chrono::{Duration, NaiveDate};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DatasetError {
    #[error("no series supplied")]
    NoSeries,
    #[error("no geometries supplied")]
    NoGeometries,
    #[error("unit {0} has a series but no geometry")]
    MissingGeometry(String),
    #[error("unit {0} does not share the dataset calendar")]
    CalendarMismatch(String),
    #[error("unit id {0} appears more than once")]
    DuplicateUnit(String),
    #[error("unit {unit} has a negative or non-finite count on day {day}")]
    NegativeCount { unit: String, day: usize },
    #[error("no observation of unit {0} falls inside the target calendar")]
    EmptyOverlap(String),
    #[error("calendar length must be at least one day")]
    EmptyCalendar,
    #[error("series of unit {unit} has {got} values, calendar has {expected} days")]
    LengthMismatch {
        unit: String,
        got: usize,
        expected: usize,
    },
    #[error("unit id must be nonempty")]
    EmptyUnitId,
}

/// A contiguous run of civil days.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Calendar {
    pub start: NaiveDate,
    pub len: usize,
}

impl Calendar {
    pub fn new(start: NaiveDate, len: usize) -> Result<Self, DatasetError> {
        if len == 0 {
            return Err(DatasetError::EmptyCalendar);
        }
        Ok(Self { start, len })
    }

    /// Calendar covering `first..=last`.
    pub fn spanning(first: NaiveDate, last: NaiveDate) -> Result<Self, DatasetError> {
        let days = (last - first).num_days();
        if days < 0 {
            return Err(DatasetError::EmptyCalendar);
        }
        Self::new(first, days as usize + 1)
    }

    pub fn date(&self, day: usize) -> NaiveDate {
        self.start + Duration::days(day as i64)
    }

    pub fn end(&self) -> NaiveDate {
        self.date(self.len - 1)
    }

    /// Day index of `date`, if it falls inside the calendar.
    pub fn index_of(&self, date: NaiveDate) -> Option<usize> {
        let offset = (date - self.start).num_days();
        if offset >= 0 && (offset as usize) < self.len {
            Some(offset as usize)
        } else {
            None
        }
    }

    pub fn dates(&self) -> impl Iterator<Item = NaiveDate> + '_ {
        (0..self.len).map(move |d| self.date(d))
    }
}

/// Identifier of a unit of analysis (province, LMA, lattice cell...).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct UnitId {
    pub id: String,
    pub label: String,
}

impl UnitId {
    pub fn new(id: impl Into<String>) -> Self {
        let id = id.into();
        Self {
            label: id.clone(),
            id,
        }
    }

    pub fn with_label(id: impl Into<String>, label: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            label: label.into(),
        }
    }
}

/// Daily nonnegative counts for one unit. `imputed[d]` marks days that were
/// absent from the source and filled with zero.
#[derive(Debug, Clone, PartialEq)]
pub struct IncidenceSeries {
    pub unit: UnitId,
    pub calendar: Calendar,
    pub counts: Vec<f64>,
    pub imputed: Vec<bool>,
}

impl IncidenceSeries {
    pub fn new(unit: UnitId, calendar: Calendar, counts: Vec<f64>) -> Result<Self, DatasetError> {
        let imputed = vec![false; counts.len()];
        Self::with_imputed(unit, calendar, counts, imputed)
    }

    pub fn with_imputed(
        unit: UnitId,
        calendar: Calendar,
        counts: Vec<f64>,
        imputed: Vec<bool>,
    ) -> Result<Self, DatasetError> {
        if unit.id.is_empty() {
            return Err(DatasetError::EmptyUnitId);
        }
        if counts.len() != calendar.len || imputed.len() != calendar.len {
            return Err(DatasetError::LengthMismatch {
                unit: unit.id,
                got: counts.len(),
                expected: calendar.len,
            });
        }
        if let Some(day) = counts.iter().position(|c| !c.is_finite() || *c < 0.0) {
            return Err(DatasetError::NegativeCount { unit: unit.id, day });
        }
        Ok(Self {
            unit,
            calendar,
            counts,
            imputed,
        })
    }

    pub fn total(&self) -> f64 {
        self.counts.iter().sum()
    }

    /// The observed (non-imputed) days as dated records, suitable for
    /// re-alignment with [`align_to_calendar`].
    pub fn observations(&self) -> Vec<(NaiveDate, f64)> {
        self.counts
            .iter()
            .zip(&self.imputed)
            .enumerate()
            .filter(|(_, (_, imp))| !**imp)
            .map(|(d, (c, _))| (self.calendar.date(d), *c))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dist2(&self, other: &Point) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }
}

/// Closed ring: first vertex repeated as the last.
pub type Ring = Vec<Point>;

#[derive(Debug, Clone, PartialEq)]
pub struct PolygonPart {
    pub outer: Ring,
    pub holes: Vec<Ring>,
}

impl PolygonPart {
    pub fn rings(&self) -> impl Iterator<Item = &Ring> {
        std::iter::once(&self.outer).chain(self.holes.iter())
    }
}

/// Planar geometry of one unit. Coordinates are in a projected CRS.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitGeometry {
    pub unit: UnitId,
    pub centroid: Point,
    pub polygon: Option<Vec<PolygonPart>>,
}

impl UnitGeometry {
    pub fn from_centroid(unit: UnitId, centroid: Point) -> Self {
        Self {
            unit,
            centroid,
            polygon: None,
        }
    }

    pub fn bbox(&self) -> Option<[f64; 4]> {
        let parts = self.polygon.as_ref()?;
        let mut b = [f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY];
        for p in parts.iter().flat_map(|p| p.outer.iter()) {
            b[0] = b[0].min(p.x);
            b[1] = b[1].min(p.y);
            b[2] = b[2].max(p.x);
            b[3] = b[3].max(p.y);
        }
        Some(b)
    }
}

/// Series and geometry for the same set of units, sorted by unit id, on one
/// shared calendar. Index `i` refers to the same unit everywhere downstream.
#[derive(Debug, Clone)]
pub struct ValidatedDataset {
    pub calendar: Calendar,
    pub series: Vec<IncidenceSeries>,
    pub geoms: Vec<UnitGeometry>,
}

impl ValidatedDataset {
    pub fn units(&self) -> Vec<UnitId> {
        self.series.iter().map(|s| s.unit.clone()).collect()
    }

    pub fn len(&self) -> usize {
        self.series.len()
    }

    pub fn is_empty(&self) -> bool {
        self.series.is_empty()
    }
}

/// Pairs each series with its geometry and fixes the lexicographic unit order.
///
/// Geometries without a series are dropped; a series without a geometry is an
/// error. Labels come from the geometry when it carries one.
pub fn validate_dataset(
    series: Vec<IncidenceSeries>,
    geoms: Vec<UnitGeometry>,
) -> Result<ValidatedDataset, DatasetError> {
    if series.is_empty() {
        return Err(DatasetError::NoSeries);
    }
    if geoms.is_empty() {
        return Err(DatasetError::NoGeometries);
    }

    let mut by_id: BTreeMap<String, IncidenceSeries> = BTreeMap::new();
    for s in series {
        if s.unit.id.is_empty() {
            return Err(DatasetError::EmptyUnitId);
        }
        if let Some(day) = s.counts.iter().position(|c| !c.is_finite() || *c < 0.0) {
            return Err(DatasetError::NegativeCount {
                unit: s.unit.id.clone(),
                day,
            });
        }
        if by_id.contains_key(&s.unit.id) {
            return Err(DatasetError::DuplicateUnit(s.unit.id));
        }
        by_id.insert(s.unit.id.clone(), s);
    }

    let mut geom_by_id: BTreeMap<String, UnitGeometry> = BTreeMap::new();
    for g in geoms {
        if geom_by_id.contains_key(&g.unit.id) {
            return Err(DatasetError::DuplicateUnit(g.unit.id));
        }
        geom_by_id.insert(g.unit.id.clone(), g);
    }

    let calendar = by_id.values().next().expect("nonempty").calendar;
    let mut out_series = Vec::with_capacity(by_id.len());
    let mut out_geoms = Vec::with_capacity(by_id.len());
    for (id, mut s) in by_id {
        if s.calendar != calendar || s.counts.len() != calendar.len {
            return Err(DatasetError::CalendarMismatch(id));
        }
        let mut g = geom_by_id
            .remove(&id)
            .ok_or_else(|| DatasetError::MissingGeometry(id.clone()))?;
        if g.unit.label != g.unit.id && s.unit.label == s.unit.id {
            s.unit.label = g.unit.label.clone();
        }
        g.unit = s.unit.clone();
        out_series.push(s);
        out_geoms.push(g);
    }

    Ok(ValidatedDataset {
        calendar,
        series: out_series,
        geoms: out_geoms,
    })
}

/// Places dated observations on `target`. Days with no observation are zero
/// and flagged imputed; observations outside the window are dropped and
/// repeated dates are summed.
pub fn align_to_calendar(
    unit: UnitId,
    observations: &[(NaiveDate, f64)],
    target: Calendar,
) -> Result<IncidenceSeries, DatasetError> {
    let mut counts = vec![0.0; target.len];
    let mut seen = vec![false; target.len];
    for (date, value) in observations {
        if let Some(d) = target.index_of(*date) {
            if !value.is_finite() || *value < 0.0 {
                return Err(DatasetError::NegativeCount {
                    unit: unit.id.clone(),
                    day: d,
                });
            }
            counts[d] += value;
            seen[d] = true;
        }
    }
    if !seen.iter().any(|s| *s) {
        return Err(DatasetError::EmptyOverlap(unit.id));
    }
    let imputed = seen.into_iter().map(|s| !s).collect();
    IncidenceSeries::with_imputed(unit, target, counts, imputed)
}

/// Smallest calendar covering every supplied date.
pub fn covering_calendar<'a>(
    dates: impl IntoIterator<Item = &'a NaiveDate>,
) -> Result<Calendar, DatasetError> {
    let set: BTreeSet<&NaiveDate> = dates.into_iter().collect();
    match (set.first(), set.last()) {
        (Some(a), Some(b)) => Calendar::spanning(**a, **b),
        _ => Err(DatasetError::EmptyCalendar),
    }
}
