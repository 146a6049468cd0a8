//! Input files: incidence and mortality CSVs, aggregation maps and unit
//! geometry.

mod geo;
mod mortality;

pub use geo::{parse_geometry, parse_geometry_str, GeometryFormat};
pub use mortality::{
    aggregate_panels, compute_excess, compute_excess_on, parse_mortality_csv, parse_mortality_reader,
    weekly_percent_change, Excess, MortalityPanel, WeeklyChange,
};

use std::collections::BTreeMap;
use std::fs::File;
use std::io::Read;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use thiserror::Error;

use crate::dataset::{
    align_to_calendar, covering_calendar, Calendar, DatasetError, IncidenceSeries, UnitId,
};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("input not found: {0}")]
    NotFound(PathBuf),
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at line {line}: {reason}")]
    Parse { line: u64, reason: String },
    #[error("negative or non-finite count for unit {unit} at line {line}")]
    NegativeCount { unit: String, line: u64 },
    #[error("duplicate record for unit {unit} on {date}")]
    DuplicateRecord { unit: String, date: NaiveDate },
    #[error("target year {0} has no data")]
    MissingTargetYear(i32),
    #[error("no baseline year besides the target year")]
    EmptyBaseline,
    #[error("unit {0} is not in the aggregation map")]
    UnmappedUnit(String),
    #[error("feature {0} has no unit_id property")]
    MissingUnitProperty(usize),
    #[error("invalid ring in unit {unit}: {reason}")]
    InvalidRing { unit: String, reason: String },
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

pub(crate) fn open(path: &Path) -> Result<File, IngestError> {
    File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => IngestError::NotFound(path.to_path_buf()),
        _ => IngestError::Io {
            path: path.to_path_buf(),
            source: e,
        },
    })
}

pub(crate) fn read_to_string(path: &Path) -> Result<String, IngestError> {
    let mut s = String::new();
    open(path)?
        .read_to_string(&mut s)
        .map_err(|e| IngestError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
    Ok(s)
}

/// Column positions for the named header fields.
pub(crate) fn columns(headers: &csv::StringRecord, names: &[&str]) -> Result<Vec<usize>, IngestError> {
    names
        .iter()
        .map(|name| {
            headers
                .iter()
                .position(|h| h.trim() == *name)
                .ok_or_else(|| IngestError::Parse {
                    line: 1,
                    reason: format!("missing column {name:?}"),
                })
        })
        .collect()
}

pub(crate) fn line_of(record: &csv::StringRecord) -> u64 {
    record.position().map_or(0, |p| p.line())
}

pub(crate) fn csv_error(e: csv::Error) -> IngestError {
    let line = e.position().map_or(0, |p| p.line());
    IngestError::Parse {
        line,
        reason: e.to_string(),
    }
}

pub(crate) fn parse_date(s: &str, line: u64) -> Result<NaiveDate, IngestError> {
    s.trim().parse().map_err(|e| IngestError::Parse {
        line,
        reason: format!("bad date {s:?}: {e}"),
    })
}

pub(crate) fn parse_number(s: &str, line: u64) -> Result<f64, IngestError> {
    s.trim().parse().map_err(|e| IngestError::Parse {
        line,
        reason: format!("bad number {s:?}: {e}"),
    })
}

/// Dated records per unit, in file order.
pub type UnitRecords = BTreeMap<String, Vec<(NaiveDate, f64)>>;

/// Reads `unit_id,date,<value_column>` rows, rejecting negative values and
/// repeated `(unit, date)` pairs.
pub(crate) fn read_dated_values<R: Read>(reader: R, value_column: &str) -> Result<UnitRecords, IngestError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(csv_error)?.clone();
    let cols = columns(&headers, &["unit_id", "date", value_column])?;
    let mut out: UnitRecords = BTreeMap::new();
    let mut seen = std::collections::HashSet::new();
    for record in rdr.records() {
        let record = record.map_err(csv_error)?;
        let line = line_of(&record);
        let unit = record[cols[0]].to_string();
        if unit.is_empty() {
            return Err(IngestError::Parse {
                line,
                reason: "empty unit_id".into(),
            });
        }
        let date = parse_date(&record[cols[1]], line)?;
        let value = parse_number(&record[cols[2]], line)?;
        if !value.is_finite() || value < 0.0 {
            return Err(IngestError::NegativeCount { unit, line });
        }
        if !seen.insert((unit.clone(), date)) {
            return Err(IngestError::DuplicateRecord { unit, date });
        }
        out.entry(unit).or_default().push((date, value));
    }
    if out.is_empty() {
        return Err(IngestError::Parse {
            line: 1,
            reason: "no data rows".into(),
        });
    }
    Ok(out)
}

/// Parses an incidence CSV (`unit_id,date,count`) into one series per unit on
/// the calendar spanning every date in the file. Days a unit does not report
/// are zero and flagged imputed.
pub fn parse_incidence_csv(path: impl AsRef<Path>) -> Result<Vec<IncidenceSeries>, IngestError> {
    parse_incidence_reader(open(path.as_ref())?)
}

pub fn parse_incidence_reader<R: Read>(reader: R) -> Result<Vec<IncidenceSeries>, IngestError> {
    let records = read_dated_values(reader, "count")?;
    let calendar = covering_calendar(records.values().flatten().map(|(d, _)| d))?;
    records_to_series(&records, calendar)
}

pub(crate) fn records_to_series(
    records: &UnitRecords,
    calendar: Calendar,
) -> Result<Vec<IncidenceSeries>, IngestError> {
    records
        .iter()
        .map(|(unit, obs)| Ok(align_to_calendar(UnitId::new(unit.clone()), obs, calendar)?))
        .collect()
}

/// Restricts every series to `calendar`, re-imputing days it does not cover.
pub fn restrict_to_calendar(
    series: &[IncidenceSeries],
    calendar: Calendar,
) -> Result<Vec<IncidenceSeries>, IngestError> {
    series
        .iter()
        .map(|s| Ok(align_to_calendar(s.unit.clone(), &s.observations(), calendar)?))
        .collect()
}

/// Turns cumulative totals into daily increments. Downward revisions would
/// give negative increments; those days are floored to zero.
pub fn difference_cumulative(series: &IncidenceSeries) -> IncidenceSeries {
    let mut daily = Vec::with_capacity(series.counts.len());
    let mut prev = 0.0;
    for &c in &series.counts {
        daily.push((c - prev).max(0.0));
        prev = c;
    }
    IncidenceSeries {
        counts: daily,
        ..series.clone()
    }
}

/// Map from fine units (municipalities) to coarse units (LMAs).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AggregationMap {
    pub entries: BTreeMap<String, String>,
}

impl AggregationMap {
    pub fn coarse_of(&self, fine: &str) -> Option<&str> {
        self.entries.get(fine).map(String::as_str)
    }
}

impl FromIterator<(String, String)> for AggregationMap {
    fn from_iter<I: IntoIterator<Item = (String, String)>>(iter: I) -> Self {
        Self {
            entries: iter.into_iter().collect(),
        }
    }
}

pub fn parse_aggregation_csv(path: impl AsRef<Path>) -> Result<AggregationMap, IngestError> {
    parse_aggregation_reader(open(path.as_ref())?)
}

pub fn parse_aggregation_reader<R: Read>(reader: R) -> Result<AggregationMap, IngestError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(csv_error)?.clone();
    let cols = columns(&headers, &["fine_id", "coarse_id"])?;
    let mut entries = BTreeMap::new();
    for record in rdr.records() {
        let record = record.map_err(csv_error)?;
        let line = line_of(&record);
        let (fine, coarse) = (record[cols[0]].to_string(), record[cols[1]].to_string());
        if fine.is_empty() || coarse.is_empty() {
            return Err(IngestError::Parse {
                line,
                reason: "empty id".into(),
            });
        }
        if let Some(prev) = entries.insert(fine.clone(), coarse.clone()) {
            if prev != coarse {
                return Err(IngestError::Parse {
                    line,
                    reason: format!("{fine} mapped to both {prev} and {coarse}"),
                });
            }
        }
    }
    Ok(AggregationMap { entries })
}

/// Day-wise sums of fine series within each coarse unit, sorted by coarse id.
/// A coarse day is imputed only when every member day was.
pub fn aggregate(series: &[IncidenceSeries], map: &AggregationMap) -> Result<Vec<IncidenceSeries>, IngestError> {
    let Some(first) = series.first() else {
        return Ok(Vec::new());
    };
    let calendar = first.calendar;
    let mut groups: BTreeMap<&str, (Vec<f64>, Vec<bool>)> = BTreeMap::new();
    for s in series {
        let coarse = map
            .coarse_of(&s.unit.id)
            .ok_or_else(|| IngestError::UnmappedUnit(s.unit.id.clone()))?;
        if s.calendar != calendar {
            return Err(DatasetError::CalendarMismatch(s.unit.id.clone()).into());
        }
        let (counts, imputed) = groups
            .entry(coarse)
            .or_insert_with(|| (vec![0.0; calendar.len], vec![true; calendar.len]));
        for d in 0..calendar.len {
            counts[d] += s.counts[d];
            imputed[d] &= s.imputed[d];
        }
    }
    groups
        .into_iter()
        .map(|(coarse, (counts, imputed))| {
            Ok(IncidenceSeries::with_imputed(
                UnitId::new(coarse),
                calendar,
                counts,
                imputed,
            )?)
        })
        .collect()
}
