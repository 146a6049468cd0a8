//! Text formats of the stage artifacts. Writers return the file contents;
//! readers take them back so each stage can run on the previous stage's
//! files. Numbers are written in shortest round-trip form, so a read-back
//! matrix or series is bit-identical to the one written.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::NaiveDate;
use serde_json::{json, Value};

use crate::dataset::{IncidenceSeries, Point, UnitGeometry, UnitId};
use crate::dtw::DistanceMatrix;
use crate::geograph::{EdgeSource, SpanningTree, SpatialGraph};
use crate::ingest::{columns, csv_error, line_of, parse_date, parse_number, read_to_string, Excess, IngestError};
use crate::repro::RtSeries;
use crate::synth::Assignment;

fn writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new())
}

fn finish(w: csv::Writer<Vec<u8>>) -> String {
    String::from_utf8(w.into_inner().expect("in-memory writer")).expect("utf-8 csv")
}

fn row<const N: usize>(w: &mut csv::Writer<Vec<u8>>, fields: [&str; N]) {
    w.write_record(fields).expect("in-memory writer");
}

fn reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes())
}

fn bad(line: u64, reason: impl Into<String>) -> IngestError {
    IngestError::Parse {
        line,
        reason: reason.into(),
    }
}

/// `unit_id,date,count`, one row per observed (non-imputed) day.
pub fn incidence_csv(series: &[IncidenceSeries]) -> String {
    let mut w = writer();
    row(&mut w, ["unit_id", "date", "count"]);
    for s in series {
        for (date, count) in s.observations() {
            row(&mut w, [&s.unit.id, &date.to_string(), &count.to_string()]);
        }
    }
    finish(w)
}

/// `unit_id,date,count,raw_excess`: the floored differential in `count` so
/// the file reads as incidence, the unfloored one alongside. Dropped leap
/// days are omitted.
pub fn excess_csv(excess: &[Excess]) -> String {
    let mut w = writer();
    row(&mut w, ["unit_id", "date", "count", "raw_excess"]);
    for e in excess {
        let s = &e.floored;
        for d in 0..s.calendar.len {
            if !s.imputed[d] {
                row(
                    &mut w,
                    [&s.unit.id, &s.calendar.date(d).to_string(), &s.counts[d].to_string(), &e.raw[d].to_string()],
                );
            }
        }
    }
    finish(w)
}

/// `unit_id,date,rt,valid,low_confidence`; `rt` is empty on invalid days.
pub fn rt_csv(series: &[RtSeries]) -> String {
    let mut w = writer();
    row(&mut w, ["unit_id", "date", "rt", "valid", "low_confidence"]);
    for s in series {
        for (d, v) in s.values.iter().enumerate() {
            let value = v.map(|x| x.to_string()).unwrap_or_default();
            row(
                &mut w,
                [
                    &s.unit.id,
                    &s.calendar.date(d).to_string(),
                    &value,
                    if v.is_some() { "1" } else { "0" },
                    if s.low_confidence[d] { "1" } else { "0" },
                ],
            );
        }
    }
    finish(w)
}

fn parse_flag(s: &str, line: u64) -> Result<bool, IngestError> {
    match s {
        "1" | "true" => Ok(true),
        "0" | "false" => Ok(false),
        _ => Err(bad(line, format!("expected 0 or 1, got {s:?}"))),
    }
}

/// Reads an R(t) file back. Every unit must cover the same run of days.
pub fn read_rt_csv_str(text: &str) -> Result<Vec<RtSeries>, IngestError> {
    let mut rdr = reader(text);
    let headers = rdr.headers().map_err(csv_error)?.clone();
    let cols = columns(&headers, &["unit_id", "date", "rt", "valid"])?;
    let low_col = headers.iter().position(|h| h == "low_confidence");
    type Day = (Option<f64>, bool);
    let mut units: BTreeMap<String, BTreeMap<NaiveDate, Day>> = BTreeMap::new();
    for record in rdr.records() {
        let record = record.map_err(csv_error)?;
        let line = line_of(&record);
        let date = parse_date(&record[cols[1]], line)?;
        let valid = parse_flag(&record[cols[3]], line)?;
        let value = if valid {
            Some(parse_number(&record[cols[2]], line)?)
        } else {
            None
        };
        let low = match low_col {
            Some(c) => parse_flag(&record[c], line)?,
            None => false,
        };
        if units.entry(record[cols[0]].to_string()).or_default().insert(date, (value, low)).is_some() {
            return Err(bad(line, format!("repeated day {date} for unit {}", &record[cols[0]])));
        }
    }
    let all_dates = units.values().flat_map(|days| days.keys());
    let calendar = crate::dataset::covering_calendar(all_dates).map_err(|_| bad(1, "no data rows"))?;
    units
        .into_iter()
        .map(|(id, days)| {
            if days.len() != calendar.len {
                return Err(bad(0, format!("unit {id} does not cover {} to {}", calendar.start, calendar.end())));
            }
            let (values, low_confidence) = days.into_values().unzip();
            Ok(RtSeries {
                unit: UnitId::new(id),
                calendar,
                values,
                low_confidence,
            })
        })
        .collect()
}

pub fn read_rt_csv(path: impl AsRef<Path>) -> Result<Vec<RtSeries>, IngestError> {
    read_rt_csv_str(&read_to_string(path.as_ref())?)
}

/// Square matrix with a `unit_id` column and one column per unit.
pub fn distances_csv(d: &DistanceMatrix) -> String {
    let mut w = writer();
    let mut header = vec!["unit_id".to_string()];
    header.extend(d.units().iter().map(|u| u.id.clone()));
    w.write_record(&header).expect("in-memory writer");
    for (i, u) in d.units().iter().enumerate() {
        let mut fields = vec![u.id.clone()];
        fields.extend(d.row(i).iter().map(|v| v.to_string()));
        w.write_record(&fields).expect("in-memory writer");
    }
    finish(w)
}

pub fn read_distances_csv_str(text: &str) -> Result<DistanceMatrix, IngestError> {
    let mut rdr = reader(text);
    let headers = rdr.headers().map_err(csv_error)?.clone();
    if headers.get(0) != Some("unit_id") {
        return Err(bad(1, "first column must be unit_id"));
    }
    let ids: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
    let mut values = Vec::with_capacity(ids.len() * ids.len());
    let mut rows = 0;
    for record in rdr.records() {
        let record = record.map_err(csv_error)?;
        let line = line_of(&record);
        if rows >= ids.len() || record[0] != ids[rows] {
            return Err(bad(line, "row order must match the header"));
        }
        for field in record.iter().skip(1) {
            values.push(parse_number(field, line)?);
        }
        rows += 1;
    }
    if rows != ids.len() {
        return Err(bad(0, format!("{rows} rows for {} columns", ids.len())));
    }
    DistanceMatrix::from_values(ids.into_iter().map(UnitId::new).collect(), values).map_err(|e| bad(0, e.to_string()))
}

pub fn read_distances_csv(path: impl AsRef<Path>) -> Result<DistanceMatrix, IngestError> {
    read_distances_csv_str(&read_to_string(path.as_ref())?)
}

/// `src_id,dst_id,weight,provenance`; `weight` is the distance between the
/// endpoints when a matrix is supplied, else empty.
pub fn graph_csv(graph: &SpatialGraph, d: Option<&DistanceMatrix>) -> String {
    let mut w = writer();
    row(&mut w, ["src_id", "dst_id", "weight", "provenance"]);
    for ((a, b), source) in graph.edges() {
        let weight = d.map(|d| d.get(a, b).to_string()).unwrap_or_default();
        row(&mut w, [&graph.units[a].id, &graph.units[b].id, &weight, source.as_str()]);
    }
    finish(w)
}

/// Reads graph edges onto a fixed unit list.
pub fn read_graph_csv_str(text: &str, units: &[UnitId]) -> Result<SpatialGraph, IngestError> {
    let index: BTreeMap<&str, usize> = units.iter().enumerate().map(|(i, u)| (u.id.as_str(), i)).collect();
    let mut graph = SpatialGraph::new(units.to_vec());
    let mut rdr = reader(text);
    let headers = rdr.headers().map_err(csv_error)?.clone();
    let cols = columns(&headers, &["src_id", "dst_id", "provenance"])?;
    for record in rdr.records() {
        let record = record.map_err(csv_error)?;
        let line = line_of(&record);
        let end = |c: usize| {
            index
                .get(&record[c])
                .copied()
                .ok_or_else(|| bad(line, format!("unknown unit {:?}", &record[c])))
        };
        let (a, b) = (end(cols[0])?, end(cols[1])?);
        let source: EdgeSource = record[cols[2]].parse().map_err(|e: crate::geograph::GraphError| bad(line, e.to_string()))?;
        graph.add_edge(a, b, source).map_err(|e| bad(line, e.to_string()))?;
    }
    Ok(graph)
}

pub fn read_graph_csv(path: impl AsRef<Path>, units: &[UnitId]) -> Result<SpatialGraph, IngestError> {
    read_graph_csv_str(&read_to_string(path.as_ref())?, units)
}

/// `src_id,dst_id,weight` in the order the tree edges were accepted.
pub fn mst_csv(tree: &SpanningTree) -> String {
    let mut w = writer();
    row(&mut w, ["src_id", "dst_id", "weight"]);
    for e in &tree.edges {
        row(&mut w, [&tree.units[e.a].id, &tree.units[e.b].id, &e.weight.to_string()]);
    }
    finish(w)
}

/// `unit_id,cluster`.
pub fn clusters_csv(a: &Assignment) -> String {
    let mut w = writer();
    row(&mut w, ["unit_id", "cluster"]);
    for (u, l) in a.units.iter().zip(&a.labels) {
        row(&mut w, [&u.id, &l.to_string()]);
    }
    finish(w)
}

pub fn read_clusters_csv_str(text: &str) -> Result<Assignment, IngestError> {
    let mut rdr = reader(text);
    let headers = rdr.headers().map_err(csv_error)?.clone();
    let cols = columns(&headers, &["unit_id", "cluster"])?;
    let mut units = Vec::new();
    let mut labels = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(csv_error)?;
        let line = line_of(&record);
        units.push(UnitId::new(&record[cols[0]]));
        labels.push(
            record[cols[1]]
                .parse()
                .map_err(|_| bad(line, format!("bad cluster label {:?}", &record[cols[1]])))?,
        );
    }
    Ok(Assignment { units, labels })
}

pub fn read_clusters_csv(path: impl AsRef<Path>) -> Result<Assignment, IngestError> {
    read_clusters_csv_str(&read_to_string(path.as_ref())?)
}

fn coords(p: &Point) -> Value {
    json!([p.x, p.y])
}

/// FeatureCollection in planar coordinates with a `unit_id` property per
/// feature; units without polygons become points.
pub fn geometry_geojson(geoms: &[UnitGeometry]) -> String {
    let features: Vec<Value> = geoms
        .iter()
        .map(|g| {
            let geometry = match &g.polygon {
                Some(parts) => json!({
                    "type": "MultiPolygon",
                    "coordinates": parts
                        .iter()
                        .map(|p| p.rings().map(|r| r.iter().map(coords).collect::<Vec<_>>()).collect::<Vec<_>>())
                        .collect::<Vec<_>>(),
                }),
                None => json!({"type": "Point", "coordinates": coords(&g.centroid)}),
            };
            let mut props = json!({"unit_id": g.unit.id});
            if g.unit.label != g.unit.id {
                props["label"] = json!(g.unit.label);
            }
            json!({"type": "Feature", "properties": props, "geometry": geometry})
        })
        .collect();
    let fc = json!({
        "type": "FeatureCollection",
        "crs": {"type": "name", "properties": {"name": "planar"}},
        "features": features,
    });
    let mut text = serde_json::to_string(&fc).expect("serializable geojson");
    text.push('\n');
    text
}
