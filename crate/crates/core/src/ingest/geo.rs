use std::collections::BTreeSet;
use std::path::Path;

use serde_json::Value;

use super::{columns, csv_error, line_of, parse_number, read_to_string, IngestError};
use crate::dataset::{Point, PolygonPart, Ring, UnitGeometry, UnitId};
use crate::geometry::{check_ring, polygon_centroid, project_equirectangular, RingDefect};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeometryFormat {
    GeoJson,
    CentroidCsv,
}

impl GeometryFormat {
    /// `.csv` files are centroid tables; anything else is read as GeoJSON.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => Self::CentroidCsv,
            _ => Self::GeoJson,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Crs {
    Planar,
    LonLat,
}

impl Crs {
    fn parse(name: &str) -> Self {
        let n = name.to_ascii_lowercase();
        if n == "lonlat" || n.contains("crs84") || n.ends_with("4326") {
            Crs::LonLat
        } else {
            Crs::Planar
        }
    }
}

pub fn parse_geometry(path: impl AsRef<Path>) -> Result<Vec<UnitGeometry>, IngestError> {
    let path = path.as_ref();
    let text = read_to_string(path)?;
    parse_geometry_str(&text, GeometryFormat::from_path(path))
}

pub fn parse_geometry_str(text: &str, format: GeometryFormat) -> Result<Vec<UnitGeometry>, IngestError> {
    match format {
        GeometryFormat::GeoJson => parse_geojson(text),
        GeometryFormat::CentroidCsv => parse_centroid_csv(text),
    }
}

struct RawUnit {
    unit: UnitId,
    centroid: Option<Point>,
    parts: Option<Vec<PolygonPart>>,
}

fn parse_error(reason: impl Into<String>) -> IngestError {
    IngestError::Parse {
        line: 0,
        reason: reason.into(),
    }
}

fn parse_geojson(text: &str) -> Result<Vec<UnitGeometry>, IngestError> {
    let root: Value = serde_json::from_str(text).map_err(|e| IngestError::Parse {
        line: e.line() as u64,
        reason: e.to_string(),
    })?;
    if root.get("type").and_then(Value::as_str) != Some("FeatureCollection") {
        return Err(parse_error("expected a FeatureCollection"));
    }
    let crs = root
        .pointer("/crs/properties/name")
        .and_then(Value::as_str)
        .map_or(Crs::LonLat, Crs::parse);
    let features = root
        .get("features")
        .and_then(Value::as_array)
        .ok_or_else(|| parse_error("missing features array"))?;

    let mut units = Vec::with_capacity(features.len());
    let mut seen = BTreeSet::new();
    for (i, feature) in features.iter().enumerate() {
        let props = feature.get("properties");
        let id = match props.and_then(|p| p.get("unit_id")) {
            Some(Value::String(s)) if !s.is_empty() => s.clone(),
            Some(Value::Number(n)) => n.to_string(),
            _ => return Err(IngestError::MissingUnitProperty(i)),
        };
        if !seen.insert(id.clone()) {
            return Err(parse_error(format!("unit {id} appears in more than one feature")));
        }
        let label = props
            .and_then(|p| p.get("label").or_else(|| p.get("name")))
            .and_then(Value::as_str);
        let unit = match label {
            Some(l) => UnitId::with_label(id.clone(), l),
            None => UnitId::new(id.clone()),
        };
        let geometry = feature
            .get("geometry")
            .ok_or_else(|| parse_error(format!("feature {i} has no geometry")))?;
        let coords = geometry
            .get("coordinates")
            .ok_or_else(|| parse_error(format!("feature {i} has no coordinates")))?;
        let raw = match geometry.get("type").and_then(Value::as_str) {
            Some("Polygon") => RawUnit {
                unit,
                centroid: None,
                parts: Some(vec![polygon(coords, &id)?]),
            },
            Some("MultiPolygon") => {
                let polys = coords
                    .as_array()
                    .ok_or_else(|| parse_error(format!("feature {i}: bad MultiPolygon")))?;
                RawUnit {
                    unit,
                    centroid: None,
                    parts: Some(polys.iter().map(|p| polygon(p, &id)).collect::<Result<_, _>>()?),
                }
            }
            Some("Point") => RawUnit {
                unit,
                centroid: Some(position(coords)?),
                parts: None,
            },
            other => return Err(parse_error(format!("feature {i}: unsupported geometry {other:?}"))),
        };
        units.push(raw);
    }
    if units.is_empty() {
        return Err(parse_error("feature collection is empty"));
    }
    finish(units, crs)
}

fn position(v: &Value) -> Result<Point, IngestError> {
    let a = v.as_array().filter(|a| a.len() >= 2);
    let xy = a.and_then(|a| Some((a[0].as_f64()?, a[1].as_f64()?)));
    xy.map(|(x, y)| Point::new(x, y))
        .ok_or_else(|| parse_error(format!("bad position {v}")))
}

fn ring(v: &Value, unit: &str) -> Result<Ring, IngestError> {
    let ring: Ring = v
        .as_array()
        .ok_or_else(|| parse_error(format!("unit {unit}: ring is not an array")))?
        .iter()
        .map(position)
        .collect::<Result<_, _>>()?;
    check_ring(&ring).map_err(|defect| IngestError::InvalidRing {
        unit: unit.to_string(),
        reason: match defect {
            RingDefect::TooFewVertices => "fewer than three distinct vertices",
            RingDefect::NotClosed => "first and last vertices differ",
            RingDefect::NonFinite => "non-finite coordinate",
            RingDefect::SelfIntersecting => "self-intersecting",
        }
        .to_string(),
    })?;
    Ok(ring)
}

fn polygon(v: &Value, unit: &str) -> Result<PolygonPart, IngestError> {
    let rings = v
        .as_array()
        .filter(|r| !r.is_empty())
        .ok_or_else(|| parse_error(format!("unit {unit}: polygon has no rings")))?;
    Ok(PolygonPart {
        outer: ring(&rings[0], unit)?,
        holes: rings[1..].iter().map(|r| ring(r, unit)).collect::<Result<_, _>>()?,
    })
}

/// Projects lon/lat input and fills in missing centroids.
fn finish(mut units: Vec<RawUnit>, crs: Crs) -> Result<Vec<UnitGeometry>, IngestError> {
    for u in &mut units {
        if u.centroid.is_none() {
            let parts = u.parts.as_deref().unwrap_or_default();
            let c = polygon_centroid(parts).ok_or_else(|| IngestError::InvalidRing {
                unit: u.unit.id.clone(),
                reason: "zero area".into(),
            })?;
            u.centroid = Some(c);
        }
    }
    if crs == Crs::LonLat {
        let ref_lat = units.iter().map(|u| u.centroid.unwrap().y).sum::<f64>() / units.len() as f64;
        let project = |p: &mut Point| *p = project_equirectangular(p.x, p.y, ref_lat);
        for u in &mut units {
            if let Some(parts) = &mut u.parts {
                for part in parts.iter_mut() {
                    part.outer.iter_mut().for_each(project);
                    part.holes.iter_mut().flatten().for_each(project);
                }
                u.centroid = polygon_centroid(parts);
            } else {
                project(u.centroid.as_mut().unwrap());
            }
        }
    }
    Ok(units
        .into_iter()
        .map(|u| UnitGeometry {
            unit: u.unit,
            centroid: u.centroid.unwrap(),
            polygon: u.parts,
        })
        .collect())
}

fn parse_centroid_csv(text: &str) -> Result<Vec<UnitGeometry>, IngestError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = rdr.headers().map_err(csv_error)?.clone();
    let cols = columns(&headers, &["unit_id", "x", "y"])?;
    let crs_col = headers.iter().position(|h| h == "crs");
    let label_col = headers.iter().position(|h| h == "label");

    let mut crs = None;
    let mut seen = BTreeSet::new();
    let mut units = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(csv_error)?;
        let line = line_of(&record);
        let id = record[cols[0]].to_string();
        if id.is_empty() || !seen.insert(id.clone()) {
            return Err(IngestError::Parse {
                line,
                reason: format!("empty or repeated unit_id {id:?}"),
            });
        }
        let point = Point::new(parse_number(&record[cols[1]], line)?, parse_number(&record[cols[2]], line)?);
        if !point.x.is_finite() || !point.y.is_finite() {
            return Err(IngestError::Parse {
                line,
                reason: "non-finite coordinate".into(),
            });
        }
        let row_crs = match crs_col.map(|c| &record[c]) {
            None | Some("") | Some("planar") => Crs::Planar,
            Some("lonlat") => Crs::LonLat,
            Some(other) => {
                return Err(IngestError::Parse {
                    line,
                    reason: format!("crs must be planar or lonlat, got {other:?}"),
                })
            }
        };
        if *crs.get_or_insert(row_crs) != row_crs {
            return Err(IngestError::Parse {
                line,
                reason: "rows mix planar and lonlat coordinates".into(),
            });
        }
        let unit = match label_col.map(|c| &record[c]).filter(|l| !l.is_empty()) {
            Some(l) => UnitId::with_label(id, l),
            None => UnitId::new(id),
        };
        units.push(RawUnit {
            unit,
            centroid: Some(point),
            parts: None,
        });
    }
    if units.is_empty() {
        return Err(IngestError::Parse {
            line: 1,
            reason: "no data rows".into(),
        });
    }
    finish(units, crs.unwrap_or(Crs::Planar))
}
