//! Layered GeoJSON reading and writing.
//!
//! A dataset is a single FeatureCollection. Every feature carries
//! `properties.layer` (`node`, `segment`, `short_pipe`, `facility`, `demand`);
//! segments are LineStrings, everything else is a Point. Dataset metadata
//! lives in the foreign member `metadata`.
//!
//! Output is one feature per line in layer order, so saving the same dataset
//! twice produces identical bytes.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::{
    AttrSource, Carrier, Category, DemandPoint, FacilityPoint, GeoPoint, NetworkDataset, NetworkNode, NodeCarrier,
    NodeKind, PipelineSegment, Polyline, ShortPipe, Status,
};
use crate::error::{Error, Result};

#[derive(Debug, Serialize, Deserialize)]
struct NodeProps {
    id: String,
    kind: NodeKind,
    carrier: NodeCarrier,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    nuts3: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    split_of: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct SegmentProps {
    id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    from_node: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    to_node: Option<String>,
    carrier: Carrier,
    category: Category,
    status: Status,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    diameter_min_mm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    diameter_max_mm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pressure_min_bar: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pressure_max_bar: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    repurpose_year: Option<i32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    commission_year: Option<i32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    length_km: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    name: Option<String>,
    #[serde(default = "unset")]
    attr_source: AttrSource,
}

fn unset() -> AttrSource {
    AttrSource::Unset
}

#[derive(Debug, Serialize, Deserialize)]
struct ShortPipeProps {
    id: String,
    from_node: String,
    to_node: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    activate_year: Option<i32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    deactivate_year: Option<i32>,
}

#[derive(Debug, Serialize, Deserialize)]
struct FacilityProps {
    id: String,
    kind: NodeKind,
    carrier: Carrier,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    attached_node: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct DemandProps {
    id: String,
    nuts3: String,
    carrier: Carrier,
    annual_demand: f64,
}

#[derive(Serialize)]
struct Tagged<'a, P> {
    layer: &'static str,
    #[serde(flatten)]
    props: &'a P,
}

#[derive(Serialize)]
#[serde(tag = "type", content = "coordinates")]
enum GeometryOut {
    Point([f64; 2]),
    LineString(Vec<[f64; 2]>),
}

#[derive(Serialize)]
struct FeatureOut<'a, P> {
    #[serde(rename = "type")]
    kind: &'static str,
    geometry: GeometryOut,
    properties: Tagged<'a, P>,
}

/// Maps raw `[x, y]` coordinate pairs to geographic points. Dataset files use
/// the identity; traced plan files map pixel space through a georeferencing
/// transform.
pub(crate) type CoordMap<'a> = &'a dyn Fn(usize, [f64; 2]) -> Result<GeoPoint>;

fn identity_coords(_: usize, xy: [f64; 2]) -> Result<GeoPoint> {
    let p = GeoPoint { lon: xy[0], lat: xy[1] };
    if p.is_valid() {
        Ok(p)
    } else {
        Err(Error::Geometry {
            id: String::new(),
            message: format!("coordinate ({}, {}) outside WGS84 bounds", xy[0], xy[1]),
        })
    }
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<NetworkDataset> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let value: Value = serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    dataset_from_value(value)
}

/// Parses and validates a dataset from GeoJSON text.
pub fn parse_dataset(text: &str) -> Result<NetworkDataset> {
    let value: Value = serde_json::from_str(text).map_err(|source| Error::Json {
        path: "<memory>".into(),
        source,
    })?;
    dataset_from_value(value)
}

fn dataset_from_value(value: Value) -> Result<NetworkDataset> {
    let ds = features_to_dataset(value, &identity_coords)?;
    ds.validate()?;
    Ok(ds)
}

/// Converts a FeatureCollection into an (unvalidated) dataset, deriving any
/// missing segment lengths.
pub(crate) fn features_to_dataset(value: Value, coords: CoordMap<'_>) -> Result<NetworkDataset> {
    let Value::Object(mut root) = value else {
        return Err(Error::schema("<root>", "type", "expected a FeatureCollection object"));
    };
    if root.get("type").and_then(Value::as_str) != Some("FeatureCollection") {
        return Err(Error::schema("<root>", "type", "expected `FeatureCollection`"));
    }
    let mut ds = NetworkDataset::default();
    if let Some(meta) = root.remove("metadata") {
        ds.metadata = from_value("<metadata>", meta)?;
    }
    let features = match root.remove("features") {
        Some(Value::Array(f)) => f,
        None => Vec::new(),
        Some(_) => return Err(Error::schema("<root>", "features", "expected an array")),
    };
    for (index, feature) in features.into_iter().enumerate() {
        read_feature(&mut ds, index, feature, coords)?;
    }
    Ok(ds)
}

fn from_value<T: DeserializeOwned>(feature: &str, value: Value) -> Result<T> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let field = e.path().to_string();
        Error::schema(feature, field, e.into_inner().to_string())
    })
}

fn read_feature(ds: &mut NetworkDataset, index: usize, feature: Value, coords: CoordMap<'_>) -> Result<()> {
    let fallback = format!("feature #{index}");
    let Value::Object(mut feature) = feature else {
        return Err(Error::schema(fallback, "<feature>", "expected an object"));
    };
    let properties = match feature.remove("properties") {
        Some(Value::Object(p)) => p,
        _ => return Err(Error::schema(fallback, "properties", "missing properties object")),
    };
    let id = properties
        .get("id")
        .and_then(Value::as_str)
        .map(str::to_string)
        .unwrap_or(fallback);
    let layer = properties
        .get("layer")
        .and_then(Value::as_str)
        .ok_or_else(|| Error::schema(&id, "layer", "missing layer"))?
        .to_string();
    let geometry = feature.remove("geometry").unwrap_or(Value::Null);
    let props = Value::Object(properties);

    match layer.as_str() {
        "node" => {
            let p: NodeProps = from_value(&id, props)?;
            let location = point_geometry(&id, &geometry, coords)?;
            ds.nodes.push(NetworkNode {
                id: p.id,
                location,
                kind: p.kind,
                carrier: p.carrier,
                nuts3: p.nuts3,
                split_of: p.split_of,
            });
        }
        "segment" => {
            let p: SegmentProps = from_value(&id, props)?;
            let geometry = line_geometry(&id, &geometry, coords)?;
            let length_km = p.length_km.unwrap_or_else(|| geometry.length_km());
            ds.segments.push(PipelineSegment {
                id: p.id,
                geometry,
                from_node: p.from_node,
                to_node: p.to_node,
                carrier: p.carrier,
                category: p.category,
                status: p.status,
                diameter_min_mm: p.diameter_min_mm,
                diameter_max_mm: p.diameter_max_mm,
                pressure_min_bar: p.pressure_min_bar,
                pressure_max_bar: p.pressure_max_bar,
                repurpose_year: p.repurpose_year,
                commission_year: p.commission_year,
                length_km,
                name: p.name,
                attr_source: p.attr_source,
            });
        }
        "short_pipe" => {
            // The point geometry of a short pipe is informational only.
            let p: ShortPipeProps = from_value(&id, props)?;
            ds.short_pipes.push(ShortPipe {
                id: p.id,
                from_node: p.from_node,
                to_node: p.to_node,
                activate_year: p.activate_year,
                deactivate_year: p.deactivate_year,
            });
        }
        "facility" => {
            let p: FacilityProps = from_value(&id, props)?;
            let location = point_geometry(&id, &geometry, coords)?;
            ds.facilities.push(FacilityPoint {
                id: p.id,
                location,
                kind: p.kind,
                carrier: p.carrier,
                attached_node: p.attached_node,
            });
        }
        "demand" => {
            let p: DemandProps = from_value(&id, props)?;
            let location = point_geometry(&id, &geometry, coords)?;
            ds.demand_points.push(DemandPoint {
                id: p.id,
                location,
                nuts3: p.nuts3,
                carrier: p.carrier,
                annual_demand: p.annual_demand,
            });
        }
        other => {
            return Err(Error::schema(id, "layer", format!("unknown layer `{other}`")));
        }
    }
    Ok(())
}

fn geometry_parts<'v>(id: &str, geometry: &'v Value, expected: &str) -> Result<&'v Value> {
    let kind = geometry.get("type").and_then(Value::as_str);
    if kind != Some(expected) {
        return Err(Error::Geometry {
            id: id.to_string(),
            message: format!("expected {expected} geometry, found {}", kind.unwrap_or("none")),
        });
    }
    geometry.get("coordinates").ok_or_else(|| Error::Geometry {
        id: id.to_string(),
        message: "missing coordinates".into(),
    })
}

fn coordinate_pair(id: &str, v: &Value) -> Result<[f64; 2]> {
    let pair = v.as_array().filter(|a| a.len() >= 2);
    let xy = pair.and_then(|a| Some([a[0].as_f64()?, a[1].as_f64()?]));
    xy.ok_or_else(|| Error::Geometry {
        id: id.to_string(),
        message: format!("invalid coordinate {v}"),
    })
}

fn with_id(id: &str, e: Error) -> Error {
    match e {
        Error::Geometry { message, .. } => Error::Geometry {
            id: id.to_string(),
            message,
        },
        e => e,
    }
}

fn point_geometry(id: &str, geometry: &Value, coords: CoordMap<'_>) -> Result<GeoPoint> {
    let c = geometry_parts(id, geometry, "Point")?;
    let xy = coordinate_pair(id, c)?;
    coords(0, xy).map_err(|e| with_id(id, e))
}

fn line_geometry(id: &str, geometry: &Value, coords: CoordMap<'_>) -> Result<Polyline> {
    let c = geometry_parts(id, geometry, "LineString")?;
    let raw = c.as_array().ok_or_else(|| Error::Geometry {
        id: id.to_string(),
        message: "LineString coordinates must be an array".into(),
    })?;
    let points = raw
        .iter()
        .enumerate()
        .map(|(i, v)| coords(i, coordinate_pair(id, v)?))
        .collect::<Result<Vec<_>>>()
        .map_err(|e| with_id(id, e))?;
    Polyline::new(points).map_err(|e| with_id(id, e))
}

fn xy(p: GeoPoint) -> [f64; 2] {
    [p.lon, p.lat]
}

fn write_feature<P: Serialize>(
    out: &mut Vec<u8>,
    first: &mut bool,
    layer: &'static str,
    geometry: GeometryOut,
    props: &P,
) {
    if !*first {
        out.extend_from_slice(b",\n");
    }
    *first = false;
    let feature = FeatureOut {
        kind: "Feature",
        geometry,
        properties: Tagged { layer, props },
    };
    serde_json::to_writer(&mut *out, &feature).expect("in-memory serialization cannot fail");
}

/// Serializes a dataset to GeoJSON text.
pub fn to_geojson_string(ds: &NetworkDataset) -> String {
    let mut out = Vec::new();
    out.extend_from_slice(b"{\"type\":\"FeatureCollection\",\"metadata\":");
    serde_json::to_writer(&mut out, &ds.metadata).expect("metadata serializes");
    out.extend_from_slice(b",\"features\":[\n");
    let mut first = true;

    for n in &ds.nodes {
        let props = NodeProps {
            id: n.id.clone(),
            kind: n.kind,
            carrier: n.carrier,
            nuts3: n.nuts3.clone(),
            split_of: n.split_of.clone(),
        };
        write_feature(&mut out, &mut first, "node", GeometryOut::Point(xy(n.location)), &props);
    }
    for s in &ds.segments {
        let props = SegmentProps {
            id: s.id.clone(),
            from_node: s.from_node.clone(),
            to_node: s.to_node.clone(),
            carrier: s.carrier,
            category: s.category,
            status: s.status,
            diameter_min_mm: s.diameter_min_mm,
            diameter_max_mm: s.diameter_max_mm,
            pressure_min_bar: s.pressure_min_bar,
            pressure_max_bar: s.pressure_max_bar,
            repurpose_year: s.repurpose_year,
            commission_year: s.commission_year,
            length_km: Some(s.length_km),
            name: s.name.clone(),
            attr_source: s.attr_source,
        };
        let line = s.geometry.points().iter().copied().map(xy).collect();
        write_feature(&mut out, &mut first, "segment", GeometryOut::LineString(line), &props);
    }
    for p in &ds.short_pipes {
        let anchor = ds.node(&p.from_node).map(|n| xy(n.location)).unwrap_or([0.0, 0.0]);
        let props = ShortPipeProps {
            id: p.id.clone(),
            from_node: p.from_node.clone(),
            to_node: p.to_node.clone(),
            activate_year: p.activate_year,
            deactivate_year: p.deactivate_year,
        };
        write_feature(&mut out, &mut first, "short_pipe", GeometryOut::Point(anchor), &props);
    }
    for f in &ds.facilities {
        let props = FacilityProps {
            id: f.id.clone(),
            kind: f.kind,
            carrier: f.carrier,
            attached_node: f.attached_node.clone(),
        };
        write_feature(
            &mut out,
            &mut first,
            "facility",
            GeometryOut::Point(xy(f.location)),
            &props,
        );
    }
    for d in &ds.demand_points {
        let props = DemandProps {
            id: d.id.clone(),
            nuts3: d.nuts3.clone(),
            carrier: d.carrier,
            annual_demand: d.annual_demand,
        };
        write_feature(
            &mut out,
            &mut first,
            "demand",
            GeometryOut::Point(xy(d.location)),
            &props,
        );
    }

    out.extend_from_slice(b"\n]}\n");
    String::from_utf8(out).expect("serde_json emits UTF-8")
}

pub fn save_dataset(ds: &NetworkDataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = to_geojson_string(ds);
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}

/// Reads a plain FeatureCollection into raw `(properties, geometry)` pairs.
pub(crate) fn read_feature_collection(path: &Path) -> Result<Vec<(Map<String, Value>, Value)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let value: Value = serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    let features = match value.get("features") {
        Some(Value::Array(f)) => f.clone(),
        _ => {
            return Err(Error::schema(
                path.display().to_string(),
                "features",
                "expected a FeatureCollection",
            ))
        }
    };
    Ok(features
        .into_iter()
        .map(|mut f| {
            let props = match f.get_mut("properties").map(Value::take) {
                Some(Value::Object(m)) => m,
                _ => Map::new(),
            };
            let geom = f.get_mut("geometry").map(Value::take).unwrap_or(Value::Null);
            (props, geom)
        })
        .collect())
}

/// Parses a GeoJSON LineString geometry into a polyline.
pub(crate) fn parse_line(id: &str, geometry: &Value) -> Result<Polyline> {
    line_geometry(id, geometry, &identity_coords)
}

/// Parses the exterior ring of a GeoJSON Polygon.
pub(crate) fn parse_polygon_ring(id: &str, geometry: &Value) -> Result<Vec<GeoPoint>> {
    let c = geometry_parts(id, geometry, "Polygon")?;
    let ring = c
        .as_array()
        .and_then(|rings| rings.first())
        .and_then(Value::as_array)
        .ok_or_else(|| Error::Geometry {
            id: id.to_string(),
            message: "polygon without exterior ring".into(),
        })?;
    ring.iter()
        .map(|v| identity_coords(0, coordinate_pair(id, v)?))
        .collect::<Result<Vec<_>>>()
        .map_err(|e| with_id(id, e))
}

/// Parses a single GeoJSON feature (as used inline in transition plans).
pub(crate) fn parse_inline_features(features: Vec<Value>) -> Result<NetworkDataset> {
    let collection = serde_json::json!({ "type": "FeatureCollection", "features": features });
    features_to_dataset(collection, &identity_coords)
}
