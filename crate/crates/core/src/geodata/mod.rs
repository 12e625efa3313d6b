//! Domain model of a layered gas / hydrogen network dataset.

pub mod geo;
pub mod io;

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use geo::{geodesic_length, haversine_km, haversine_m};
pub use io::{load_dataset, parse_dataset, save_dataset, to_geojson_string};

/// Relative tolerance between a stored `length_km` and the recomputed
/// geodesic length.
pub const LENGTH_TOLERANCE: f64 = 1e-3;

pub const DEFAULT_CRS: &str = "EPSG:4326";
pub const DEFAULT_DEMAND_UNIT: &str = "GWh/year";

const WGS84_ALIASES: &[&str] = &[
    "EPSG:4326",
    "WGS84",
    "OGC:CRS84",
    "urn:ogc:def:crs:OGC:1.3:CRS84",
    "urn:ogc:def:crs:EPSG::4326",
];

pub fn is_wgs84(crs: &str) -> bool {
    WGS84_ALIASES.iter().any(|a| a.eq_ignore_ascii_case(crs))
}

/// Geographic WGS84 position in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lon: f64,
    pub lat: f64,
}

impl GeoPoint {
    pub fn new(lon: f64, lat: f64) -> Result<Self> {
        let p = GeoPoint { lon, lat };
        if !p.is_valid() {
            return Err(Error::Geometry {
                id: String::new(),
                message: format!("coordinate ({lon}, {lat}) is outside WGS84 bounds"),
            });
        }
        Ok(p)
    }

    pub fn is_valid(&self) -> bool {
        self.lon.is_finite()
            && self.lat.is_finite()
            && (-180.0..=180.0).contains(&self.lon)
            && (-90.0..=90.0).contains(&self.lat)
    }
}

/// Ordered vertex list with at least two vertices and no repeated
/// consecutive vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct Polyline(Vec<GeoPoint>);

impl Polyline {
    pub fn new(points: Vec<GeoPoint>) -> Result<Self> {
        if points.len() < 2 {
            return Err(geometry_error(format!(
                "polyline needs at least 2 vertices, got {}",
                points.len()
            )));
        }
        if let Some(p) = points.iter().find(|p| !p.is_valid()) {
            return Err(geometry_error(format!(
                "vertex ({}, {}) is not a finite WGS84 coordinate",
                p.lon, p.lat
            )));
        }
        if let Some(i) = points.windows(2).position(|w| w[0] == w[1]) {
            return Err(geometry_error(format!("vertices {i} and {} are identical", i + 1)));
        }
        Ok(Polyline(points))
    }

    pub fn points(&self) -> &[GeoPoint] {
        &self.0
    }

    pub fn first(&self) -> GeoPoint {
        self.0[0]
    }

    pub fn last(&self) -> GeoPoint {
        self.0[self.0.len() - 1]
    }

    pub fn reversed(&self) -> Polyline {
        Polyline(self.0.iter().rev().copied().collect())
    }

    /// Joins `other` onto the end of `self`, dropping the shared vertex when
    /// the two lines meet exactly.
    pub fn concat(&self, other: &Polyline) -> Polyline {
        let mut pts = self.0.clone();
        let skip = usize::from(self.last() == other.first());
        pts.extend_from_slice(&other.0[skip..]);
        Polyline(pts)
    }

    pub fn length_km(&self) -> f64 {
        geodesic_length(self)
    }

    pub fn into_points(self) -> Vec<GeoPoint> {
        self.0
    }
}

fn geometry_error(message: String) -> Error {
    Error::Geometry {
        id: String::new(),
        message,
    }
}

macro_rules! string_enum {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        pub enum $name {
            $(#[serde(rename = $text)] $variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = String;

            fn from_str(s: &str) -> std::result::Result<Self, String> {
                match s {
                    $($text => Ok($name::$variant),)+
                    other => Err(format!(
                        "unknown {} `{}`",
                        stringify!($name),
                        other
                    )),
                }
            }
        }
    };
}

string_enum!(
    NodeKind {
        Junction => "junction",
        BorderPoint => "border_point",
        Storage => "storage",
        Compressor => "compressor",
        Demand => "demand",
        Electrolyzer => "electrolyzer",
        BiogasPlant => "biogas_plant",
        PowerPlant => "power_plant",
    }
);

string_enum!(
    /// Gas carried by an edge or facility.
    Carrier {
        NaturalGas => "natural_gas",
        Hydrogen => "hydrogen",
    }
);

string_enum!(
    /// Static carrier label of a node. `Transitional` nodes take the
    /// carrier of their incident repurposed segment at any given year.
    NodeCarrier {
        NaturalGas => "natural_gas",
        Hydrogen => "hydrogen",
        Transitional => "transitional",
    }
);

string_enum!(
    Category {
        Transmission => "transmission",
        DistributionL1 => "distribution_l1",
        DistributionL2 => "distribution_l2",
    }
);

string_enum!(
    Status {
        Existing => "existing",
        Repurposed => "repurposed",
        NewBuild => "new_build",
    }
);

string_enum!(
    /// Provenance of a segment's technical attributes.
    AttrSource {
        Matched => "matched",
        Assumed => "assumed",
        Manual => "manual",
        Unset => "unset",
    }
);

impl From<Carrier> for NodeCarrier {
    fn from(c: Carrier) -> Self {
        match c {
            Carrier::NaturalGas => NodeCarrier::NaturalGas,
            Carrier::Hydrogen => NodeCarrier::Hydrogen,
        }
    }
}

impl Carrier {
    pub fn short(self) -> &'static str {
        match self {
            Carrier::NaturalGas => "NG",
            Carrier::Hydrogen => "H2",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkNode {
    pub id: String,
    pub location: GeoPoint,
    pub kind: NodeKind,
    pub carrier: NodeCarrier,
    pub nuts3: Option<String>,
    /// Original node id when this node was produced by splitting a node
    /// shared between carriers.
    pub split_of: Option<String>,
}

impl NetworkNode {
    pub fn junction(id: impl Into<String>, location: GeoPoint, carrier: NodeCarrier) -> Self {
        NetworkNode {
            id: id.into(),
            location,
            kind: NodeKind::Junction,
            carrier,
            nuts3: None,
            split_of: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineSegment {
    pub id: String,
    pub geometry: Polyline,
    pub from_node: Option<String>,
    pub to_node: Option<String>,
    pub carrier: Carrier,
    pub category: Category,
    pub status: Status,
    pub diameter_min_mm: Option<f64>,
    pub diameter_max_mm: Option<f64>,
    pub pressure_min_bar: Option<f64>,
    pub pressure_max_bar: Option<f64>,
    pub repurpose_year: Option<i32>,
    pub commission_year: Option<i32>,
    pub length_km: f64,
    pub name: Option<String>,
    pub attr_source: AttrSource,
}

impl PipelineSegment {
    /// A segment with derived length and every optional attribute unset.
    pub fn new(
        id: impl Into<String>,
        geometry: Polyline,
        carrier: Carrier,
        category: Category,
        status: Status,
    ) -> Self {
        let length_km = geometry.length_km();
        PipelineSegment {
            id: id.into(),
            geometry,
            from_node: None,
            to_node: None,
            carrier,
            category,
            status,
            diameter_min_mm: None,
            diameter_max_mm: None,
            pressure_min_bar: None,
            pressure_max_bar: None,
            repurpose_year: None,
            commission_year: None,
            length_km,
            name: None,
            attr_source: AttrSource::Unset,
        }
    }

    pub fn with_nodes(mut self, from: impl Into<String>, to: impl Into<String>) -> Self {
        self.from_node = Some(from.into());
        self.to_node = Some(to.into());
        self
    }

    /// Both endpoint node ids, if bound.
    pub fn endpoints(&self) -> Option<(&str, &str)> {
        Some((self.from_node.as_deref()?, self.to_node.as_deref()?))
    }

    fn validate(&self) -> Result<()> {
        let id = self.id.as_str();
        check_range(id, "diameter", self.diameter_min_mm, self.diameter_max_mm)?;
        check_range(id, "pressure", self.pressure_min_bar, self.pressure_max_bar)?;
        match self.status {
            Status::Repurposed if self.repurpose_year.is_none() => {
                return Err(Error::schema(id, "repurpose_year", "required for status `repurposed`"));
            }
            Status::NewBuild if self.commission_year.is_none() => {
                return Err(Error::schema(id, "commission_year", "required for status `new_build`"));
            }
            _ => {}
        }
        if self.repurpose_year.is_some() && self.status != Status::Repurposed {
            return Err(Error::schema(
                id,
                "repurpose_year",
                "only allowed for status `repurposed`",
            ));
        }
        if self.commission_year.is_some() && self.status != Status::NewBuild {
            return Err(Error::schema(
                id,
                "commission_year",
                "only allowed for status `new_build`",
            ));
        }
        match (self.status, self.carrier) {
            (Status::NewBuild, Carrier::NaturalGas) => {
                return Err(Error::schema(id, "carrier", "new builds carry hydrogen"));
            }
            (Status::Repurposed, Carrier::Hydrogen) => {
                return Err(Error::schema(
                    id,
                    "carrier",
                    "repurposed segments keep their original natural_gas carrier",
                ));
            }
            _ => {}
        }
        let computed = self.geometry.length_km();
        if !self.length_km.is_finite() || (self.length_km - computed).abs() > LENGTH_TOLERANCE * computed {
            return Err(Error::schema(
                id,
                "length_km",
                format!(
                    "stored length {} km differs from geodesic length {computed} km",
                    self.length_km
                ),
            ));
        }
        Ok(())
    }
}

fn check_range(id: &str, what: &str, min: Option<f64>, max: Option<f64>) -> Result<()> {
    let unit = if what == "diameter" { "mm" } else { "bar" };
    for (suffix, v) in [("min", min), ("max", max)] {
        if let Some(v) = v {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::schema(
                    id,
                    format!("{what}_{suffix}_{unit}"),
                    format!("value {v} must be finite and non-negative"),
                ));
            }
        }
    }
    if let (Some(lo), Some(hi)) = (min, max) {
        if lo > hi {
            return Err(Error::schema(
                id,
                format!("{what}_min_{unit}"),
                format!("{what}_min_{unit} = {lo} exceeds {what}_max_{unit} = {hi}"),
            ));
        }
    }
    Ok(())
}

/// Lossless, capacity-free connector edge with an activation window.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShortPipe {
    pub id: String,
    pub from_node: String,
    pub to_node: String,
    pub activate_year: Option<i32>,
    pub deactivate_year: Option<i32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FacilityPoint {
    pub id: String,
    pub location: GeoPoint,
    pub kind: NodeKind,
    pub carrier: Carrier,
    pub attached_node: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DemandPoint {
    pub id: String,
    pub location: GeoPoint,
    pub nuts3: String,
    pub carrier: Carrier,
    pub annual_demand: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    /// Absent means WGS84, as in plain GeoJSON.
    #[serde(default = "default_crs")]
    pub crs: String,
    #[serde(default = "default_demand_unit")]
    pub demand_unit: String,
    #[serde(default)]
    pub horizon: Vec<i32>,
    /// Region codes or node ids exempt from the supply check.
    #[serde(default)]
    pub exceptions: Vec<String>,
}

fn default_crs() -> String {
    DEFAULT_CRS.to_string()
}

fn default_demand_unit() -> String {
    DEFAULT_DEMAND_UNIT.to_string()
}

impl Default for Metadata {
    fn default() -> Self {
        Metadata {
            crs: DEFAULT_CRS.to_string(),
            demand_unit: DEFAULT_DEMAND_UNIT.to_string(),
            horizon: Vec::new(),
            exceptions: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct NetworkDataset {
    pub nodes: Vec<NetworkNode>,
    pub segments: Vec<PipelineSegment>,
    pub short_pipes: Vec<ShortPipe>,
    pub facilities: Vec<FacilityPoint>,
    pub demand_points: Vec<DemandPoint>,
    pub metadata: Metadata,
}

impl NetworkDataset {
    pub fn node(&self, id: &str) -> Option<&NetworkNode> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn segment(&self, id: &str) -> Option<&PipelineSegment> {
        self.segments.iter().find(|s| s.id == id)
    }

    pub fn node_index(&self) -> BTreeMap<&str, &NetworkNode> {
        self.nodes.iter().map(|n| (n.id.as_str(), n)).collect()
    }

    pub fn total_length_km(&self) -> f64 {
        self.segments.iter().map(|s| s.length_km).sum()
    }

    /// Checks every dataset invariant: id uniqueness, reference resolution,
    /// attribute ranges, status/year consistency and stored lengths.
    pub fn validate(&self) -> Result<()> {
        if !is_wgs84(&self.metadata.crs) {
            return Err(Error::Crs(self.metadata.crs.clone()));
        }
        let nodes = unique_ids("nodes", self.nodes.iter().map(|n| n.id.as_str()))?;
        unique_ids("segments", self.segments.iter().map(|s| s.id.as_str()))?;
        unique_ids("short_pipes", self.short_pipes.iter().map(|s| s.id.as_str()))?;
        unique_ids("facilities", self.facilities.iter().map(|f| f.id.as_str()))?;
        unique_ids("demand_points", self.demand_points.iter().map(|d| d.id.as_str()))?;

        let resolve = |from: &str, field: &str, target: &str| -> Result<()> {
            if nodes.contains(target) {
                Ok(())
            } else {
                Err(Error::UnresolvedReference {
                    from: from.to_string(),
                    field: field.to_string(),
                    target: target.to_string(),
                })
            }
        };

        for n in &self.nodes {
            if !n.location.is_valid() {
                return Err(Error::schema(&n.id, "geometry", "coordinate outside WGS84 bounds"));
            }
        }
        for s in &self.segments {
            s.validate()?;
            if let Some(f) = &s.from_node {
                resolve(&s.id, "from_node", f)?;
            }
            if let Some(t) = &s.to_node {
                resolve(&s.id, "to_node", t)?;
            }
        }
        for p in &self.short_pipes {
            resolve(&p.id, "from_node", &p.from_node)?;
            resolve(&p.id, "to_node", &p.to_node)?;
            if let (Some(a), Some(d)) = (p.activate_year, p.deactivate_year) {
                if a >= d {
                    return Err(Error::schema(
                        &p.id,
                        "activate_year",
                        format!("activate_year {a} must precede deactivate_year {d}"),
                    ));
                }
            }
        }
        for f in &self.facilities {
            if f.kind == NodeKind::Junction {
                return Err(Error::schema(&f.id, "kind", "facilities cannot be junctions"));
            }
            if let Some(n) = &f.attached_node {
                resolve(&f.id, "attached_node", n)?;
            }
        }
        for d in &self.demand_points {
            if !d.annual_demand.is_finite() || d.annual_demand < 0.0 {
                return Err(Error::schema(&d.id, "annual_demand", "must be finite and non-negative"));
            }
            if d.nuts3.trim().is_empty() {
                return Err(Error::schema(&d.id, "nuts3", "must not be empty"));
            }
        }
        Ok(())
    }

    /// Copy with every collection sorted by id, for order-insensitive
    /// comparison.
    pub fn canonical(&self) -> NetworkDataset {
        let mut d = self.clone();
        d.nodes.sort_by(|a, b| a.id.cmp(&b.id));
        d.segments.sort_by(|a, b| a.id.cmp(&b.id));
        d.short_pipes.sort_by(|a, b| a.id.cmp(&b.id));
        d.facilities.sort_by(|a, b| a.id.cmp(&b.id));
        d.demand_points.sort_by(|a, b| a.id.cmp(&b.id));
        d
    }

    /// Structural equality ignoring collection order.
    pub fn same_content(&self, other: &NetworkDataset) -> bool {
        self.canonical() == other.canonical()
    }
}

fn unique_ids<'a>(collection: &'static str, ids: impl Iterator<Item = &'a str>) -> Result<HashSet<&'a str>> {
    let mut seen = HashSet::new();
    for id in ids {
        if id.is_empty() {
            return Err(Error::schema("<unnamed>", "id", format!("empty id in {collection}")));
        }
        if !seen.insert(id) {
            return Err(Error::DuplicateId {
                collection,
                id: id.to_string(),
            });
        }
    }
    Ok(seen)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(lon: f64, lat: f64) -> GeoPoint {
        GeoPoint { lon, lat }
    }

    #[test]
    fn polyline_rejects_short_and_repeated() {
        assert!(Polyline::new(vec![pt(1.0, 1.0)]).is_err());
        assert!(Polyline::new(vec![pt(1.0, 1.0), pt(1.0, 1.0)]).is_err());
        assert!(Polyline::new(vec![pt(1.0, 1.0), pt(f64::NAN, 1.0)]).is_err());
        assert!(Polyline::new(vec![pt(1.0, 1.0), pt(181.0, 1.0)]).is_err());
        assert!(Polyline::new(vec![pt(1.0, 1.0), pt(1.0, 2.0), pt(1.0, 1.0)]).is_ok());
    }

    #[test]
    fn inverted_pressure_range_names_field() {
        let line = Polyline::new(vec![pt(16.0, 48.0), pt(16.1, 48.0)]).unwrap();
        let mut s = PipelineSegment::new(
            "P1",
            line,
            Carrier::NaturalGas,
            Category::DistributionL1,
            Status::Existing,
        );
        s.pressure_min_bar = Some(70.0);
        s.pressure_max_bar = Some(20.0);
        let ds = NetworkDataset {
            segments: vec![s],
            ..Default::default()
        };
        match ds.validate() {
            Err(Error::Schema { feature, field, .. }) => {
                assert_eq!(feature, "P1");
                assert_eq!(field, "pressure_min_bar");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn status_year_consistency() {
        let line = Polyline::new(vec![pt(16.0, 48.0), pt(16.1, 48.0)]).unwrap();
        let s = PipelineSegment::new(
            "R",
            line,
            Carrier::NaturalGas,
            Category::Transmission,
            Status::Repurposed,
        );
        let ds = NetworkDataset {
            segments: vec![s],
            ..Default::default()
        };
        assert!(matches!(ds.validate(), Err(Error::Schema { field, .. }) if field == "repurpose_year"));
    }

    #[test]
    fn non_wgs84_is_rejected() {
        let ds = NetworkDataset {
            metadata: Metadata {
                crs: "EPSG:31287".into(),
                ..Default::default()
            },
            ..Default::default()
        };
        assert!(matches!(ds.validate(), Err(Error::Crs(_))));
    }

    #[test]
    fn concat_drops_shared_vertex() {
        let a = Polyline::new(vec![pt(0.0, 0.0), pt(1.0, 0.0)]).unwrap();
        let b = Polyline::new(vec![pt(1.0, 0.0), pt(1.0, 1.0)]).unwrap();
        assert_eq!(a.concat(&b).points().len(), 3);
    }
}
