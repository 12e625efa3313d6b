//! Tabular and GeoJSON output for downstream energy-system models.
//!
//! Per evaluated year two CSV files are written, `nodes_<year>.csv` and
//! `edges_<year>.csv`, describing only the active network with effective
//! carriers. `network_combined.csv` lists every edge once with its
//! scheduling columns so a model can derive each year itself.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::geodata::{haversine_m, Carrier, NetworkDataset};
use crate::temporal::{topology_at, validate_years, TimestepView};
use crate::topology::EdgeKind;

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// Annual demand attached to each active node: every demand point goes to
/// the nearest active node of its carrier (ties to the smaller id). Points
/// with no such node are returned separately.
pub fn assign_demand(ds: &NetworkDataset, view: &TimestepView) -> (BTreeMap<String, f64>, Vec<String>) {
    let index = ds.node_index();
    let candidates: Vec<(&str, Carrier)> = view
        .active_nodes()
        .into_iter()
        .filter_map(|id| Some((id, *view.node_carrier.get(id)?)))
        .collect();
    let mut demand = BTreeMap::new();
    let mut unassigned = Vec::new();
    for d in &ds.demand_points {
        let best = candidates
            .iter()
            .filter(|(_, c)| *c == d.carrier)
            .filter_map(|(id, _)| Some((haversine_m(d.location, index.get(id)?.location), *id)))
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(b.1)));
        match best {
            Some((_, id)) => *demand.entry(id.to_string()).or_insert(0.0) += d.annual_demand,
            None => unassigned.push(d.id.clone()),
        }
    }
    (demand, unassigned)
}

#[derive(Debug, Clone, PartialEq)]
pub struct YearExport {
    pub year: i32,
    pub nodes_csv: PathBuf,
    pub edges_csv: PathBuf,
    pub unassigned_demand: Vec<String>,
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

/// Writes `nodes_<year>.csv` and `edges_<year>.csv` into `dir`.
pub fn export_year_csv(ds: &NetworkDataset, year: i32, dir: &Path) -> Result<YearExport> {
    create_dir(dir)?;
    let view = topology_at(ds, year)?;
    let (demand, unassigned) = assign_demand(ds, &view);
    let index = ds.node_index();

    let nodes_csv = dir.join(format!("nodes_{year}.csv"));
    let mut w = csv_writer(&nodes_csv)?;
    w.write_record(["id", "lon", "lat", "carrier", "kind", "nuts3", "demand"])?;
    for id in view.active_nodes() {
        let Some(n) = index.get(id) else { continue };
        w.write_record([
            n.id.clone(),
            n.location.lon.to_string(),
            n.location.lat.to_string(),
            opt(view.node_carrier.get(id)),
            n.kind.to_string(),
            n.nuts3.clone().unwrap_or_default(),
            demand.get(id).copied().unwrap_or(0.0).to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(&nodes_csv, e))?;

    let edges_csv = dir.join(format!("edges_{year}.csv"));
    let mut w = csv_writer(&edges_csv)?;
    w.write_record([
        "id",
        "from_node",
        "to_node",
        "carrier",
        "category",
        "status",
        "length_km",
        "diameter_min_mm",
        "diameter_max_mm",
        "pressure_min_bar",
        "pressure_max_bar",
        "is_short_pipe",
    ])?;
    for e in &view.edges {
        let row = match e.kind {
            EdgeKind::Segment => {
                let s = &ds.segments[e.index];
                [
                    e.id.clone(),
                    e.from.clone(),
                    e.to.clone(),
                    opt(e.carrier),
                    s.category.to_string(),
                    s.status.to_string(),
                    s.length_km.to_string(),
                    opt(s.diameter_min_mm),
                    opt(s.diameter_max_mm),
                    opt(s.pressure_min_bar),
                    opt(s.pressure_max_bar),
                    "false".into(),
                ]
            }
            EdgeKind::ShortPipe => [
                e.id.clone(),
                e.from.clone(),
                e.to.clone(),
                opt(view.node_carrier.get(&e.from)),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                "true".into(),
            ],
        };
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(&edges_csv, e))?;

    Ok(YearExport {
        year,
        nodes_csv,
        edges_csv,
        unassigned_demand: unassigned,
    })
}

/// Writes every segment and short pipe once, with scheduling columns.
pub fn export_combined_csv(ds: &NetworkDataset, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    let mut w = csv_writer(path)?;
    w.write_record([
        "id",
        "is_short_pipe",
        "from_node",
        "to_node",
        "carrier",
        "category",
        "status",
        "length_km",
        "diameter_min_mm",
        "diameter_max_mm",
        "pressure_min_bar",
        "pressure_max_bar",
        "repurpose_year",
        "commission_year",
        "activate_year",
        "deactivate_year",
    ])?;
    for s in &ds.segments {
        w.write_record([
            s.id.clone(),
            "false".into(),
            opt(s.from_node.as_ref()),
            opt(s.to_node.as_ref()),
            s.carrier.to_string(),
            s.category.to_string(),
            s.status.to_string(),
            s.length_km.to_string(),
            opt(s.diameter_min_mm),
            opt(s.diameter_max_mm),
            opt(s.pressure_min_bar),
            opt(s.pressure_max_bar),
            opt(s.repurpose_year),
            opt(s.commission_year),
            String::new(),
            String::new(),
        ])?;
    }
    for p in &ds.short_pipes {
        let mut row = vec![p.id.clone(), "true".into(), p.from_node.clone(), p.to_node.clone()];
        row.extend(std::iter::repeat(String::new()).take(10));
        row.push(opt(p.activate_year));
        row.push(opt(p.deactivate_year));
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// GeoJSON of the active network in `year`: nodes with effective carriers
/// and edges as line strings (short pipes drawn between their endpoints).
pub fn view_to_geojson(ds: &NetworkDataset, view: &TimestepView) -> String {
    let index = ds.node_index();
    let coords = |id: &str| index.get(id).map(|n| json!([n.location.lon, n.location.lat]));
    let mut features: Vec<Value> = Vec::new();
    for id in view.active_nodes() {
        let Some(n) = index.get(id) else { continue };
        features.push(json!({
            "type": "Feature",
            "geometry": {"type": "Point", "coordinates": [n.location.lon, n.location.lat]},
            "properties": {"id": n.id, "layer": "node", "kind": n.kind, "carrier": view.node_carrier.get(id)},
        }));
    }
    for e in &view.edges {
        let (geometry, props) = match e.kind {
            EdgeKind::Segment => {
                let s = &ds.segments[e.index];
                let line: Vec<Value> = s.geometry.points().iter().map(|p| json!([p.lon, p.lat])).collect();
                (
                    json!({"type": "LineString", "coordinates": line}),
                    json!({"id": e.id, "layer": "segment", "carrier": e.carrier, "status": s.status,
                           "category": s.category, "from_node": e.from, "to_node": e.to, "length_km": s.length_km}),
                )
            }
            EdgeKind::ShortPipe => (
                json!({"type": "LineString", "coordinates": [coords(&e.from), coords(&e.to)]}),
                json!({"id": e.id, "layer": "short_pipe", "carrier": view.node_carrier.get(&e.from),
                       "from_node": e.from, "to_node": e.to}),
            ),
        };
        features.push(json!({"type": "Feature", "geometry": geometry, "properties": props}));
    }
    let fc = json!({"type": "FeatureCollection", "year": view.year, "features": features});
    let mut s = serde_json::to_string(&fc).expect("geojson serialises");
    s.push('\n');
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    /// Per-year node and edge tables plus the combined table.
    Csv,
    /// One `network_<year>.geojson` per year.
    Geojson,
    Both,
}

impl ExportFormat {
    fn csv(self) -> bool {
        matches!(self, ExportFormat::Csv | ExportFormat::Both)
    }

    fn geojson(self) -> bool {
        matches!(self, ExportFormat::Geojson | ExportFormat::Both)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExportSummary {
    pub years: Vec<YearExport>,
    pub combined_csv: Option<PathBuf>,
    pub geojson: Vec<PathBuf>,
}

/// Exports every year in `format`. Unless `force` is set the dataset must
/// pass validation for all years first.
pub fn export_all(
    ds: &NetworkDataset,
    years: &[i32],
    dir: &Path,
    exceptions: &[String],
    force: bool,
    format: ExportFormat,
) -> Result<ExportSummary> {
    if !force {
        let report = validate_years(ds, years, exceptions)?;
        if let Some((year, violations)) = report.first_failure() {
            return Err(Error::ValidationFailed { year, violations });
        }
    }
    create_dir(dir)?;
    let mut summary = ExportSummary {
        years: Vec::new(),
        combined_csv: None,
        geojson: Vec::new(),
    };
    for &year in years {
        if format.csv() {
            summary.years.push(export_year_csv(ds, year, dir)?);
        }
        if format.geojson() {
            let view = topology_at(ds, year)?;
            let path = dir.join(format!("network_{year}.geojson"));
            fs::write(&path, view_to_geojson(ds, &view)).map_err(|e| Error::io(&path, e))?;
            summary.geojson.push(path);
        }
    }
    if format.csv() {
        let path = dir.join("network_combined.csv");
        export_combined_csv(ds, &path)?;
        summary.combined_csv = Some(path);
    }
    Ok(summary)
}
