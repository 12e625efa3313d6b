//! Staged natural gas to hydrogen transition within one dataset.
//!
//! Repurposed segments keep a single record whose carrier is interpreted per
//! year (see [`crate::temporal::carrier_at`]). Nodes where edges with
//! different carrier schedules meet are split into carrier-exclusive
//! sub-nodes, and each repurposed segment end at such a site gets its own
//! transitional interface node. Short pipes with activation windows then
//! reconnect the interfaces to the natural gas side until the repurposing
//! year and to the hydrogen side from that year on.
//!
//! Sub-node naming: `<id>_NG`, `<id>_H2` and `<id>_T<k>`; generated short
//! pipes are `SP_<interface>_NG` and `SP_<interface>_H2`.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::path::Path;

use serde::Deserialize;
use serde_json::Value;

use crate::error::{Error, Result};
use crate::geodata::{
    io, Carrier, DemandPoint, GeoPoint, NetworkDataset, NetworkNode, NodeCarrier, NodeKind, PipelineSegment, ShortPipe,
    Status,
};
use crate::topology::{snap_and_build, EdgeKind, Graph};

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct RepurposeEntry {
    pub segment: String,
    pub year: i32,
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
struct ShortPipeEntry {
    id: String,
    from_node: String,
    to_node: String,
    #[serde(default)]
    activate_year: Option<i32>,
    #[serde(default)]
    deactivate_year: Option<i32>,
}

#[derive(Debug, Deserialize)]
struct PlanFile {
    #[serde(default)]
    horizon: Vec<i32>,
    #[serde(default)]
    repurpose: Vec<RepurposeEntry>,
    #[serde(default)]
    new_builds: Vec<Value>,
    #[serde(default)]
    short_pipes: Vec<ShortPipeEntry>,
}

/// Declarative schedule of repurposing years, new builds and explicit
/// short-pipe windows.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TransitionPlan {
    pub repurpose: Vec<RepurposeEntry>,
    pub new_builds: Vec<PipelineSegment>,
    /// Replaces automatic short-pipe generation at the sites they touch.
    pub short_pipes: Vec<ShortPipe>,
    pub horizon: Vec<i32>,
}

impl TransitionPlan {
    /// Parses the JSON plan format: top-level `horizon`, `repurpose`
    /// (`{segment, year}`), `new_builds` (inline GeoJSON features) and
    /// `short_pipes`.
    pub fn parse(text: &str) -> Result<Self> {
        let file: PlanFile = serde_json::from_str(text).map_err(|e| Error::Plan(e.to_string()))?;
        let features = file
            .new_builds
            .into_iter()
            .map(|mut f| {
                if let Some(Value::Object(props)) = f.get_mut("properties") {
                    props.entry("layer").or_insert_with(|| Value::String("segment".into()));
                }
                f
            })
            .collect();
        let parsed = io::parse_inline_features(features)?;
        if !parsed.nodes.is_empty() || !parsed.short_pipes.is_empty() || !parsed.facilities.is_empty() {
            return Err(Error::Plan("new_builds may only contain segment features".into()));
        }
        let plan = TransitionPlan {
            repurpose: file.repurpose,
            new_builds: parsed.segments,
            short_pipes: file
                .short_pipes
                .into_iter()
                .map(|p| ShortPipe {
                    id: p.id,
                    from_node: p.from_node,
                    to_node: p.to_node,
                    activate_year: p.activate_year,
                    deactivate_year: p.deactivate_year,
                })
                .collect(),
            horizon: file.horizon,
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    fn bounds(&self) -> Option<(i32, i32)> {
        Some((*self.horizon.iter().min()?, *self.horizon.iter().max()?))
    }

    /// Checks plan-internal invariants: years inside the horizon, no segment
    /// repurposed twice, well-formed new builds and short pipes.
    pub fn validate(&self) -> Result<()> {
        let within = |what: &str, id: &str, year: i32| -> Result<()> {
            match self.bounds() {
                Some((lo, hi)) if year < lo || year > hi => Err(Error::Plan(format!(
                    "{what} year {year} of `{id}` lies outside the horizon {lo}..={hi}"
                ))),
                _ => Ok(()),
            }
        };
        let mut seen = HashSet::new();
        for e in &self.repurpose {
            if !seen.insert(e.segment.as_str()) {
                return Err(Error::Plan(format!("segment `{}` is repurposed twice", e.segment)));
            }
            within("repurpose", &e.segment, e.year)?;
        }
        for s in &self.new_builds {
            if s.status != Status::NewBuild || s.carrier != Carrier::Hydrogen {
                return Err(Error::Plan(format!(
                    "new build `{}` must have status new_build and carrier hydrogen",
                    s.id
                )));
            }
            let year = s
                .commission_year
                .ok_or_else(|| Error::Plan(format!("new build `{}` lacks commission_year", s.id)))?;
            within("commission", &s.id, year)?;
        }
        for p in &self.short_pipes {
            for y in p.activate_year.into_iter().chain(p.deactivate_year) {
                within("short pipe", &p.id, y)?;
            }
            if let (Some(a), Some(d)) = (p.activate_year, p.deactivate_year) {
                if a >= d {
                    return Err(Error::Plan(format!(
                        "short pipe `{}` activates ({a}) after it deactivates ({d})",
                        p.id
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Marks planned segments as repurposed from their plan year on.
pub fn apply_repurposing(ds: &NetworkDataset, plan: &TransitionPlan) -> Result<NetworkDataset> {
    plan.validate()?;
    let mut out = ds.clone();
    let index: HashMap<String, usize> = out
        .segments
        .iter()
        .enumerate()
        .map(|(i, s)| (s.id.clone(), i))
        .collect();
    for entry in &plan.repurpose {
        let i = *index
            .get(&entry.segment)
            .ok_or_else(|| Error::Plan(format!("unknown segment `{}`", entry.segment)))?;
        let seg = &mut out.segments[i];
        if seg.status != Status::Existing || seg.carrier != Carrier::NaturalGas {
            return Err(Error::Plan(format!(
                "segment `{}` is {} {} and cannot be repurposed",
                seg.id, seg.status, seg.carrier
            )));
        }
        seg.status = Status::Repurposed;
        seg.repurpose_year = Some(entry.year);
    }
    Ok(out)
}

/// Appends planned hydrogen segments and snaps their endpoints.
pub fn add_new_builds(ds: &NetworkDataset, plan: &TransitionPlan, snap_tolerance_m: f64) -> Result<NetworkDataset> {
    plan.validate()?;
    let mut out = ds.clone();
    let mut ids: HashSet<String> = out.segments.iter().map(|s| s.id.clone()).collect();
    for s in &plan.new_builds {
        if !ids.insert(s.id.clone()) {
            return Err(Error::DuplicateId {
                collection: "segments",
                id: s.id.clone(),
            });
        }
        out.segments.push(s.clone());
    }
    out.validate()?;
    let (snapped, _) = snap_and_build(&out, snap_tolerance_m)?;
    Ok(snapped)
}

/// Carrier behaviour of a segment over time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Schedule {
    NaturalGas,
    Hydrogen,
    /// Natural gas before the year, hydrogen from it on.
    Switch(i32),
}

pub fn schedule(seg: &PipelineSegment) -> Schedule {
    match (seg.status, seg.carrier) {
        (Status::Repurposed, _) => Schedule::Switch(seg.repurpose_year.unwrap_or(i32::MIN)),
        (Status::NewBuild, _) | (Status::Existing, Carrier::Hydrogen) => Schedule::Hydrogen,
        (Status::Existing, Carrier::NaturalGas) => Schedule::NaturalGas,
    }
}

fn label_for(s: Schedule) -> NodeCarrier {
    match s {
        Schedule::NaturalGas => NodeCarrier::NaturalGas,
        Schedule::Hydrogen => NodeCarrier::Hydrogen,
        Schedule::Switch(_) => NodeCarrier::Transitional,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum End {
    From,
    To,
}

/// Splits every node where segments with different carrier schedules meet
/// and relabels all other nodes with the carrier of their segments.
///
/// At a split site, pure natural gas segments rebind to `<id>_NG`, pure
/// hydrogen segments to `<id>_H2`, and each repurposed segment end to a
/// fresh transitional node `<id>_T<k>`. `<id>_NG` is created when the site
/// has natural gas segments or facilities, or more than one repurposed end;
/// `<id>_H2` when it has hydrogen segments or facilities. Attached
/// facilities follow their own carrier.
pub fn split_shared_nodes(ds: &NetworkDataset, graph: &Graph) -> Result<NetworkDataset> {
    let mut out = ds.clone();
    let mut taken: HashSet<String> = ds.nodes.iter().map(|n| n.id.clone()).collect();
    let mut replacements: HashMap<String, Vec<NetworkNode>> = HashMap::new();
    let mut relabel: HashMap<String, NodeCarrier> = HashMap::new();

    for node in &ds.nodes {
        let mut ng = Vec::new();
        let mut h2 = Vec::new();
        let mut rep: Vec<(usize, End, i32)> = Vec::new();
        let mut schedules = BTreeSet::new();
        for e in graph.incident(&node.id) {
            if e.kind != EdgeKind::Segment {
                continue;
            }
            let seg = &ds.segments[e.index];
            let s = schedule(seg);
            schedules.insert(s);
            // A self-loop appears twice in the incidence list; keep both ends
            // apart.
            let end = if e.from == node.id && !rep.iter().any(|r| r.0 == e.index && r.1 == End::From) {
                End::From
            } else {
                End::To
            };
            match s {
                Schedule::NaturalGas => ng.push(e.index),
                Schedule::Hydrogen => h2.push(e.index),
                Schedule::Switch(y) => rep.push((e.index, end, y)),
            }
        }
        if schedules.len() < 2 {
            if let Some(&s) = schedules.iter().next() {
                relabel.insert(node.id.clone(), label_for(s));
            }
            continue;
        }

        if let Some(p) = ds
            .short_pipes
            .iter()
            .find(|p| p.from_node == node.id || p.to_node == node.id)
        {
            return Err(Error::SplitConflict {
                short_pipe: p.id.clone(),
                node: node.id.clone(),
            });
        }

        let attached: Vec<usize> = ds
            .facilities
            .iter()
            .enumerate()
            .filter(|(_, f)| f.attached_node.as_deref() == Some(node.id.as_str()))
            .map(|(i, _)| i)
            .collect();
        let facility_needs = |c: Carrier| attached.iter().any(|&i| ds.facilities[i].carrier == c);
        let need_ng = !ng.is_empty() || rep.len() > 1 || facility_needs(Carrier::NaturalGas);
        let need_h2 = !h2.is_empty() || facility_needs(Carrier::Hydrogen);

        let mut fresh = |suffix: String| -> Result<String> {
            let id = format!("{}_{suffix}", node.id);
            if !taken.insert(id.clone()) {
                return Err(Error::NameCollision(id));
            }
            Ok(id)
        };
        let sub = |id: String, carrier: NodeCarrier, kind: NodeKind| NetworkNode {
            id,
            location: node.location,
            kind,
            carrier,
            nuts3: node.nuts3.clone(),
            split_of: Some(node.id.clone()),
        };

        let mut new_nodes = Vec::new();
        let ng_id = if need_ng {
            let id = fresh("NG".into())?;
            new_nodes.push(sub(id.clone(), NodeCarrier::NaturalGas, node.kind));
            Some(id)
        } else {
            None
        };
        let h2_id = if need_h2 {
            let id = fresh("H2".into())?;
            new_nodes.push(sub(id.clone(), NodeCarrier::Hydrogen, node.kind));
            Some(id)
        } else {
            None
        };

        let rebind = |seg: &mut PipelineSegment, end: End, to: &str| match end {
            End::From => seg.from_node = Some(to.to_string()),
            End::To => seg.to_node = Some(to.to_string()),
        };
        let rebind_all = |seg: &mut PipelineSegment, to: &str| {
            for end in [&mut seg.from_node, &mut seg.to_node] {
                if end.as_deref() == Some(node.id.as_str()) {
                    *end = Some(to.to_string());
                }
            }
        };
        for &i in &ng {
            rebind_all(
                &mut out.segments[i],
                ng_id.as_deref().expect("natural gas sub-node exists"),
            );
        }
        for &i in &h2 {
            rebind_all(
                &mut out.segments[i],
                h2_id.as_deref().expect("hydrogen sub-node exists"),
            );
        }
        rep.sort_by(|a, b| ds.segments[a.0].id.cmp(&ds.segments[b.0].id).then(a.1.cmp(&b.1)));
        rep.dedup();
        for (k, &(i, end, _)) in rep.iter().enumerate() {
            let id = fresh(format!("T{k}"))?;
            new_nodes.push(sub(id.clone(), NodeCarrier::Transitional, NodeKind::Junction));
            rebind(&mut out.segments[i], end, &id);
        }

        for &fi in &attached {
            let f = &mut out.facilities[fi];
            f.attached_node = match f.carrier {
                Carrier::NaturalGas => ng_id.clone(),
                Carrier::Hydrogen => h2_id.clone(),
            };
        }
        replacements.insert(node.id.clone(), new_nodes);
    }

    let mut nodes = Vec::with_capacity(out.nodes.len() + replacements.len() * 2);
    for mut n in std::mem::take(&mut out.nodes) {
        match replacements.remove(&n.id) {
            Some(subs) => nodes.extend(subs),
            None => {
                if let Some(&c) = relabel.get(&n.id) {
                    n.carrier = c;
                }
                nodes.push(n);
            }
        }
    }
    out.nodes = nodes;
    Ok(out)
}

/// Adds time-scheduled short pipes at every split site.
///
/// For an interface `T` of a segment repurposed in year `Y`:
/// `T ↔ <id>_NG` is active until `Y` (deactivates at `Y`), and `T` joins
/// the hydrogen hub from `Y` on. The hub is `<id>_H2` when it exists,
/// otherwise the interface with the earliest repurposing year, which then
/// needs no connector of its own. With one 2027 and one 2040 segment at a
/// natural gas junction this yields three pipes: NG connectors deactivating
/// in 2027 and 2040 and one 2040 activation between the two interfaces.
///
/// Sites touched by an explicit short pipe of the plan get only those.
pub fn generate_short_pipes(ds: &NetworkDataset, plan: &TransitionPlan) -> Result<NetworkDataset> {
    let mut out = ds.clone();
    let nodes = ds.node_index();
    let site_of = |id: &str| -> Option<String> {
        let n = nodes.get(id)?;
        Some(n.split_of.clone().unwrap_or_else(|| n.id.clone()))
    };

    let mut explicit_sites = HashSet::new();
    for p in &plan.short_pipes {
        for (field, node) in [("from_node", &p.from_node), ("to_node", &p.to_node)] {
            let site = site_of(node).ok_or_else(|| Error::UnresolvedReference {
                from: p.id.clone(),
                field: field.to_string(),
                target: node.clone(),
            })?;
            explicit_sites.insert(site);
        }
    }

    // interface node -> repurposing year of its segment
    let mut interface_year: HashMap<&str, i32> = HashMap::new();
    for s in &ds.segments {
        if let (Status::Repurposed, Some(y)) = (s.status, s.repurpose_year) {
            for end in [s.from_node.as_deref(), s.to_node.as_deref()].into_iter().flatten() {
                interface_year.insert(end, y);
            }
        }
    }

    let mut sites: BTreeMap<&str, Vec<&NetworkNode>> = BTreeMap::new();
    for n in &ds.nodes {
        if let Some(site) = &n.split_of {
            sites.entry(site.as_str()).or_default().push(n);
        }
    }

    let mut generated = Vec::new();
    for (site, members) in &sites {
        if explicit_sites.contains(*site) {
            continue;
        }
        let ng_hub = members.iter().find(|n| n.carrier == NodeCarrier::NaturalGas);
        let h2_node = members.iter().find(|n| n.carrier == NodeCarrier::Hydrogen);
        let mut interfaces: Vec<(i32, &str)> = members
            .iter()
            .filter(|n| n.carrier == NodeCarrier::Transitional)
            .map(|n| {
                interface_year
                    .get(n.id.as_str())
                    .map(|&y| (y, n.id.as_str()))
                    .ok_or_else(|| Error::DanglingInterface(n.id.clone()))
            })
            .collect::<Result<_>>()?;
        interfaces.sort();
        let h2_hub = h2_node.map(|n| n.id.as_str()).or(interfaces.first().map(|i| i.1));

        for &(year, t) in &interfaces {
            if let Some(ng) = ng_hub {
                generated.push(ShortPipe {
                    id: format!("SP_{t}_NG"),
                    from_node: t.to_string(),
                    to_node: ng.id.clone(),
                    activate_year: None,
                    deactivate_year: Some(year),
                });
            }
            match h2_hub {
                Some(hub) if hub != t => generated.push(ShortPipe {
                    id: format!("SP_{t}_H2"),
                    from_node: t.to_string(),
                    to_node: hub.to_string(),
                    activate_year: Some(year),
                    deactivate_year: None,
                }),
                _ => {}
            }
        }
    }

    for pipe in generated.into_iter().chain(plan.short_pipes.iter().cloned()) {
        match out.short_pipes.iter().find(|p| p.id == pipe.id) {
            Some(existing) if *existing == pipe => {}
            Some(_) => {
                return Err(Error::DuplicateId {
                    collection: "short_pipes",
                    id: pipe.id,
                })
            }
            None => out.short_pipes.push(pipe),
        }
    }
    out.validate()?;
    Ok(out)
}

/// Aggregated demand of one NUTS-3 region.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionDemandSpec {
    pub nuts3: String,
    /// Closed exterior ring (first vertex equals last).
    pub ring: Vec<GeoPoint>,
    pub annual_demand: f64,
    pub carrier: Carrier,
}

impl RegionDemandSpec {
    fn validate(&self) -> Result<()> {
        if self.nuts3.trim().is_empty() {
            return Err(Error::schema("<region>", "nuts3", "must not be empty"));
        }
        if self.ring.len() < 4 || self.ring.first() != self.ring.last() {
            return Err(Error::Geometry {
                id: self.nuts3.clone(),
                message: "polygon ring must be closed with at least 3 distinct vertices".into(),
            });
        }
        if !self.annual_demand.is_finite() || self.annual_demand < 0.0 {
            return Err(Error::schema(
                &self.nuts3,
                "annual_demand",
                "must be finite and non-negative",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Deserialize)]
struct RegionProps {
    nuts3: String,
    annual_demand: f64,
    carrier: Carrier,
}

/// Reads region demand polygons (GeoJSON Polygons with `nuts3`,
/// `annual_demand` and `carrier` properties).
pub fn read_region_specs(path: &Path) -> Result<Vec<RegionDemandSpec>> {
    io::read_feature_collection(path)?
        .into_iter()
        .enumerate()
        .map(|(i, (props, geometry))| {
            let label = props
                .get("nuts3")
                .and_then(Value::as_str)
                .map(str::to_string)
                .unwrap_or_else(|| format!("region #{i}"));
            let p: RegionProps = serde_path_to_error::deserialize(Value::Object(props))
                .map_err(|e| Error::schema(&label, e.path().to_string(), e.into_inner().to_string()))?;
            let ring = io::parse_polygon_ring(&label, &geometry)?;
            Ok(RegionDemandSpec {
                nuts3: p.nuts3,
                ring,
                annual_demand: p.annual_demand,
                carrier: p.carrier,
            })
        })
        .collect()
}

/// Area-weighted centroid of a closed lon/lat ring, treating degrees as
/// planar coordinates.
pub fn ring_centroid(ring: &[GeoPoint]) -> Option<GeoPoint> {
    let origin = *ring.first()?;
    let (mut area2, mut cx, mut cy) = (0.0, 0.0, 0.0);
    for w in ring.windows(2) {
        let (x0, y0) = (w[0].lon - origin.lon, w[0].lat - origin.lat);
        let (x1, y1) = (w[1].lon - origin.lon, w[1].lat - origin.lat);
        let cross = x0 * y1 - x1 * y0;
        area2 += cross;
        cx += (x0 + x1) * cross;
        cy += (y0 + y1) * cross;
    }
    let scale = ring
        .iter()
        .map(|p| (p.lon - origin.lon).abs().max((p.lat - origin.lat).abs()))
        .fold(0.0, f64::max);
    if area2.abs() <= 1e-15 * scale * scale || !area2.is_finite() {
        return None;
    }
    Some(GeoPoint {
        lon: origin.lon + cx / (3.0 * area2),
        lat: origin.lat + cy / (3.0 * area2),
    })
}

/// Places one demand point per region at the ring centroid.
pub fn assign_regional_demand(ds: &NetworkDataset, specs: &[RegionDemandSpec]) -> Result<NetworkDataset> {
    let mut out = ds.clone();
    let mut ids: HashSet<String> = out.demand_points.iter().map(|d| d.id.clone()).collect();
    for spec in specs {
        spec.validate()?;
        let location = ring_centroid(&spec.ring).ok_or_else(|| Error::DegeneratePolygon(spec.nuts3.clone()))?;
        let id = format!("D_{}_{}", spec.nuts3, spec.carrier.short());
        if !ids.insert(id.clone()) {
            return Err(Error::DuplicateId {
                collection: "demand_points",
                id,
            });
        }
        out.demand_points.push(DemandPoint {
            id,
            location,
            nuts3: spec.nuts3.clone(),
            carrier: spec.carrier,
            annual_demand: spec.annual_demand,
        });
    }
    Ok(out)
}

/// Runs the whole transition in its fixed order: repurpose, new builds,
/// split, short pipes, regional demand. The plan horizon is recorded in the
/// dataset metadata.
pub fn apply_plan(
    ds: &NetworkDataset,
    plan: &TransitionPlan,
    regions: &[RegionDemandSpec],
    snap_tolerance_m: f64,
) -> Result<NetworkDataset> {
    let repurposed = apply_repurposing(ds, plan)?;
    let built = add_new_builds(&repurposed, plan, snap_tolerance_m)?;
    let graph = Graph::from_dataset(&built)?;
    let split = split_shared_nodes(&built, &graph)?;
    let mut piped = generate_short_pipes(&split, plan)?;
    if !plan.horizon.is_empty() {
        let mut horizon = plan.horizon.clone();
        horizon.sort_unstable();
        horizon.dedup();
        piped.metadata.horizon = horizon;
    }
    assign_regional_demand(&piped, regions)
}
