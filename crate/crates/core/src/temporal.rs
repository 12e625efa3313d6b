//! Per-year interpretation of a transitioned dataset and the decoupling and
//! supply checks run on it.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geodata::{Carrier, NetworkDataset, NodeCarrier, NodeKind, PipelineSegment, ShortPipe, Status};
use crate::textfile;
use crate::topology::{components_from_pairs, EdgeKind};

/// Carrier a segment transports in `year`. Repurposed segments switch to
/// hydrogen in their repurposing year.
pub fn carrier_at(seg: &PipelineSegment, year: i32) -> Carrier {
    match seg.status {
        Status::Existing => seg.carrier,
        Status::NewBuild => Carrier::Hydrogen,
        Status::Repurposed => match seg.repurpose_year {
            Some(y) if year < y => Carrier::NaturalGas,
            _ => Carrier::Hydrogen,
        },
    }
}

/// New builds only exist from their commission year on.
pub fn segment_active(seg: &PipelineSegment, year: i32) -> bool {
    match (seg.status, seg.commission_year) {
        (Status::NewBuild, Some(c)) => year >= c,
        _ => true,
    }
}

/// Active in `[activate_year, deactivate_year)`; a missing bound is open.
pub fn short_pipe_active(pipe: &ShortPipe, year: i32) -> bool {
    pipe.activate_year.map_or(true, |a| year >= a) && pipe.deactivate_year.map_or(true, |d| year < d)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ActiveEdge {
    pub id: String,
    #[serde(skip)]
    pub kind: EdgeKind,
    pub from: String,
    pub to: String,
    /// Effective carrier; `None` for short pipes, which carry whatever
    /// their endpoints carry.
    pub carrier: Option<Carrier>,
    /// Index into the dataset collection named by `kind`.
    #[serde(skip)]
    pub index: usize,
}

/// The network as it exists in one year.
#[derive(Debug, Clone, PartialEq)]
pub struct TimestepView {
    pub year: i32,
    pub edges: Vec<ActiveEdge>,
    /// Effective carrier of every node, transitional ones resolved.
    pub node_carrier: BTreeMap<String, Carrier>,
}

impl TimestepView {
    /// Nodes incident to at least one active edge.
    pub fn active_nodes(&self) -> BTreeSet<&str> {
        self.edges
            .iter()
            .flat_map(|e| [e.from.as_str(), e.to.as_str()])
            .collect()
    }

    pub fn components(&self) -> Vec<BTreeSet<String>> {
        components_from_pairs(self.edges.iter().map(|e| (e.from.as_str(), e.to.as_str())))
    }
}

/// Derives the active edge set and effective node carriers for `year`.
pub fn topology_at(ds: &NetworkDataset, year: i32) -> Result<TimestepView> {
    let mut edges = Vec::with_capacity(ds.segments.len() + ds.short_pipes.len());
    // transitional node -> carrier of an incident repurposed segment
    let mut interface: BTreeMap<&str, Carrier> = BTreeMap::new();
    for (i, s) in ds.segments.iter().enumerate() {
        let (from, to) = s.endpoints().ok_or_else(|| Error::UnboundEndpoint(s.id.clone()))?;
        let carrier = carrier_at(s, year);
        if s.status == Status::Repurposed {
            interface.entry(from).or_insert(carrier);
            interface.entry(to).or_insert(carrier);
        }
        if segment_active(s, year) {
            edges.push(ActiveEdge {
                id: s.id.clone(),
                kind: EdgeKind::Segment,
                from: from.to_string(),
                to: to.to_string(),
                carrier: Some(carrier),
                index: i,
            });
        }
    }
    for (i, p) in ds.short_pipes.iter().enumerate() {
        if short_pipe_active(p, year) {
            edges.push(ActiveEdge {
                id: p.id.clone(),
                kind: EdgeKind::ShortPipe,
                from: p.from_node.clone(),
                to: p.to_node.clone(),
                carrier: None,
                index: i,
            });
        }
    }
    let node_carrier = ds
        .nodes
        .iter()
        .map(|n| {
            let c = match n.carrier {
                NodeCarrier::NaturalGas => Carrier::NaturalGas,
                NodeCarrier::Hydrogen => Carrier::Hydrogen,
                NodeCarrier::Transitional => *interface
                    .get(n.id.as_str())
                    .ok_or_else(|| Error::DanglingInterface(n.id.clone()))?,
            };
            Ok((n.id.clone(), c))
        })
        .collect::<Result<_>>()?;
    Ok(TimestepView {
        year,
        edges,
        node_carrier,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Check {
    /// A segment meets a node of the other carrier.
    CarrierMismatch,
    /// An active short pipe joins nodes of different carriers.
    ShortPipeMismatch,
    /// A connected component contains both carriers.
    MixedComponent,
    /// A single-carrier component has no supply source.
    NoSupply,
}

impl Check {
    pub fn as_str(self) -> &'static str {
        match self {
            Check::CarrierMismatch => "carrier_mismatch",
            Check::ShortPipeMismatch => "short_pipe_mismatch",
            Check::MixedComponent => "mixed_component",
            Check::NoSupply => "no_supply",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub check: Check,
    pub year: i32,
    pub edge_ids: Vec<String>,
    pub node_ids: Vec<String>,
    pub message: String,
}

fn carrier_of(view: &TimestepView, node: &str) -> Option<Carrier> {
    view.node_carrier.get(node).copied()
}

/// Every active edge must stay within one carrier, and so must every
/// connected component.
pub fn validate_decoupling(view: &TimestepView) -> Vec<Violation> {
    let mut out = Vec::new();
    for e in &view.edges {
        let (a, b) = (carrier_of(view, &e.from), carrier_of(view, &e.to));
        match e.carrier {
            Some(c) => {
                let bad: Vec<String> = [(&e.from, a), (&e.to, b)]
                    .into_iter()
                    .filter(|(_, nc)| *nc != Some(c))
                    .map(|(n, _)| n.clone())
                    .collect();
                if !bad.is_empty() {
                    out.push(Violation {
                        check: Check::CarrierMismatch,
                        year: view.year,
                        edge_ids: vec![e.id.clone()],
                        message: format!("segment `{}` carries {c} but meets {}", e.id, bad.join(", ")),
                        node_ids: bad,
                    });
                }
            }
            None if a != b => out.push(Violation {
                check: Check::ShortPipeMismatch,
                year: view.year,
                edge_ids: vec![e.id.clone()],
                node_ids: vec![e.from.clone(), e.to.clone()],
                message: format!("short pipe `{}` joins different carriers", e.id),
            }),
            None => {}
        }
    }
    for comp in view.components() {
        let carriers: BTreeSet<_> = comp
            .iter()
            .flat_map(|n| carrier_of(view, n))
            .chain(
                view.edges
                    .iter()
                    .filter(|e| comp.contains(&e.from))
                    .flat_map(|e| e.carrier),
            )
            .collect();
        if carriers.len() > 1 {
            let edge_ids = view
                .edges
                .iter()
                .filter(|e| comp.contains(&e.from))
                .map(|e| e.id.clone())
                .collect();
            out.push(Violation {
                check: Check::MixedComponent,
                year: view.year,
                edge_ids,
                message: format!("component of {} node(s) mixes natural gas and hydrogen", comp.len()),
                node_ids: comp.into_iter().collect(),
            });
        }
    }
    out
}

fn supplies(kind: NodeKind, carrier: Carrier) -> bool {
    match kind {
        NodeKind::BorderPoint | NodeKind::Storage => true,
        NodeKind::BiogasPlant => carrier == Carrier::NaturalGas,
        NodeKind::Electrolyzer => carrier == Carrier::Hydrogen,
        _ => false,
    }
}

/// Every connected single-carrier component needs a supply source of its
/// carrier: a border point or storage, a biogas plant for natural gas or an
/// electrolyser for hydrogen, either as a node kind or as an attached
/// facility. Components touching an excepted node id or NUTS-3 region are
/// skipped; mixed components are left to [`validate_decoupling`].
pub fn validate_supply(view: &TimestepView, ds: &NetworkDataset, exceptions: &[String]) -> Vec<Violation> {
    let exceptions: HashSet<&str> = exceptions.iter().map(String::as_str).collect();
    let nodes = ds.node_index();
    let mut out = Vec::new();
    for comp in view.components() {
        let carriers: BTreeSet<Carrier> = comp.iter().flat_map(|n| carrier_of(view, n)).collect();
        let carrier = match (carriers.len(), carriers.first()) {
            (1, Some(&c)) => c,
            _ => continue,
        };
        let excepted = comp.iter().any(|id| {
            exceptions.contains(id.as_str())
                || nodes
                    .get(id.as_str())
                    .and_then(|n| n.nuts3.as_deref())
                    .is_some_and(|r| exceptions.contains(r))
        });
        if excepted {
            continue;
        }
        let node_supply = comp
            .iter()
            .any(|id| nodes.get(id.as_str()).is_some_and(|n| supplies(n.kind, carrier)));
        let facility_supply = ds.facilities.iter().any(|f| {
            f.carrier == carrier
                && supplies(f.kind, carrier)
                && f.attached_node.as_ref().is_some_and(|n| comp.contains(n))
        });
        if !node_supply && !facility_supply {
            let edge_ids = view
                .edges
                .iter()
                .filter(|e| comp.contains(&e.from))
                .map(|e| e.id.clone())
                .collect();
            out.push(Violation {
                check: Check::NoSupply,
                year: view.year,
                edge_ids,
                message: format!("{carrier} component of {} node(s) has no supply source", comp.len()),
                node_ids: comp.into_iter().collect(),
            });
        }
    }
    out
}

/// Horizon years plus the year before each, where most switches become
/// visible.
pub fn default_years(horizon: &[i32]) -> Vec<i32> {
    let years: BTreeSet<i32> = horizon.iter().flat_map(|&y| [y - 1, y]).collect();
    years.into_iter().collect()
}

/// Exception entries (node ids or NUTS-3 codes), any number per line.
pub fn read_exceptions(path: &Path) -> Result<Vec<String>> {
    Ok(textfile::read_records(path)?
        .into_iter()
        .flat_map(|r| r.fields)
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct YearSummary {
    pub year: i32,
    pub active_edges: usize,
    pub components: usize,
    pub violations: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub years: Vec<YearSummary>,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    /// First failing year and its violation count.
    pub fn first_failure(&self) -> Option<(i32, usize)> {
        self.years
            .iter()
            .find(|y| y.violations > 0)
            .map(|y| (y.year, y.violations))
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for y in &self.years {
            let verdict = if y.violations == 0 { "ok" } else { "FAIL" };
            let _ = writeln!(
                s,
                "{}: {verdict} ({} active edges, {} components, {} violations)",
                y.year, y.active_edges, y.components, y.violations
            );
        }
        for v in &self.violations {
            let _ = writeln!(
                s,
                "  [{}] {} {}: {}",
                v.year,
                v.check.as_str(),
                v.edge_ids.join(","),
                v.message
            );
        }
        s
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }
}

/// Runs the decoupling and supply checks for every year. Exceptions from
/// the dataset metadata are added to `exceptions`.
pub fn validate_years(ds: &NetworkDataset, years: &[i32], exceptions: &[String]) -> Result<ValidationReport> {
    let mut all: Vec<String> = ds.metadata.exceptions.clone();
    all.extend(exceptions.iter().cloned());
    let mut report = ValidationReport::default();
    for &year in years {
        let view = topology_at(ds, year)?;
        let mut found = validate_decoupling(&view);
        found.extend(validate_supply(&view, ds, &all));
        report.years.push(YearSummary {
            year,
            active_edges: view.edges.len(),
            components: view.components().len(),
            violations: found.len(),
        });
        report.violations.extend(found);
    }
    Ok(report)
}
