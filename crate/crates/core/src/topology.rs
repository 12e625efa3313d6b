//! Endpoint snapping, graph construction and connectivity queries.
//!
//! The network is endpoint-defined: segments only meet where they share a
//! node. Lines crossing mid-geometry without a shared node are treated as
//! grade-separated and never split.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use petgraph::unionfind::UnionFind;

use crate::error::{Error, Result};
use crate::geodata::{haversine_m, Category, GeoPoint, NetworkDataset, NetworkNode, NodeCarrier};

pub const DEFAULT_SNAP_TOLERANCE_M: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EdgeKind {
    Segment,
    ShortPipe,
}

/// Undirected edge of the network graph. `index` points into the dataset
/// collection named by `kind`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Edge {
    pub id: String,
    pub kind: EdgeKind,
    pub from: String,
    pub to: String,
    pub index: usize,
}

impl Edge {
    pub fn other(&self, node: &str) -> &str {
        if self.from == node {
            &self.to
        } else {
            &self.from
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Graph {
    edges: Vec<Edge>,
    adjacency: BTreeMap<String, Vec<usize>>,
}

impl Graph {
    /// Builds the graph of a dataset whose segment endpoints are all bound.
    pub fn from_dataset(ds: &NetworkDataset) -> Result<Graph> {
        let mut adjacency: BTreeMap<String, Vec<usize>> = ds.nodes.iter().map(|n| (n.id.clone(), Vec::new())).collect();
        let mut edges = Vec::with_capacity(ds.segments.len() + ds.short_pipes.len());

        let segment_edges = ds.segments.iter().enumerate().map(|(i, s)| {
            let (from, to) = s.endpoints().ok_or_else(|| Error::UnboundEndpoint(s.id.clone()))?;
            Ok::<_, Error>((s.id.as_str(), EdgeKind::Segment, from, to, i))
        });
        let pipe_edges = ds.short_pipes.iter().enumerate().map(|(i, p)| {
            Ok((
                p.id.as_str(),
                EdgeKind::ShortPipe,
                p.from_node.as_str(),
                p.to_node.as_str(),
                i,
            ))
        });

        for item in segment_edges.chain(pipe_edges) {
            let (id, kind, from, to, index) = item?;
            let e = edges.len();
            for (field, node) in [("from_node", from), ("to_node", to)] {
                adjacency
                    .get_mut(node)
                    .ok_or_else(|| Error::UnresolvedReference {
                        from: id.to_string(),
                        field: field.to_string(),
                        target: node.to_string(),
                    })?
                    .push(e);
            }
            edges.push(Edge {
                id: id.to_string(),
                kind,
                from: from.to_string(),
                to: to.to_string(),
                index,
            });
        }
        Ok(Graph { edges, adjacency })
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn nodes(&self) -> impl Iterator<Item = &str> {
        self.adjacency.keys().map(String::as_str)
    }

    pub fn contains_node(&self, id: &str) -> bool {
        self.adjacency.contains_key(id)
    }

    /// Edges incident to `node`; a self-loop is reported twice.
    pub fn incident<'a>(&'a self, node: &str) -> impl Iterator<Item = &'a Edge> + 'a {
        self.adjacency
            .get(node)
            .into_iter()
            .flatten()
            .map(move |&e| &self.edges[e])
    }

    pub fn degree(&self, node: &str) -> usize {
        self.adjacency.get(node).map_or(0, Vec::len)
    }
}

/// Connected components over the endpoints of the given node pairs, each
/// sorted, and the list ordered by smallest member.
pub fn components_from_pairs<'a, I>(pairs: I) -> Vec<BTreeSet<String>>
where
    I: IntoIterator<Item = (&'a str, &'a str)>,
{
    let mut index: HashMap<&str, usize> = HashMap::new();
    let mut names: Vec<&str> = Vec::new();
    let mut links = Vec::new();
    for (a, b) in pairs {
        let mut id = |n: &'a str| {
            *index.entry(n).or_insert_with(|| {
                names.push(n);
                names.len() - 1
            })
        };
        let (ia, ib) = (id(a), id(b));
        links.push((ia, ib));
    }
    let mut uf = UnionFind::new(names.len());
    for (a, b) in links {
        uf.union(a, b);
    }
    let mut groups: BTreeMap<usize, BTreeSet<String>> = BTreeMap::new();
    for (i, name) in names.iter().enumerate() {
        groups.entry(uf.find(i)).or_default().insert(name.to_string());
    }
    let mut out: Vec<_> = groups.into_values().collect();
    out.sort();
    out
}

/// Partition of every node incident to at least one edge accepted by
/// `filter`, using undirected connectivity.
pub fn connected_components<F>(graph: &Graph, filter: F) -> Vec<BTreeSet<String>>
where
    F: Fn(&Edge) -> bool,
{
    components_from_pairs(
        graph
            .edges()
            .iter()
            .filter(|e| filter(e))
            .map(|e| (e.from.as_str(), e.to.as_str())),
    )
}

/// Rebinds segment endpoints to nodes within `snap_tolerance_m` and spawns
/// junction nodes for endpoints that match none.
///
/// An endpoint keeps its current binding when the bound node is within
/// tolerance. Otherwise pre-existing nodes are preferred over junctions
/// spawned during this call; among several in-tolerance nodes the nearest
/// wins, ties going to the smallest id. Geometries are never moved.
pub fn snap_and_build(ds: &NetworkDataset, snap_tolerance_m: f64) -> Result<(NetworkDataset, Graph)> {
    if !(snap_tolerance_m >= 0.0) || !snap_tolerance_m.is_finite() {
        return Err(Error::schema(
            "<snap>",
            "snap_tolerance_m",
            format!("tolerance must be a non-negative number, got {snap_tolerance_m}"),
        ));
    }
    let mut out = ds.clone();
    let existing: Vec<(String, GeoPoint)> = ds.nodes.iter().map(|n| (n.id.clone(), n.location)).collect();
    let existing_index: HashMap<&str, GeoPoint> = existing.iter().map(|(id, p)| (id.as_str(), *p)).collect();
    let mut used_ids: HashSet<String> = ds.nodes.iter().map(|n| n.id.clone()).collect();
    let mut spawned: Vec<(String, GeoPoint)> = Vec::new();
    let mut next_junction = 1usize;

    let lat_window = snap_tolerance_m / crate::geodata::geo::metres_per_degree();

    for seg in out.segments.iter_mut() {
        let carrier = NodeCarrier::from(seg.carrier);
        let ends = [
            ("from", seg.geometry.first(), seg.from_node.clone()),
            ("to", seg.geometry.last(), seg.to_node.clone()),
        ];
        let mut bound = Vec::with_capacity(2);
        for (end, point, current) in ends {
            let keep = current.as_deref().and_then(|id| {
                let loc = existing_index
                    .get(id)
                    .copied()
                    .or_else(|| spawned.iter().find(|(s, _)| s == id).map(|(_, p)| *p))?;
                (haversine_m(point, loc) <= snap_tolerance_m).then(|| id.to_string())
            });
            if let Some(id) = keep {
                bound.push(id);
                continue;
            }
            let pick = nearest_within(&seg.id, end, point, &existing, snap_tolerance_m, lat_window)?.or(
                nearest_within(&seg.id, end, point, &spawned, snap_tolerance_m, lat_window)?,
            );
            let id = match pick {
                Some(id) => id,
                None => {
                    let id = loop {
                        let candidate = format!("J{next_junction}");
                        next_junction += 1;
                        if !used_ids.contains(&candidate) {
                            break candidate;
                        }
                    };
                    used_ids.insert(id.clone());
                    spawned.push((id.clone(), point));
                    out.nodes.push(NetworkNode::junction(id.clone(), point, carrier));
                    id
                }
            };
            bound.push(id);
        }
        seg.to_node = bound.pop();
        seg.from_node = bound.pop();
    }

    let graph = Graph::from_dataset(&out)?;
    Ok((out, graph))
}

fn nearest_within(
    segment: &str,
    end: &'static str,
    point: GeoPoint,
    nodes: &[(String, GeoPoint)],
    tolerance_m: f64,
    lat_window: f64,
) -> Result<Option<String>> {
    let mut hits: Vec<(f64, &str, GeoPoint)> = nodes
        .iter()
        .filter(|(_, loc)| (loc.lat - point.lat).abs() <= lat_window * 1.01 + 1e-12)
        .map(|(id, loc)| (haversine_m(point, *loc), id.as_str(), *loc))
        .filter(|(d, _, _)| *d <= tolerance_m)
        .collect();
    if hits.is_empty() {
        return Ok(None);
    }
    for (i, a) in hits.iter().enumerate() {
        for b in &hits[i + 1..] {
            if haversine_m(a.2, b.2) > tolerance_m {
                let mut candidates: Vec<String> = hits.iter().map(|h| h.1.to_string()).collect();
                candidates.sort();
                return Err(Error::AmbiguousSnap {
                    segment: segment.to_string(),
                    end,
                    candidates,
                });
            }
        }
    }
    hits.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(b.1)));
    Ok(Some(hits[0].1.to_string()))
}

/// Position of a Level 1 distribution segment relative to the transmission
/// network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum L1Class {
    TransmissionConnected,
    Downstream,
}

impl L1Class {
    pub fn as_str(self) -> &'static str {
        match self {
            L1Class::TransmissionConnected => "transmission_connected",
            L1Class::Downstream => "downstream",
        }
    }
}

/// Classifies every `distribution_l1` segment: transmission-connected when
/// it shares a node with any transmission segment, downstream otherwise.
pub fn classify_l1_segments(graph: &Graph, ds: &NetworkDataset) -> BTreeMap<String, L1Class> {
    let touches_transmission = |node: &str| {
        graph
            .incident(node)
            .any(|e| e.kind == EdgeKind::Segment && ds.segments[e.index].category == Category::Transmission)
    };
    graph
        .edges()
        .iter()
        .filter(|e| e.kind == EdgeKind::Segment && ds.segments[e.index].category == Category::DistributionL1)
        .map(|e| {
            let class = if touches_transmission(&e.from) || touches_transmission(&e.to) {
                L1Class::TransmissionConnected
            } else {
                L1Class::Downstream
            };
            (e.id.clone(), class)
        })
        .collect()
}
