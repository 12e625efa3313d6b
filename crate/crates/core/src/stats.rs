//! Length and count summaries by carrier, status and category.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::Serialize;

use crate::geodata::{Carrier, Category, NetworkDataset, Status};
use crate::temporal::{carrier_at, segment_active, short_pipe_active};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatsRow {
    pub carrier: Carrier,
    pub status: Status,
    pub category: Category,
    pub count: usize,
    pub length_km: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatsReport {
    /// `None` for the stored dataset, otherwise the evaluated year.
    pub year: Option<i32>,
    pub rows: Vec<StatsRow>,
    pub total_length_km: f64,
    pub node_count: usize,
    pub short_pipe_count: usize,
    pub facilities: BTreeMap<String, usize>,
    pub demand_points: usize,
}

/// Summarises the stored dataset, or with `year` the active network using
/// effective carriers. Node counts for a year cover nodes on active edges.
pub fn compute_stats(ds: &NetworkDataset, year: Option<i32>) -> StatsReport {
    let mut groups: BTreeMap<(Carrier, Status, Category), (usize, f64)> = BTreeMap::new();
    let mut active_nodes = BTreeSet::new();
    for s in &ds.segments {
        let carrier = match year {
            Some(y) if !segment_active(s, y) => continue,
            Some(y) => carrier_at(s, y),
            None => s.carrier,
        };
        let g = groups.entry((carrier, s.status, s.category)).or_default();
        g.0 += 1;
        g.1 += s.length_km;
        active_nodes.extend(s.from_node.as_deref());
        active_nodes.extend(s.to_node.as_deref());
    }
    let pipes: Vec<_> = ds
        .short_pipes
        .iter()
        .filter(|p| year.map_or(true, |y| short_pipe_active(p, y)))
        .collect();
    for p in &pipes {
        active_nodes.insert(p.from_node.as_str());
        active_nodes.insert(p.to_node.as_str());
    }
    let rows: Vec<StatsRow> = groups
        .into_iter()
        .map(|((carrier, status, category), (count, length_km))| StatsRow {
            carrier,
            status,
            category,
            count,
            length_km,
        })
        .collect();
    let mut facilities = BTreeMap::new();
    for f in &ds.facilities {
        *facilities.entry(f.kind.to_string()).or_insert(0) += 1;
    }
    StatsReport {
        year,
        total_length_km: rows.iter().map(|r| r.length_km).sum(),
        rows,
        node_count: if year.is_some() {
            active_nodes.len()
        } else {
            ds.nodes.len()
        },
        short_pipe_count: pipes.len(),
        facilities,
        demand_points: ds.demand_points.len(),
    }
}

impl StatsReport {
    /// Count and length over all rows matching the given filters.
    pub fn total(&self, carrier: Option<Carrier>, status: Option<Status>, category: Option<Category>) -> (usize, f64) {
        self.rows
            .iter()
            .filter(|r| carrier.map_or(true, |c| r.carrier == c))
            .filter(|r| status.map_or(true, |s| r.status == s))
            .filter(|r| category.map_or(true, |c| r.category == c))
            .fold((0, 0.0), |(n, km), r| (n + r.count, km + r.length_km))
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        if let Some(y) = self.year {
            let _ = writeln!(s, "year {y}");
        }
        let _ = writeln!(
            s,
            "{:<12} {:<11} {:<16} {:>7} {:>12}",
            "carrier", "status", "category", "count", "length_km"
        );
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:<12} {:<11} {:<16} {:>7} {:>12.3}",
                r.carrier.as_str(),
                r.status.as_str(),
                r.category.as_str(),
                r.count,
                r.length_km
            );
        }
        let _ = writeln!(s, "total length: {:.3} km", self.total_length_km);
        let _ = writeln!(s, "nodes: {}", self.node_count);
        let _ = writeln!(s, "short pipes: {}", self.short_pipe_count);
        let _ = writeln!(s, "demand points: {}", self.demand_points);
        for (kind, n) in &self.facilities {
            let _ = writeln!(s, "facilities ({kind}): {n}");
        }
        s
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("stats serialise")
    }
}
