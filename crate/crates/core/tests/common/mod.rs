//! Helpers shared by the integration and acceptance tests.
#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::PathBuf;

use gasgraph::transition::{RepurposeEntry, TransitionPlan};
use gasgraph::{
    Carrier, Category, GeoPoint, NetworkDataset, NetworkNode, NodeCarrier, NodeKind, PipelineSegment, Polyline, Status,
};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn pt(lon: f64, lat: f64) -> GeoPoint {
    GeoPoint { lon, lat }
}

/// Great-circle distance from unit vectors: atan2(|a×b|, a·b). Shares no
/// code with the haversine implementation.
pub fn vector_distance_km(a: GeoPoint, b: GeoPoint) -> f64 {
    let v = |p: GeoPoint| {
        let (lon, lat) = (p.lon.to_radians(), p.lat.to_radians());
        [lat.cos() * lon.cos(), lat.cos() * lon.sin(), lat.sin()]
    };
    let (a, b) = (v(a), v(b));
    let cross = [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ];
    let norm = (cross[0] * cross[0] + cross[1] * cross[1] + cross[2] * cross[2]).sqrt();
    let dot = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    6371.0088 * norm.atan2(dot)
}

pub fn vector_length_km(points: &[GeoPoint]) -> f64 {
    points.windows(2).map(|w| vector_distance_km(w[0], w[1])).sum()
}

/// Jittered grid network of existing natural gas pipelines, connected by a
/// spanning tree plus extra neighbour links up to `segments` edges.
pub fn synthetic_network(seed: u64, width: usize, height: usize, segments: usize) -> NetworkDataset {
    let mut r = rng(seed);
    let spacing = 0.08;
    let id = |x: usize, y: usize| format!("N{:03}_{:03}", x, y);
    let mut ds = NetworkDataset::default();
    for y in 0..height {
        for x in 0..width {
            let loc = pt(
                9.5 + x as f64 * spacing + r.gen_range(-0.015..0.015),
                46.5 + y as f64 * spacing * 0.7 + r.gen_range(-0.01..0.01),
            );
            let mut n = NetworkNode::junction(id(x, y), loc, NodeCarrier::NaturalGas);
            if r.gen_bool(0.06) {
                n.kind = NodeKind::BorderPoint;
            } else if r.gen_bool(0.03) {
                n.kind = NodeKind::Storage;
            }
            n.nuts3 = Some(format!("AT{}{}", 1 + x * 3 / width.max(1), 1 + y * 3 / height.max(1)));
            ds.nodes.push(n);
        }
    }
    let loc = |ds: &NetworkDataset, x: usize, y: usize| ds.nodes[y * width + x].location;

    let mut pairs: BTreeSet<((usize, usize), (usize, usize))> = BTreeSet::new();
    for y in 0..height {
        for x in 0..width {
            if x == 0 && y == 0 {
                continue;
            }
            let parent = if y == 0 || (x > 0 && r.gen_bool(0.5)) {
                (x - 1, y)
            } else {
                (x, y - 1)
            };
            pairs.insert((parent, (x, y)));
        }
    }
    let mut guard = 0;
    while pairs.len() < segments && guard < segments * 50 {
        guard += 1;
        let (x, y) = (r.gen_range(0..width), r.gen_range(0..height));
        let (nx, ny) = match r.gen_range(0..3) {
            0 if x + 1 < width => (x + 1, y),
            1 if y + 1 < height => (x, y + 1),
            2 if x + 1 < width && y + 1 < height => (x + 1, y + 1),
            _ => continue,
        };
        pairs.insert(((x, y), (nx, ny)));
    }

    for (k, (a, b)) in pairs.into_iter().enumerate() {
        let (pa, pb) = (loc(&ds, a.0, a.1), loc(&ds, b.0, b.1));
        let mid = pt(
            (pa.lon + pb.lon) / 2.0 + r.gen_range(-0.004..0.004),
            (pa.lat + pb.lat) / 2.0 + r.gen_range(-0.004..0.004),
        );
        let category = match r.gen_range(0..20) {
            0..=11 => Category::Transmission,
            12..=16 => Category::DistributionL1,
            _ => Category::DistributionL2,
        };
        let seg = PipelineSegment::new(
            format!("S{k:05}"),
            Polyline::new(vec![pa, mid, pb]).unwrap(),
            Carrier::NaturalGas,
            category,
            Status::Existing,
        )
        .with_nodes(id(a.0, a.1), id(b.0, b.1));
        ds.segments.push(seg);
    }
    ds.metadata.horizon = vec![2030, 2035, 2040, 2045];
    ds
}

/// Repurposes roughly `share` of the segments in random horizon years and
/// adds `new_builds` hydrogen links between random node pairs.
pub fn synthetic_plan(seed: u64, ds: &NetworkDataset, share: f64, new_builds: usize) -> TransitionPlan {
    let mut r = rng(seed ^ 0x9e37_79b9);
    let years = [2030, 2035, 2040, 2045];
    let mut plan = TransitionPlan {
        horizon: years.to_vec(),
        ..Default::default()
    };
    for s in &ds.segments {
        if r.gen_bool(share) {
            plan.repurpose.push(RepurposeEntry {
                segment: s.id.clone(),
                year: years[r.gen_range(0..years.len())],
            });
        }
    }
    for k in 0..new_builds {
        let a = &ds.nodes[r.gen_range(0..ds.nodes.len())];
        let b = loop {
            let b = &ds.nodes[r.gen_range(0..ds.nodes.len())];
            if b.id != a.id {
                break b;
            }
        };
        let mut s = PipelineSegment::new(
            format!("NB{k:04}"),
            Polyline::new(vec![a.location, b.location]).unwrap(),
            Carrier::Hydrogen,
            Category::Transmission,
            Status::NewBuild,
        );
        s.commission_year = Some(years[r.gen_range(0..years.len())]);
        plan.new_builds.push(s);
    }
    plan
}

/// Effective carriers of the hand-authored looped-node replica, enumerated by
/// hand: segment P stays natural gas, R1 switches in 2027, R2 in 2040.
pub fn loop_truth(year: i32) -> [(&'static str, Carrier); 3] {
    use Carrier::{Hydrogen as H, NaturalGas as G};
    match year {
        y if y < 2027 => [("P", G), ("R1", G), ("R2", G)],
        y if y < 2040 => [("P", G), ("R1", H), ("R2", G)],
        _ => [("P", G), ("R1", H), ("R2", H)],
    }
}

/// Short pipes of the replica expected active in `year`.
pub fn loop_active_pipes(year: i32) -> Vec<&'static str> {
    let mut v = Vec::new();
    if year >= 2040 {
        v.push("S1");
    }
    if year < 2027 {
        v.push("S2");
    }
    if year < 2040 {
        v.push("S3");
    }
    v
}

/// Local equirectangular projection in metres around `origin`.
pub fn project(origin: GeoPoint, p: GeoPoint) -> (f64, f64) {
    let r = 6_371_008.8;
    let k = origin.lat.to_radians().cos();
    (
        r * (p.lon - origin.lon).to_radians() * k,
        r * (p.lat - origin.lat).to_radians(),
    )
}

fn planar_point_segment(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0)
    };
    let (qx, qy) = (a.0 + t * dx, a.1 + t * dy);
    ((p.0 - qx).powi(2) + (p.1 - qy).powi(2)).sqrt()
}

/// Brute-force overlap: the target is walked in steps of `step_m` along its
/// projected length; returns (overlap km, mean distance m of the hits).
pub fn planar_overlap(target: &Polyline, candidate: &Polyline, buffer_m: f64, step_m: f64) -> (f64, f64) {
    let origin = target.first();
    let t: Vec<_> = target.points().iter().map(|&p| project(origin, p)).collect();
    let c: Vec<_> = candidate.points().iter().map(|&p| project(origin, p)).collect();
    let mut total = 0usize;
    let mut hits = 0usize;
    let mut dist_sum = 0.0;
    let mut length = 0.0;
    for w in t.windows(2) {
        let len = ((w[1].0 - w[0].0).powi(2) + (w[1].1 - w[0].1).powi(2)).sqrt();
        length += len;
        let n = (len / step_m).ceil().max(1.0) as usize;
        for i in 0..n {
            let f = i as f64 / n as f64;
            let p = (w[0].0 + f * (w[1].0 - w[0].0), w[0].1 + f * (w[1].1 - w[0].1));
            let d = c
                .windows(2)
                .map(|s| planar_point_segment(p, s[0], s[1]))
                .fold(f64::INFINITY, f64::min);
            total += 1;
            if d <= buffer_m {
                hits += 1;
                dist_sum += d;
            }
        }
    }
    let mean = if hits > 0 { dist_sum / hits as f64 } else { 0.0 };
    (hits as f64 / total as f64 * length / 1000.0, mean)
}

/// Offsets a polyline northwards by `metres`.
pub fn shifted(line: &Polyline, metres: f64) -> Polyline {
    let dlat = (metres / 6_371_008.8).to_degrees();
    Polyline::new(line.points().iter().map(|p| pt(p.lon, p.lat + dlat)).collect()).unwrap()
}
