mod common;

use common::{fixture, pt, synthetic_network, vector_distance_km};
use gasgraph::geodata::load_dataset;
use gasgraph::topology::{classify_l1_segments, connected_components, snap_and_build, Graph, L1Class};
use gasgraph::{Carrier, Category, NetworkDataset, NetworkNode, NodeCarrier, PipelineSegment, Polyline, Status};
use proptest::prelude::*;

fn loose(id: &str, a: (f64, f64), b: (f64, f64)) -> PipelineSegment {
    PipelineSegment::new(
        id,
        Polyline::new(vec![pt(a.0, a.1), pt(b.0, b.1)]).unwrap(),
        Carrier::NaturalGas,
        Category::Transmission,
        Status::Existing,
    )
}

#[test]
fn forty_metres_apart() {
    // 40 m east of (16.0, 48.0)
    let dlon = 0.040 / (111.19508 * 48f64.to_radians().cos());
    let gap_km = vector_distance_km(pt(16.0, 48.0), pt(16.0 + dlon, 48.0));
    assert!((gap_km - 0.040).abs() < 1e-4);

    let mut ds = NetworkDataset::default();
    ds.nodes
        .push(NetworkNode::junction("K", pt(16.0, 48.0), NodeCarrier::NaturalGas));
    ds.segments.push(loose("a", (15.9, 48.0), (16.0, 48.0)));
    ds.segments.push(loose("b", (16.0 + dlon, 48.0), (16.1, 48.0)));

    let (merged, g) = snap_and_build(&ds, 100.0).unwrap();
    assert_eq!(merged.segment("b").unwrap().from_node.as_deref(), Some("K"));
    assert_eq!(merged.node("K").unwrap().location, pt(16.0, 48.0));
    assert_eq!(g.degree("K"), 2);
    assert_eq!(connected_components(&g, |_| true).len(), 1);

    let (apart, g) = snap_and_build(&ds, 10.0).unwrap();
    assert_ne!(apart.segment("b").unwrap().from_node.as_deref(), Some("K"));
    assert_eq!(connected_components(&g, |_| true).len(), 2);
}

#[test]
fn looped_replica_is_connected() {
    let ds = load_dataset(fixture("loop_transitioned.geojson")).unwrap();
    let g = Graph::from_dataset(&ds).unwrap();
    let comps = connected_components(&g, |_| true);
    assert_eq!(comps.len(), 1);
    assert_eq!(comps[0].len(), ds.nodes.len());
}

#[test]
fn l1_positions() {
    let mut ds = NetworkDataset::default();
    for (id, lon) in [("a", 15.0), ("b", 15.1), ("c", 15.2), ("d", 15.3)] {
        ds.nodes
            .push(NetworkNode::junction(id, pt(lon, 47.0), NodeCarrier::NaturalGas));
    }
    let seg = |id: &str, from: &str, to: &str, cat| {
        let (fa, ta) = (ds.node(from).unwrap().location, ds.node(to).unwrap().location);
        PipelineSegment::new(
            id,
            Polyline::new(vec![fa, ta]).unwrap(),
            Carrier::NaturalGas,
            cat,
            Status::Existing,
        )
        .with_nodes(from, to)
    };
    let segs = vec![
        seg("T", "a", "b", Category::Transmission),
        seg("L1a", "b", "c", Category::DistributionL1),
        seg("L1b", "c", "d", Category::DistributionL1),
    ];
    ds.segments = segs;
    let g = Graph::from_dataset(&ds).unwrap();
    let c = classify_l1_segments(&g, &ds);
    assert_eq!(c["L1a"], L1Class::TransmissionConnected);
    assert_eq!(c["L1b"], L1Class::Downstream);

    ds.segments.truncate(1);
    let g = Graph::from_dataset(&ds).unwrap();
    assert!(classify_l1_segments(&g, &ds).is_empty());
}

#[test]
fn synthetic_network_builds_one_component() {
    let ds = synthetic_network(3, 12, 10, 160);
    let g = Graph::from_dataset(&ds).unwrap();
    assert_eq!(connected_components(&g, |_| true).len(), 1);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn snapping_is_idempotent_and_keeps_geometry(
        ends in prop::collection::vec(((15.0..15.05f64, 47.0..47.05f64), (15.0..15.05f64, 47.0..47.05f64)), 1..12),
        tol in 1.0..400.0f64,
    ) {
        let mut ds = NetworkDataset::default();
        for (i, (a, b)) in ends.iter().enumerate() {
            prop_assume!(a != b);
            ds.segments.push(loose(&format!("s{i}"), *a, *b));
        }
        let once = match snap_and_build(&ds, tol) {
            Ok((d, _)) => d,
            // Ambiguous clusters are a legitimate refusal.
            Err(gasgraph::Error::AmbiguousSnap { .. }) => return Ok(()),
            Err(e) => return Err(TestCaseError::fail(e.to_string())),
        };
        let (twice, _) = snap_and_build(&once, tol).unwrap();
        prop_assert_eq!(&once, &twice);
        for (s, o) in ds.segments.iter().zip(&once.segments) {
            prop_assert_eq!(&s.geometry, &o.geometry);
            let from = once.node(o.from_node.as_deref().unwrap()).unwrap();
            prop_assert!(vector_distance_km(from.location, s.geometry.first()) * 1000.0 <= tol + 1e-6);
        }
    }
}
