mod common;

use common::{fixture, planar_overlap, pt, shifted};
use gasgraph::geodata::load_dataset;
use gasgraph::matcher::{
    assign_attributes, load_reference, match_all, match_segment, overlap_length, AttrField, AttributePayload, FieldMap,
    ReferenceFeature,
};
use gasgraph::{AttrSource, Carrier, Category, NetworkDataset, PipelineSegment, Polyline, Status};
use proptest::prelude::*;

const LAT: f64 = 47.0;

fn km_to_lon(km: f64) -> f64 {
    km / (111.19508 * LAT.to_radians().cos())
}

/// Straight east-running line at `LAT` from `start_km` to `end_km`.
fn east(start_km: f64, end_km: f64) -> Polyline {
    let n = ((end_km - start_km).ceil() as usize).max(1);
    let pts = (0..=n)
        .map(|i| {
            pt(
                15.0 + km_to_lon(start_km + (end_km - start_km) * i as f64 / n as f64),
                LAT,
            )
        })
        .collect();
    Polyline::new(pts).unwrap()
}

fn target(id: &str, line: Polyline) -> PipelineSegment {
    PipelineSegment::new(id, line, Carrier::NaturalGas, Category::Transmission, Status::Existing)
}

fn reference(id: &str, line: Polyline, diameter: f64) -> ReferenceFeature {
    ReferenceFeature {
        id: id.into(),
        geometry: line,
        attributes: AttributePayload {
            name: Some(format!("pipe {id}")),
            diameter_min_mm: Some(diameter),
            diameter_max_mm: Some(diameter),
            ..Default::default()
        },
    }
}

#[test]
fn identical_and_far_candidates() {
    let t = east(0.0, 4.0);
    let full = overlap_length(&t, &t, 200.0, 25.0);
    assert!((full - t.length_km()).abs() < 1e-9);
    let far = shifted(&t, 5_000.0);
    assert_eq!(overlap_length(&t, &far, 200.0, 25.0), 0.0);
}

#[test]
fn half_covered_target() {
    let t = east(0.0, 4.0);
    let c = shifted(&east(-1.0, 2.0), 100.0);
    let got = overlap_length(&t, &c, 200.0, 25.0);
    let (oracle, _) = planar_overlap(&t, &c, 200.0, 1.0);
    // The buffer reaches past the candidate's end by sqrt(200² - 100²) m.
    let expected = 2.0 + (200f64.powi(2) - 100f64.powi(2)).sqrt() / 1000.0;
    assert!((oracle - expected).abs() < 0.01, "oracle {oracle} vs {expected}");
    assert!((got - oracle).abs() <= 2.0 * 0.025, "{got} vs {oracle}");
}

#[test]
fn longer_overlap_wins() {
    let t = target("t", east(0.0, 4.0));
    let refs = vec![
        reference("short", shifted(&east(3.0, 4.0), 30.0), 400.0),
        reference("long", shifted(&east(0.0, 3.0), 50.0), 800.0),
    ];
    let r = match_segment(&t, &refs, 120.0, 25.0);
    let chosen = r.chosen.unwrap();
    assert_eq!(chosen.candidate_id, "long");
    let (o_long, _) = planar_overlap(&t.geometry, &refs[1].geometry, 120.0, 1.0);
    let (o_short, _) = planar_overlap(&t.geometry, &refs[0].geometry, 120.0, 1.0);
    assert!(o_long > o_short);
    assert!((chosen.overlap_length_km - o_long).abs() <= 0.02 * o_long);
}

#[test]
fn tie_goes_to_nearer_candidate() {
    let t = target("t", east(0.0, 4.0));
    let refs = vec![
        reference("a-far", shifted(&east(-0.5, 4.5), 80.0), 400.0),
        reference("z-near", shifted(&east(-0.5, 4.5), -20.0), 800.0),
    ];
    let r = match_segment(&t, &refs, 200.0, 25.0);
    assert_eq!(r.all_candidates.len(), 2);
    assert_eq!(
        r.all_candidates[0].overlap_length_km,
        r.all_candidates[1].overlap_length_km
    );
    assert_eq!(r.chosen.unwrap().candidate_id, "z-near");
    let (_, near) = planar_overlap(&t.geometry, &refs[1].geometry, 200.0, 1.0);
    assert!((r.all_candidates[0].mean_distance_m - near).abs() < 0.5);
}

#[test]
fn empty_reference_and_unmatched_target() {
    let t = target("t", east(0.0, 2.0));
    let r = match_segment(&t, &[], 200.0, 25.0);
    assert!(r.chosen.is_none());
    let ds = NetworkDataset {
        segments: vec![t.clone()],
        ..Default::default()
    };
    let out = assign_attributes(&ds, &[r], &[], &AttrField::ALL).unwrap();
    assert_eq!(out.dataset.segments[0], t);
}

#[test]
fn manual_diameter_is_kept() {
    let mut t = target("t", east(0.0, 2.0));
    t.diameter_min_mm = Some(500.0);
    t.diameter_max_mm = Some(500.0);
    t.attr_source = AttrSource::Manual;
    let refs = vec![reference("r", shifted(&east(0.0, 2.0), 10.0), 900.0)];
    let ds = NetworkDataset {
        segments: vec![t],
        ..Default::default()
    };
    let results = match_all(&ds, &refs, 200.0, 25.0, |_| true);
    let out = assign_attributes(&ds, &results, &refs, &AttrField::ALL).unwrap();
    let s = &out.dataset.segments[0];
    assert_eq!(s.diameter_min_mm, Some(500.0));
    assert_eq!(s.name.as_deref(), Some("pipe r"));
    assert_eq!(s.attr_source, AttrSource::Manual);
    assert_eq!(out.results[0].copied_fields, vec![AttrField::Name]);
}

/// Five targets, three reference pipes; the oracle picks the maximum 1 m
/// planar overlap for each target.
#[test]
fn assignments_equal_oracle_mapping() {
    let targets = vec![
        target("t1", east(0.0, 3.0)),
        target("t2", east(3.0, 6.0)),
        target("t3", shifted(&east(0.0, 6.0), 2_000.0)),
        target("t4", east(6.0, 9.0)),
        target("t5", shifted(&east(20.0, 22.0), -3_000.0)),
    ];
    let refs = vec![
        reference("A", shifted(&east(-0.2, 4.0), 60.0), 600.0),
        reference("B", shifted(&east(2.5, 8.0), -40.0), 700.0),
        reference("C", shifted(&east(0.0, 6.0), 1_950.0), 300.0),
    ];
    let ds = NetworkDataset {
        segments: targets.clone(),
        ..Default::default()
    };
    let results = match_all(&ds, &refs, 200.0, 25.0, |_| true);
    for (t, r) in targets.iter().zip(&results) {
        assert_eq!(t.id, r.target_id);
        let best = refs
            .iter()
            .map(|c| (planar_overlap(&t.geometry, &c.geometry, 200.0, 1.0).0, &c.id))
            .filter(|(o, _)| *o > 0.0)
            .max_by(|a, b| a.0.total_cmp(&b.0));
        assert_eq!(
            r.chosen.as_ref().map(|c| &c.candidate_id),
            best.map(|b| b.1),
            "target {}",
            t.id
        );
    }
    let out = assign_attributes(&ds, &results, &refs, &AttrField::ALL).unwrap();
    let diam: Vec<_> = out.dataset.segments.iter().map(|s| s.diameter_min_mm).collect();
    assert_eq!(diam, vec![Some(600.0), Some(700.0), Some(300.0), Some(700.0), None]);
}

#[test]
fn reference_fixture_with_field_map() {
    let map = FieldMap::read(&fixture("field_map.txt")).unwrap();
    let refs = load_reference(&fixture("reference.geojson"), &map).unwrap();
    assert_eq!(refs.len(), 3);
    assert_eq!(refs[0].attributes.diameter_max_mm, Some(800.0));
    assert_eq!(refs[1].attributes.pressure_max_bar, Some(64.0));

    let ds = load_dataset(fixture("loop_base.geojson")).unwrap();
    let results = match_all(&ds, &refs, 200.0, 25.0, |s| s.id == "P");
    assert_eq!(results.len(), 1);
    assert_eq!(results[0].chosen.as_ref().unwrap().candidate_id, "ref-west");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn overlap_monotone_in_buffer(offset in -400.0..400.0f64, start in -2.0..2.0f64, b1 in 10.0..300.0f64, extra in 0.0..300.0f64) {
        let t = east(0.0, 3.0);
        let c = shifted(&east(start, start + 2.0), offset);
        let small = overlap_length(&t, &c, b1, 25.0);
        let large = overlap_length(&t, &c, b1 + extra, 25.0);
        prop_assert!(small <= large + 1e-12);
        prop_assert!(large <= t.length_km() + 1e-12);
    }
}
