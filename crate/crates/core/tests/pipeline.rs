mod common;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use common::fixture;
use gasgraph::pipeline::{run_pipeline, PipelineConfig};
use gasgraph::Error;

fn full_config(work: &Path) -> PipelineConfig {
    PipelineConfig {
        control_points: Some(fixture("control_points.txt")),
        trace: Some(fixture("trace.geojson")),
        reference: Some(fixture("reference.geojson")),
        field_map: Some(fixture("field_map.txt")),
        defaults: Some(fixture("defaults_override.txt")),
        plan: Some(fixture("loop_plan.json")),
        regions: Some(fixture("regions.geojson")),
        exceptions: Some(fixture("exceptions.txt")),
        ..PipelineConfig::new(fixture("loop_base.geojson"), work)
    }
}

fn tree(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.is_dir() {
            for (p, b) in tree(&path) {
                out.insert(Path::new(path.file_name().unwrap()).join(p), b);
            }
        } else {
            out.insert(PathBuf::from(path.file_name().unwrap()), fs::read(&path).unwrap());
        }
    }
    out
}

#[test]
fn full_run_and_rerun_is_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let out = run_pipeline(&full_config(a.path())).unwrap();
    assert!(out.report.passed(), "{}", out.report.to_text());
    assert_eq!(out.snapshots.len(), 6);
    assert_eq!(
        out.report.years.iter().map(|y| y.year).collect::<Vec<_>>(),
        [2026, 2027, 2034, 2035, 2039, 2040]
    );
    assert_eq!(out.dataset.short_pipes.len(), 3);
    assert!(out.dataset.segment("L1-west").is_some());
    let p = out.dataset.segment("P").unwrap();
    assert_eq!(p.diameter_max_mm, Some(800.0));
    assert!(out.export.combined_csv.is_some());
    assert_eq!(out.export.geojson.len(), 6);

    run_pipeline(&full_config(b.path())).unwrap();
    let (ta, tb) = (tree(a.path()), tree(b.path()));
    assert!(ta.contains_key(Path::new("validation.json")));
    assert!(ta.contains_key(&Path::new("export").join("nodes_2040.csv")));
    assert_eq!(ta.keys().collect::<Vec<_>>(), tb.keys().collect::<Vec<_>>());
    for (k, v) in &ta {
        assert!(v == &tb[k], "{} differs", k.display());
    }
}

#[test]
fn bad_input_fails_at_ingest() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("bad.geojson");
    fs::write(
        &input,
        r#"{"type":"FeatureCollection","features":[{"type":"Feature","geometry":{"type":"Point","coordinates":[15.0,47.0]},"properties":{"layer":"node","kind":"junction","carrier":"natural_gas"}}]}"#,
    )
    .unwrap();
    let err = run_pipeline(&PipelineConfig::new(&input, dir.path().join("work"))).unwrap_err();
    match err {
        Error::Stage { stage, source } => {
            assert_eq!(stage, "ingest");
            assert!(matches!(*source, Error::Schema { .. }), "{source}");
        }
        e => panic!("unexpected {e}"),
    }
}

#[test]
fn plan_without_trace_half_fails() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = PipelineConfig {
        control_points: Some(fixture("control_points.txt")),
        ..PipelineConfig::new(fixture("loop_base.geojson"), dir.path())
    };
    assert!(matches!(run_pipeline(&cfg), Err(Error::Stage { stage: "georef", .. })));
}
