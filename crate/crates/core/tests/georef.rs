mod common;

use common::{fixture, pt, rng};
use gasgraph::geodata::load_dataset;
use gasgraph::georef::{
    apply_transform, estimate_affine, georeference_trace, read_control_points, AffineTransform, ControlPointPair,
};
use gasgraph::topology::snap_and_build;
use nalgebra::{DMatrix, DVector};
use rand::Rng;

/// Least squares for all six coefficients at once via the normal equations
/// of the stacked 2n×6 design matrix.
fn oracle(pairs: &[ControlPointPair]) -> [f64; 6] {
    let n = pairs.len();
    let mut a = DMatrix::<f64>::zeros(2 * n, 6);
    let mut b = DVector::<f64>::zeros(2 * n);
    for (i, p) in pairs.iter().enumerate() {
        let [x, y] = p.image_xy;
        a.row_mut(2 * i).copy_from_slice(&[x, y, 1.0, 0.0, 0.0, 0.0]);
        a.row_mut(2 * i + 1).copy_from_slice(&[0.0, 0.0, 0.0, x, y, 1.0]);
        b[2 * i] = p.geo.lon;
        b[2 * i + 1] = p.geo.lat;
    }
    let sol = (a.transpose() * &a)
        .lu()
        .solve(&(a.transpose() * b))
        .expect("regular system");
    [sol[0], sol[1], sol[2], sol[3], sol[4], sol[5]]
}

fn random_transform(r: &mut impl Rng) -> AffineTransform {
    loop {
        let t = AffineTransform {
            a: r.gen_range(-2e-3..2e-3),
            b: r.gen_range(-2e-3..2e-3),
            c: r.gen_range(5.0..20.0),
            d: r.gen_range(-2e-3..2e-3),
            e: r.gen_range(-2e-3..2e-3),
            f: r.gen_range(45.0..50.0),
        };
        if t.determinant().abs() > 1e-7 {
            return t;
        }
    }
}

fn pairs_from(t: &AffineTransform, pixels: &[[f64; 2]]) -> Vec<ControlPointPair> {
    pixels
        .iter()
        .map(|&xy| {
            let [lon, lat] = t.map(xy);
            ControlPointPair {
                image_xy: xy,
                geo: pt(lon, lat),
            }
        })
        .collect()
}

#[test]
fn three_points_match_oracle() {
    let mut r = rng(11);
    for _ in 0..20 {
        let t = random_transform(&mut r);
        let px: Vec<[f64; 2]> = vec![[10.0, 20.0], [900.0, 60.0], [300.0, 700.0]];
        let pairs = pairs_from(&t, &px);
        let fit = estimate_affine(&pairs).unwrap();
        let o = oracle(&pairs);
        let got = fit.transform;
        for (g, w) in [got.a, got.b, got.c, got.d, got.e, got.f].into_iter().zip(o) {
            assert!((g - w).abs() <= 1e-9 * w.abs().max(1e-3), "{g} vs {w}");
        }
        assert!(fit.max_residual_m() < 1e-6);
    }
}

#[test]
fn noisy_pair_has_largest_residual() {
    let mut r = rng(12);
    let t = random_transform(&mut r);
    let px: Vec<[f64; 2]> = (0..10)
        .map(|_| [r.gen_range(0.0..1000.0), r.gen_range(0.0..1000.0)])
        .collect();
    let mut pairs = pairs_from(&t, &px);
    pairs[6].geo.lon += 0.003;
    let fit = estimate_affine(&pairs).unwrap();
    let worst = fit
        .residuals_m
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .unwrap()
        .0;
    assert_eq!(worst, 6);

    let o = oracle(&pairs);
    let got = fit.transform;
    for (g, w) in [got.a, got.b, got.c, got.d, got.e, got.f].into_iter().zip(o) {
        assert!((g - w).abs() <= 1e-8 * w.abs().max(1e-3), "{g} vs {w}");
    }
}

#[test]
fn inverse_recovers_vertices() {
    let mut r = rng(13);
    for _ in 0..50 {
        let t = random_transform(&mut r);
        let inv = t.inverse().unwrap();
        let px: Vec<[f64; 2]> = (0..5)
            .map(|_| [r.gen_range(0.0..2000.0), r.gen_range(0.0..2000.0)])
            .collect();
        let line = apply_transform(&t, &px).unwrap();
        for (p, xy) in line.points().iter().zip(&px) {
            let [x, y] = inv.map([p.lon, p.lat]);
            let fwd = t.map([x, y]);
            assert!((fwd[0] - p.lon).abs() < 1e-9 && (fwd[1] - p.lat).abs() < 1e-9);
            assert!((x - xy[0]).abs() < 1e-6 && (y - xy[1]).abs() < 1e-6);
        }
    }
}

#[test]
fn trace_fixture_lands_on_network() {
    let pairs = read_control_points(&fixture("control_points.txt")).unwrap();
    let fit = estimate_affine(&pairs).unwrap();
    assert!(fit.max_residual_m() < 1e-6);
    let traced = georeference_trace(&fixture("trace.geojson"), &fit.transform).unwrap();
    assert_eq!(traced.segments.len(), 2);
    let first = traced.segment("L1-west").unwrap().geometry.first();
    assert!((first.lon - 15.0).abs() < 1e-12 && (first.lat - 47.0).abs() < 1e-12);

    let base = load_dataset(fixture("loop_base.geojson")).unwrap();
    let merged = gasgraph::georef::merge_traced(&base, traced).unwrap();
    let (snapped, _) = snap_and_build(&merged, 100.0).unwrap();
    assert_eq!(snapped.segment("L1-west").unwrap().from_node.as_deref(), Some("A"));
}
