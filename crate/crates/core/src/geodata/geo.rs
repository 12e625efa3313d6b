//! Spherical geometry on the mean Earth sphere.
//!
//! All lengths are great-circle sums over straight chords between vertices,
//! which is the same approximation used when tracing pipelines from maps.

use super::{GeoPoint, Polyline};

/// IUGG mean Earth radius in kilometres.
pub const EARTH_RADIUS_KM: f64 = 6371.0088;

const EARTH_RADIUS_M: f64 = EARTH_RADIUS_KM * 1000.0;

/// Central angle between two points in radians (haversine formula).
fn central_angle(a: GeoPoint, b: GeoPoint) -> f64 {
    let (lat1, lat2) = (a.lat.to_radians(), b.lat.to_radians());
    let dlat = lat2 - lat1;
    let dlon = (b.lon - a.lon).to_radians();
    let h = (dlat / 2.0).sin().powi(2) + lat1.cos() * lat2.cos() * (dlon / 2.0).sin().powi(2);
    2.0 * h.sqrt().min(1.0).asin()
}

pub fn haversine_km(a: GeoPoint, b: GeoPoint) -> f64 {
    central_angle(a, b) * EARTH_RADIUS_KM
}

pub fn haversine_m(a: GeoPoint, b: GeoPoint) -> f64 {
    central_angle(a, b) * EARTH_RADIUS_M
}

/// Sum of haversine distances over consecutive vertices, in kilometres.
pub fn geodesic_length(line: &Polyline) -> f64 {
    line.points().windows(2).map(|w| haversine_km(w[0], w[1])).sum()
}

fn initial_bearing(a: GeoPoint, b: GeoPoint) -> f64 {
    let (lat1, lat2) = (a.lat.to_radians(), b.lat.to_radians());
    let dlon = (b.lon - a.lon).to_radians();
    let y = dlon.sin() * lat2.cos();
    let x = lat1.cos() * lat2.sin() - lat1.sin() * lat2.cos() * dlon.cos();
    y.atan2(x)
}

/// Distance in metres from `p` to the great-circle chord `a`–`b`.
///
/// Uses the cross-track distance when the foot of the perpendicular falls
/// inside the chord and the distance to the nearer endpoint otherwise.
pub fn point_to_chord_m(p: GeoPoint, a: GeoPoint, b: GeoPoint) -> f64 {
    let d_ab = central_angle(a, b);
    let d_ap = central_angle(a, p);
    if d_ab == 0.0 || d_ap == 0.0 {
        return d_ap * EARTH_RADIUS_M;
    }
    let delta = initial_bearing(a, p) - initial_bearing(a, b);
    let cross = (d_ap.sin() * delta.sin()).clamp(-1.0, 1.0).asin();
    if delta.cos() < 0.0 {
        return d_ap * EARTH_RADIUS_M;
    }
    let along = (d_ap.cos() / cross.cos()).clamp(-1.0, 1.0).acos();
    if along > d_ab {
        central_angle(b, p) * EARTH_RADIUS_M
    } else {
        cross.abs() * EARTH_RADIUS_M
    }
}

/// Minimum distance in metres from `p` to any chord of `line`.
pub fn point_to_polyline_m(p: GeoPoint, line: &Polyline) -> f64 {
    line.points()
        .windows(2)
        .map(|w| point_to_chord_m(p, w[0], w[1]))
        .fold(f64::INFINITY, f64::min)
}

/// Linear interpolation in lon/lat, adequate along a single digitised chord.
pub fn lerp(a: GeoPoint, b: GeoPoint, t: f64) -> GeoPoint {
    GeoPoint {
        lon: a.lon + (b.lon - a.lon) * t,
        lat: a.lat + (b.lat - a.lat) * t,
    }
}

/// Approximate metres per degree of latitude on the mean sphere.
pub(crate) fn metres_per_degree() -> f64 {
    EARTH_RADIUS_M.to_radians()
}
