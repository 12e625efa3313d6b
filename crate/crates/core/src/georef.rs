//! Affine georeferencing of traced plan images from control points.
//!
//! A control-point file lists one pair per line as `x y lon lat` (pixel
//! column, pixel row, WGS84 degrees). The fitted transform maps traced
//! pixel-space features into the dataset.

use std::path::Path;

use serde_json::Value;

use crate::error::{Error, Result};
use crate::geodata::{haversine_m, io, GeoPoint, NetworkDataset, Polyline};
use crate::textfile;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlPointPair {
    pub image_xy: [f64; 2],
    pub geo: GeoPoint,
}

/// `(lon, lat) = (a·x + b·y + c, d·x + e·y + f)`
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineTransform {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub e: f64,
    pub f: f64,
}

impl AffineTransform {
    pub const IDENTITY: AffineTransform = AffineTransform {
        a: 1.0,
        b: 0.0,
        c: 0.0,
        d: 0.0,
        e: 1.0,
        f: 0.0,
    };

    pub fn determinant(&self) -> f64 {
        self.a * self.e - self.b * self.d
    }

    pub fn is_invertible(&self) -> bool {
        let det = self.determinant();
        let scale = (self.a.abs() + self.b.abs()) * (self.d.abs() + self.e.abs());
        det.is_finite() && det != 0.0 && det.abs() > 1e-14 * scale
    }

    /// Raw coefficient application without bounds checking.
    pub fn map(&self, xy: [f64; 2]) -> [f64; 2] {
        [
            self.a * xy[0] + self.b * xy[1] + self.c,
            self.d * xy[0] + self.e * xy[1] + self.f,
        ]
    }

    pub fn inverse(&self) -> Result<AffineTransform> {
        if !self.is_invertible() {
            return Err(Error::SingularTransform);
        }
        let det = self.determinant();
        let (a, b, d, e) = (self.e / det, -self.b / det, -self.d / det, self.a / det);
        Ok(AffineTransform {
            a,
            b,
            c: -(a * self.c + b * self.f),
            d,
            e,
            f: -(d * self.c + e * self.f),
        })
    }

    fn apply_point(&self, index: usize, xy: [f64; 2]) -> Result<GeoPoint> {
        let [lon, lat] = self.map(xy);
        let p = GeoPoint { lon, lat };
        if p.is_valid() {
            Ok(p)
        } else {
            Err(Error::OutOfBounds { index, lon, lat })
        }
    }
}

/// Fitted transform with the per-pair geographic misfit in metres, in input
/// order.
#[derive(Debug, Clone)]
pub struct AffineFit {
    pub transform: AffineTransform,
    pub residuals_m: Vec<f64>,
}

impl AffineFit {
    pub fn max_residual_m(&self) -> f64 {
        self.residuals_m.iter().copied().fold(0.0, f64::max)
    }

    pub fn rms_residual_m(&self) -> f64 {
        if self.residuals_m.is_empty() {
            return 0.0;
        }
        let ss: f64 = self.residuals_m.iter().map(|r| r * r).sum();
        (ss / self.residuals_m.len() as f64).sqrt()
    }
}

/// Least-squares affine fit minimising squared coordinate residuals.
///
/// Image coordinates are centred before forming the normal equations, which
/// decouples the translation terms and leaves one shared 2×2 system for the
/// lon and lat rows.
pub fn estimate_affine(pairs: &[ControlPointPair]) -> Result<AffineFit> {
    if pairs.len() < 3 {
        return Err(Error::TooFewControlPoints(pairs.len()));
    }
    let n = pairs.len() as f64;
    let mean = |f: &dyn Fn(&ControlPointPair) -> f64| pairs.iter().map(f).sum::<f64>() / n;
    let (mx, my) = (mean(&|p| p.image_xy[0]), mean(&|p| p.image_xy[1]));
    let (mlon, mlat) = (mean(&|p| p.geo.lon), mean(&|p| p.geo.lat));

    let (mut suu, mut suv, mut svv) = (0.0, 0.0, 0.0);
    let (mut su_lon, mut sv_lon, mut su_lat, mut sv_lat) = (0.0, 0.0, 0.0, 0.0);
    for p in pairs {
        let (u, v) = (p.image_xy[0] - mx, p.image_xy[1] - my);
        let (glon, glat) = (p.geo.lon - mlon, p.geo.lat - mlat);
        suu += u * u;
        suv += u * v;
        svv += v * v;
        su_lon += u * glon;
        sv_lon += v * glon;
        su_lat += u * glat;
        sv_lat += v * glat;
    }
    if !(suu.is_finite() && svv.is_finite() && suv.is_finite()) {
        return Err(Error::CollinearControlPoints);
    }
    let det = suu * svv - suv * suv;
    // Relative to the spread of the points: zero for collinear input up to
    // rounding.
    if det <= 1e-12 * suu * svv || suu == 0.0 || svv == 0.0 {
        return Err(Error::CollinearControlPoints);
    }
    let solve = |bu: f64, bv: f64| ((svv * bu - suv * bv) / det, (suu * bv - suv * bu) / det);
    let (a, b) = solve(su_lon, sv_lon);
    let (d, e) = solve(su_lat, sv_lat);
    let transform = AffineTransform {
        a,
        b,
        c: mlon - a * mx - b * my,
        d,
        e,
        f: mlat - d * mx - e * my,
    };
    let residuals_m = pairs
        .iter()
        .map(|p| {
            let [lon, lat] = transform.map(p.image_xy);
            haversine_m(GeoPoint { lon, lat }, p.geo)
        })
        .collect();
    Ok(AffineFit { transform, residuals_m })
}

/// Maps a pixel-space polyline to geographic coordinates vertex by vertex.
pub fn apply_transform(transform: &AffineTransform, pixels: &[[f64; 2]]) -> Result<Polyline> {
    if !transform.is_invertible() {
        return Err(Error::SingularTransform);
    }
    let pts = pixels
        .iter()
        .enumerate()
        .map(|(i, xy)| transform.apply_point(i, *xy))
        .collect::<Result<Vec<_>>>()?;
    Polyline::new(pts)
}

pub fn parse_control_points(path: &Path, text: &str) -> Result<Vec<ControlPointPair>> {
    textfile::parse_records(text)
        .iter()
        .map(|rec| {
            if rec.fields.len() != 4 {
                return Err(textfile::parse_error(
                    path,
                    rec.line,
                    format!("expected 4 fields `x y lon lat`, found {}", rec.fields.len()),
                ));
            }
            let v = |i| textfile::number(path, rec, i);
            let geo = GeoPoint { lon: v(2)?, lat: v(3)? };
            if !geo.is_valid() {
                return Err(textfile::parse_error(path, rec.line, "lon/lat outside WGS84 bounds"));
            }
            Ok(ControlPointPair {
                image_xy: [v(0)?, v(1)?],
                geo,
            })
        })
        .collect()
}

pub fn read_control_points(path: &Path) -> Result<Vec<ControlPointPair>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_control_points(path, &text)
}

/// Reads a traced layer file (dataset schema, pixel coordinates) and maps
/// every geometry through `transform`.
pub fn georeference_trace(path: &Path, transform: &AffineTransform) -> Result<NetworkDataset> {
    if !transform.is_invertible() {
        return Err(Error::SingularTransform);
    }
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let value: Value = serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    io::features_to_dataset(value, &|i, xy| transform.apply_point(i, xy))
}

/// Appends traced features to `base`, rejecting id clashes.
pub fn merge_traced(base: &NetworkDataset, traced: NetworkDataset) -> Result<NetworkDataset> {
    let mut out = base.clone();
    out.nodes.extend(traced.nodes);
    out.segments.extend(traced.segments);
    out.short_pipes.extend(traced.short_pipes);
    out.facilities.extend(traced.facilities);
    out.demand_points.extend(traced.demand_points);
    out.validate()?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(x: f64, y: f64, t: &AffineTransform) -> ControlPointPair {
        let [lon, lat] = t.map([x, y]);
        ControlPointPair {
            image_xy: [x, y],
            geo: GeoPoint { lon, lat },
        }
    }

    #[test]
    fn identity_pairs() {
        let t = AffineTransform::IDENTITY;
        let pairs: Vec<_> = [(1.0, 2.0), (10.0, 3.0), (4.0, 20.0), (7.0, 7.0)]
            .iter()
            .map(|&(x, y)| pair(x, y, &t))
            .collect();
        let fit = estimate_affine(&pairs).unwrap();
        let c = fit.transform;
        for (got, want) in [(c.a, 1.0), (c.b, 0.0), (c.c, 0.0), (c.d, 0.0), (c.e, 1.0), (c.f, 0.0)] {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
        assert!(fit.max_residual_m() < 1e-6);
    }

    #[test]
    fn too_few_and_collinear() {
        let t = AffineTransform::IDENTITY;
        assert!(matches!(
            estimate_affine(&[pair(0.0, 0.0, &t), pair(1.0, 1.0, &t)]),
            Err(Error::TooFewControlPoints(2))
        ));
        let line: Vec<_> = (0..5).map(|i| pair(i as f64, 2.0 * i as f64, &t)).collect();
        assert!(matches!(estimate_affine(&line), Err(Error::CollinearControlPoints)));
    }

    #[test]
    fn translation() {
        let t = AffineTransform {
            c: 10.0,
            f: 5.0,
            ..AffineTransform::IDENTITY
        };
        let line = apply_transform(&t, &[[0.0, 0.0], [1.0, 1.0]]).unwrap();
        assert_eq!(line.first(), GeoPoint { lon: 10.0, lat: 5.0 });
        assert_eq!(line.points().len(), 2);
    }

    #[test]
    fn out_of_bounds_output() {
        let t = AffineTransform {
            c: 179.5,
            ..AffineTransform::IDENTITY
        };
        assert!(matches!(
            apply_transform(&t, &[[0.0, 0.0], [1.0, 0.0]]),
            Err(Error::OutOfBounds { index: 1, .. })
        ));
    }

    #[test]
    fn inverse_roundtrip() {
        let t = AffineTransform {
            a: 0.0012,
            b: -0.0003,
            c: 13.2,
            d: 0.0002,
            e: -0.0009,
            f: 48.9,
        };
        let inv = t.inverse().unwrap();
        let xy = [812.0, 344.5];
        let back = inv.map(t.map(xy));
        assert!((back[0] - xy[0]).abs() < 1e-9 && (back[1] - xy[1]).abs() < 1e-9);
    }

    #[test]
    fn control_point_file() {
        let text = "# x y lon lat\n0 0 16.0 48.0\n100,0,16.1,48.0\n0 100 16.0 47.9 # third\n";
        let pairs = parse_control_points(Path::new("cp.txt"), text).unwrap();
        assert_eq!(pairs.len(), 3);
        assert_eq!(pairs[1].image_xy, [100.0, 0.0]);
        assert!(parse_control_points(Path::new("cp.txt"), "1 2 3\n").is_err());
        assert!(parse_control_points(Path::new("cp.txt"), "1 2 3 x\n").is_err());
    }
}
