//! Attribute enrichment by buffer-based conflation against reference
//! pipeline datasets.
//!
//! Overlap is measured on the target: the target is resampled every
//! `step_m` metres (original vertices included) and the share of samples
//! lying within `buffer_m` of a candidate, times the target length, is the
//! overlap length. The candidate with the largest overlap wins; ties go to
//! the smaller mean distance, then to the smaller candidate id.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::geodata::geo::{lerp, metres_per_degree, point_to_chord_m};
use crate::geodata::{haversine_m, io, AttrSource, GeoPoint, NetworkDataset, PipelineSegment, Polyline};
use crate::textfile;

pub const DEFAULT_BUFFER_M: f64 = 200.0;
pub const DEFAULT_STEP_M: f64 = 25.0;

/// Segment attributes that matching may fill.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AttrField {
    Name,
    DiameterMinMm,
    DiameterMaxMm,
    PressureMinBar,
    PressureMaxBar,
}

impl AttrField {
    pub const ALL: [AttrField; 5] = [
        AttrField::Name,
        AttrField::DiameterMinMm,
        AttrField::DiameterMaxMm,
        AttrField::PressureMinBar,
        AttrField::PressureMaxBar,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AttrField::Name => "name",
            AttrField::DiameterMinMm => "diameter_min_mm",
            AttrField::DiameterMaxMm => "diameter_max_mm",
            AttrField::PressureMinBar => "pressure_min_bar",
            AttrField::PressureMaxBar => "pressure_max_bar",
        }
    }
}

impl fmt::Display for AttrField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AttrField {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AttrField::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| Error::UnknownField(s.to_string()))
    }
}

pub fn parse_fields<S: AsRef<str>>(names: &[S]) -> Result<Vec<AttrField>> {
    names.iter().map(|n| n.as_ref().parse()).collect()
}

/// Attribute values carried by a reference feature after field mapping.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AttributePayload {
    pub name: Option<String>,
    pub diameter_min_mm: Option<f64>,
    pub diameter_max_mm: Option<f64>,
    pub pressure_min_bar: Option<f64>,
    pub pressure_max_bar: Option<f64>,
}

impl AttributePayload {
    fn number(&self, field: AttrField) -> Option<f64> {
        match field {
            AttrField::Name => None,
            AttrField::DiameterMinMm => self.diameter_min_mm,
            AttrField::DiameterMaxMm => self.diameter_max_mm,
            AttrField::PressureMinBar => self.pressure_min_bar,
            AttrField::PressureMaxBar => self.pressure_max_bar,
        }
    }

    fn set_number(&mut self, field: AttrField, v: f64) {
        match field {
            AttrField::Name => {}
            AttrField::DiameterMinMm => self.diameter_min_mm = Some(v),
            AttrField::DiameterMaxMm => self.diameter_max_mm = Some(v),
            AttrField::PressureMinBar => self.pressure_min_bar = Some(v),
            AttrField::PressureMaxBar => self.pressure_max_bar = Some(v),
        }
    }
}

/// Maps reference property names onto segment fields. One source property
/// may feed several fields (e.g. a single diameter into min and max).
#[derive(Debug, Clone)]
pub struct FieldMap {
    entries: Vec<(String, AttrField)>,
}

impl Default for FieldMap {
    fn default() -> Self {
        FieldMap {
            entries: AttrField::ALL.iter().map(|f| (f.as_str().to_string(), *f)).collect(),
        }
    }
}

impl FieldMap {
    pub fn new(entries: Vec<(String, AttrField)>) -> Self {
        FieldMap { entries }
    }

    /// Parses `source_property target_field` lines.
    pub fn parse(path: &Path, text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for rec in textfile::parse_records(text) {
            if rec.fields.len() != 2 {
                return Err(textfile::parse_error(
                    path,
                    rec.line,
                    "expected `source_property target_field`",
                ));
            }
            entries.push((rec.fields[0].clone(), rec.fields[1].parse()?));
        }
        Ok(FieldMap { entries })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(path, &text)
    }

    pub fn extract(&self, props: &Map<String, Value>) -> AttributePayload {
        let mut out = AttributePayload::default();
        for (source, target) in &self.entries {
            let Some(value) = props.get(source) else { continue };
            if *target == AttrField::Name {
                let name = match value {
                    Value::String(s) if !s.trim().is_empty() => Some(s.trim().to_string()),
                    Value::Number(n) => Some(n.to_string()),
                    _ => None,
                };
                if out.name.is_none() {
                    out.name = name;
                }
                continue;
            }
            let number = match value {
                Value::Number(n) => n.as_f64(),
                Value::String(s) => s.trim().parse::<f64>().ok(),
                _ => None,
            };
            if let Some(v) = number.filter(|v| v.is_finite() && *v >= 0.0) {
                if out.number(*target).is_none() {
                    out.set_number(*target, v);
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceFeature {
    pub id: String,
    pub geometry: Polyline,
    pub attributes: AttributePayload,
}

/// Loads a reference FeatureCollection of LineStrings with free-form
/// properties. Features without an `id` property are named `ref<index>`.
pub fn load_reference(path: &Path, map: &FieldMap) -> Result<Vec<ReferenceFeature>> {
    let features = io::read_feature_collection(path)?;
    features
        .into_iter()
        .enumerate()
        .map(|(i, (props, geometry))| {
            let id = match props.get("id") {
                Some(Value::String(s)) => s.clone(),
                Some(Value::Number(n)) => n.to_string(),
                _ => format!("ref{i}"),
            };
            let line = io::parse_line(&id, &geometry)?;
            Ok(ReferenceFeature {
                attributes: map.extract(&props),
                id,
                geometry: line,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatchCandidate {
    pub candidate_id: String,
    pub overlap_length_km: f64,
    pub mean_distance_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatchResult {
    pub target_id: String,
    pub chosen: Option<MatchCandidate>,
    pub all_candidates: Vec<MatchCandidate>,
    pub buffer_m: f64,
    pub copied_fields: Vec<AttrField>,
}

/// Target resampled at most `step_m` apart along each chord, original
/// vertices included.
pub fn sample_polyline(line: &Polyline, step_m: f64) -> Vec<GeoPoint> {
    let pts = line.points();
    let mut out = Vec::with_capacity(pts.len());
    for w in pts.windows(2) {
        let len = haversine_m(w[0], w[1]);
        let n = ((len / step_m).ceil() as usize).max(1);
        out.extend((0..n).map(|k| lerp(w[0], w[1], k as f64 / n as f64)));
    }
    out.push(line.last());
    out
}

#[derive(Debug, Clone, Copy)]
struct BBox {
    min_lon: f64,
    max_lon: f64,
    min_lat: f64,
    max_lat: f64,
}

impl BBox {
    fn around(line: &Polyline, margin_m: f64) -> BBox {
        let pts = line.points();
        let mut b = BBox {
            min_lon: f64::INFINITY,
            max_lon: f64::NEG_INFINITY,
            min_lat: f64::INFINITY,
            max_lat: f64::NEG_INFINITY,
        };
        for p in pts {
            b.min_lon = b.min_lon.min(p.lon);
            b.max_lon = b.max_lon.max(p.lon);
            b.min_lat = b.min_lat.min(p.lat);
            b.max_lat = b.max_lat.max(p.lat);
        }
        // Margin slightly generous: great-circle chords bow poleward of
        // their endpoint box.
        let dlat = 1.1 * margin_m / metres_per_degree() + 1e-6;
        let coslat = b.min_lat.abs().max(b.max_lat.abs()).min(89.0).to_radians().cos();
        let dlon = dlat / coslat;
        b.min_lon -= dlon;
        b.max_lon += dlon;
        b.min_lat -= dlat;
        b.max_lat += dlat;
        b
    }

    fn contains(&self, p: GeoPoint) -> bool {
        p.lon >= self.min_lon && p.lon <= self.max_lon && p.lat >= self.min_lat && p.lat <= self.max_lat
    }

    fn intersects(&self, o: &BBox) -> bool {
        self.min_lon <= o.max_lon && o.min_lon <= self.max_lon && self.min_lat <= o.max_lat && o.min_lat <= self.max_lat
    }
}

/// Overlap of pre-sampled target points with one candidate: (overlap km,
/// mean distance of in-buffer samples in metres).
fn overlap_of_samples(
    samples: &[GeoPoint],
    target_km: f64,
    candidate: &Polyline,
    reach: &BBox,
    buffer_m: f64,
) -> (f64, f64) {
    let chords = candidate.points();
    let mut hits = 0usize;
    let mut dist_sum = 0.0;
    for &p in samples {
        if !reach.contains(p) {
            continue;
        }
        let d = chords
            .windows(2)
            .map(|w| point_to_chord_m(p, w[0], w[1]))
            .fold(f64::INFINITY, f64::min);
        if d <= buffer_m {
            hits += 1;
            dist_sum += d;
        }
    }
    if hits == 0 {
        return (0.0, f64::INFINITY);
    }
    let fraction = hits as f64 / samples.len() as f64;
    (fraction * target_km, dist_sum / hits as f64)
}

/// Length in km of `target` lying within `buffer_m` of `candidate`,
/// estimated by sampling the target every `step_m` metres.
///
/// Both `buffer_m` and `step_m` must be positive.
pub fn overlap_length(target: &Polyline, candidate: &Polyline, buffer_m: f64, step_m: f64) -> f64 {
    assert!(buffer_m > 0.0 && step_m > 0.0, "buffer and step must be positive");
    let samples = sample_polyline(target, step_m);
    let reach = BBox::around(candidate, buffer_m);
    overlap_of_samples(&samples, target.length_km(), candidate, &reach, buffer_m).0
}

fn rank(a: &MatchCandidate, b: &MatchCandidate) -> Ordering {
    b.overlap_length_km
        .total_cmp(&a.overlap_length_km)
        .then_with(|| a.mean_distance_m.total_cmp(&b.mean_distance_m))
        .then_with(|| a.candidate_id.cmp(&b.candidate_id))
}

pub fn match_segment(
    target: &PipelineSegment,
    reference: &[ReferenceFeature],
    buffer_m: f64,
    step_m: f64,
) -> MatchResult {
    assert!(buffer_m > 0.0 && step_m > 0.0, "buffer and step must be positive");
    let samples = sample_polyline(&target.geometry, step_m);
    let target_box = BBox::around(&target.geometry, 0.0);
    let target_km = target.geometry.length_km();
    let mut all_candidates: Vec<MatchCandidate> = reference
        .iter()
        .filter_map(|r| {
            let reach = BBox::around(&r.geometry, buffer_m);
            if !reach.intersects(&target_box) {
                return None;
            }
            let (overlap, mean) = overlap_of_samples(&samples, target_km, &r.geometry, &reach, buffer_m);
            (overlap > 0.0).then(|| MatchCandidate {
                candidate_id: r.id.clone(),
                overlap_length_km: overlap,
                mean_distance_m: mean,
            })
        })
        .collect();
    all_candidates.sort_by(rank);
    MatchResult {
        target_id: target.id.clone(),
        chosen: all_candidates.first().cloned(),
        all_candidates,
        buffer_m,
        copied_fields: Vec::new(),
    }
}

/// Matches every segment accepted by `filter`, in parallel; results are
/// ordered by target id.
pub fn match_all<F>(
    ds: &NetworkDataset,
    reference: &[ReferenceFeature],
    buffer_m: f64,
    step_m: f64,
    filter: F,
) -> Vec<MatchResult>
where
    F: Fn(&PipelineSegment) -> bool + Sync,
{
    let mut results: Vec<MatchResult> = ds
        .segments
        .par_iter()
        .filter(|s| filter(s))
        .map(|s| match_segment(s, reference, buffer_m, step_m))
        .collect();
    results.sort_by(|a, b| a.target_id.cmp(&b.target_id));
    results
}

#[derive(Debug, Clone)]
pub struct Assignment {
    pub dataset: NetworkDataset,
    /// Input results with `copied_fields` filled in.
    pub results: Vec<MatchResult>,
}

/// Copies `fields` from each chosen candidate onto its target.
///
/// Unset target fields are always filled. Values already present are
/// replaced only when the segment's attributes came from an earlier match
/// or from assumptions; `manual` segments keep every value they have.
/// Updates that would invert a min/max range are skipped for that pair.
pub fn assign_attributes(
    ds: &NetworkDataset,
    results: &[MatchResult],
    reference: &[ReferenceFeature],
    fields: &[AttrField],
) -> Result<Assignment> {
    let by_id: HashMap<&str, &ReferenceFeature> = reference.iter().map(|r| (r.id.as_str(), r)).collect();
    let mut out = ds.clone();
    let mut results = results.to_vec();
    let index: HashMap<String, usize> = out
        .segments
        .iter()
        .enumerate()
        .map(|(i, s)| (s.id.clone(), i))
        .collect();

    for result in results.iter_mut() {
        result.copied_fields.clear();
        let Some(chosen) = &result.chosen else { continue };
        let Some(&si) = index.get(&result.target_id) else {
            return Err(Error::UnresolvedReference {
                from: "match result".into(),
                field: "target_id".into(),
                target: result.target_id.clone(),
            });
        };
        let Some(candidate) = by_id.get(chosen.candidate_id.as_str()) else {
            return Err(Error::UnresolvedReference {
                from: result.target_id.clone(),
                field: "candidate_id".into(),
                target: chosen.candidate_id.clone(),
            });
        };
        let seg = &mut out.segments[si];
        let replace = matches!(seg.attr_source, AttrSource::Matched | AttrSource::Assumed);
        let before = seg.clone();
        let src = &candidate.attributes;
        let mut copied = Vec::new();

        for &field in fields {
            match field {
                AttrField::Name => {
                    if let Some(name) = &src.name {
                        if (seg.name.is_none() || replace) && seg.name.as_ref() != Some(name) {
                            seg.name = Some(name.clone());
                            copied.push(field);
                        }
                    }
                }
                _ => {
                    let Some(v) = src.number(field) else { continue };
                    let slot = number_slot(seg, field);
                    if (slot.is_none() || replace) && *slot != Some(v) {
                        *slot = Some(v);
                        copied.push(field);
                    }
                }
            }
        }

        for (lo, hi) in [
            (AttrField::DiameterMinMm, AttrField::DiameterMaxMm),
            (AttrField::PressureMinBar, AttrField::PressureMaxBar),
        ] {
            let (l, h) = (*number_slot(seg, lo), *number_slot(seg, hi));
            if let (Some(l), Some(h)) = (l, h) {
                if l > h {
                    *number_slot(seg, lo) = *number_slot_ref(&before, lo);
                    *number_slot(seg, hi) = *number_slot_ref(&before, hi);
                    copied.retain(|f| *f != lo && *f != hi);
                }
            }
        }

        if seg.attr_source != AttrSource::Manual {
            seg.attr_source = AttrSource::Matched;
        }
        copied.sort();
        result.copied_fields = copied;
    }
    Ok(Assignment { dataset: out, results })
}

fn number_slot(seg: &mut PipelineSegment, field: AttrField) -> &mut Option<f64> {
    match field {
        AttrField::DiameterMinMm => &mut seg.diameter_min_mm,
        AttrField::DiameterMaxMm => &mut seg.diameter_max_mm,
        AttrField::PressureMinBar => &mut seg.pressure_min_bar,
        AttrField::PressureMaxBar => &mut seg.pressure_max_bar,
        AttrField::Name => unreachable!("name is not numeric"),
    }
}

fn number_slot_ref(seg: &PipelineSegment, field: AttrField) -> &Option<f64> {
    match field {
        AttrField::DiameterMinMm => &seg.diameter_min_mm,
        AttrField::DiameterMaxMm => &seg.diameter_max_mm,
        AttrField::PressureMinBar => &seg.pressure_min_bar,
        AttrField::PressureMaxBar => &seg.pressure_max_bar,
        AttrField::Name => unreachable!("name is not numeric"),
    }
}
