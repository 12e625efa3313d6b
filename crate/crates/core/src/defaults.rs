//! Parameter assumptions for distribution-level pipelines without matched
//! attributes.
//!
//! | category        | position               | diameter [mm] | pressure [bar] |
//! |-----------------|------------------------|---------------|----------------|
//! | distribution_l1 | transmission_connected | 500–600       | 20–70          |
//! | distribution_l1 | downstream             | 300–400       | 20–70          |
//! | distribution_l2 | any                    | 100–200       | 6–16           |
//!
//! Precedence is per range: a diameter or pressure range is only filled when
//! both of its bounds are absent, so matched or manual values are never
//! overwritten. Transmission segments are never touched.

use std::fmt;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geodata::{AttrSource, Category, NetworkDataset};
use crate::textfile;
use crate::topology::{classify_l1_segments, Graph, L1Class};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RangeField {
    Diameter,
    Pressure,
}

impl fmt::Display for RangeField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RangeField::Diameter => "diameter",
            RangeField::Pressure => "pressure",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DefaultRule {
    pub category: Category,
    /// `None` applies to every position.
    pub class: Option<L1Class>,
    pub field: RangeField,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DefaultTable {
    rules: Vec<DefaultRule>,
}

impl Default for DefaultTable {
    fn default() -> Self {
        use Category::{DistributionL1 as L1, DistributionL2 as L2};
        use L1Class::{Downstream, TransmissionConnected};
        use RangeField::{Diameter, Pressure};
        let rule = |category, class, field, min, max| DefaultRule {
            category,
            class,
            field,
            min,
            max,
        };
        DefaultTable {
            rules: vec![
                rule(L1, Some(TransmissionConnected), Diameter, 500.0, 600.0),
                rule(L1, Some(Downstream), Diameter, 300.0, 400.0),
                rule(L1, None, Pressure, 20.0, 70.0),
                rule(L2, None, Diameter, 100.0, 200.0),
                rule(L2, None, Pressure, 6.0, 16.0),
            ],
        }
    }
}

impl DefaultTable {
    pub fn rules(&self) -> &[DefaultRule] {
        &self.rules
    }

    /// Range for a segment, preferring a rule for its exact position over a
    /// rule for any position.
    pub fn lookup(&self, category: Category, class: Option<L1Class>, field: RangeField) -> Option<(f64, f64)> {
        let matching = |want: Option<L1Class>| {
            self.rules
                .iter()
                .find(|r| r.category == category && r.field == field && r.class == want)
        };
        class
            .and_then(|c| matching(Some(c)))
            .or_else(|| matching(None))
            .map(|r| (r.min, r.max))
    }

    /// Replaces or adds rules keyed by (category, position, field).
    pub fn override_with(&mut self, rules: impl IntoIterator<Item = DefaultRule>) {
        for rule in rules {
            match self
                .rules
                .iter_mut()
                .find(|r| r.category == rule.category && r.class == rule.class && r.field == rule.field)
            {
                Some(existing) => *existing = rule,
                None => self.rules.push(rule),
            }
        }
    }

    /// Parses override rows `category position field min max`, where
    /// position is `transmission_connected`, `downstream` or `any` and field
    /// is `diameter` or `pressure`.
    pub fn parse_overrides(path: &Path, text: &str) -> Result<Vec<DefaultRule>> {
        textfile::parse_records(text)
            .iter()
            .map(|rec| {
                let bad = |msg: String| textfile::parse_error(path, rec.line, msg);
                if rec.fields.len() != 5 {
                    return Err(bad("expected `category position field min max`".into()));
                }
                let category: Category = rec.fields[0].parse().map_err(bad)?;
                if category == Category::Transmission {
                    return Err(bad("transmission segments have no default parameters".into()));
                }
                let class = match rec.fields[1].as_str() {
                    "any" => None,
                    "transmission_connected" => Some(L1Class::TransmissionConnected),
                    "downstream" => Some(L1Class::Downstream),
                    other => return Err(bad(format!("unknown position `{other}`"))),
                };
                let field = match rec.fields[2].as_str() {
                    "diameter" => RangeField::Diameter,
                    "pressure" => RangeField::Pressure,
                    other => return Err(bad(format!("unknown field `{other}`"))),
                };
                let (min, max) = (textfile::number(path, rec, 3)?, textfile::number(path, rec, 4)?);
                if min < 0.0 || min > max {
                    return Err(bad(format!("invalid range {min}..{max}")));
                }
                Ok(DefaultRule {
                    category,
                    class,
                    field,
                    min,
                    max,
                })
            })
            .collect()
    }

    /// Built-in table with overrides from `path` applied.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut table = DefaultTable::default();
        table.override_with(Self::parse_overrides(path, &text)?);
        Ok(table)
    }
}

/// Fills missing diameter and pressure ranges of distribution segments.
/// Segments whose provenance was `unset` become `assumed` when anything is
/// filled.
pub fn apply_distribution_defaults(ds: &NetworkDataset, graph: &Graph, table: &DefaultTable) -> NetworkDataset {
    let classes = classify_l1_segments(graph, ds);
    let mut out = ds.clone();
    for seg in out.segments.iter_mut() {
        if seg.category == Category::Transmission {
            continue;
        }
        let class = classes.get(&seg.id).copied();
        let mut filled = false;
        for field in [RangeField::Diameter, RangeField::Pressure] {
            let (lo, hi) = match field {
                RangeField::Diameter => (&mut seg.diameter_min_mm, &mut seg.diameter_max_mm),
                RangeField::Pressure => (&mut seg.pressure_min_bar, &mut seg.pressure_max_bar),
            };
            if lo.is_some() || hi.is_some() {
                continue;
            }
            if let Some((min, max)) = table.lookup(seg.category, class, field) {
                *lo = Some(min);
                *hi = Some(max);
                filled = true;
            }
        }
        if filled && seg.attr_source == AttrSource::Unset {
            seg.attr_source = AttrSource::Assumed;
        }
    }
    out
}
