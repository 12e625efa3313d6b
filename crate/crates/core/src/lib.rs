//! Construction, enrichment, staged hydrogen transition and per-year
//! validation of gas pipeline network graphs.
//!
//! The workflow runs over layered GeoJSON datasets:
//!
//! 1. [`geodata`] loads and saves datasets and provides geodesic primitives.
//! 2. [`topology`] snaps segment endpoints to nodes and builds the graph.
//! 3. [`georef`] places traced plan geometries via control points.
//! 4. [`matcher`] copies technical attributes from reference datasets.
//! 5. [`defaults`] fills distribution-level parameter assumptions.
//! 6. [`transition`] repurposes segments, adds new builds, splits shared
//!    nodes and generates time-scheduled short pipes.
//! 7. [`temporal`] derives and validates the active network per year.
//!
//! [`stats`], [`export`] and [`pipeline`] sit on top for reporting and
//! end-to-end runs.

pub mod defaults;
pub mod error;
pub mod export;
pub mod geodata;
pub mod georef;
pub mod matcher;
pub mod pipeline;
pub mod stats;
pub mod temporal;
pub mod textfile;
pub mod topology;
pub mod transition;

pub use error::{Error, Result};
pub use geodata::{
    AttrSource, Carrier, Category, DemandPoint, FacilityPoint, GeoPoint, Metadata, NetworkDataset, NetworkNode,
    NodeCarrier, NodeKind, PipelineSegment, Polyline, ShortPipe, Status,
};
