use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: malformed JSON: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    /// A feature or record violates the dataset schema.
    #[error("schema violation in `{feature}`, field `{field}`: {message}")]
    Schema {
        feature: String,
        field: String,
        message: String,
    },

    #[error("`{from}` field `{field}` references unknown id `{target}`")]
    UnresolvedReference {
        from: String,
        field: String,
        target: String,
    },

    #[error("malformed geometry in `{id}`: {message}")]
    Geometry { id: String, message: String },

    #[error("unsupported coordinate reference system `{0}` (only geographic WGS84 is accepted)")]
    Crs(String),

    #[error("duplicate id `{id}` in {collection}")]
    DuplicateId { collection: &'static str, id: String },

    #[error(
        "ambiguous snap for {end} endpoint of segment `{segment}`: candidates {candidates:?} are farther apart than the tolerance"
    )]
    AmbiguousSnap {
        segment: String,
        end: &'static str,
        candidates: Vec<String>,
    },

    #[error("segment `{0}` has an unbound endpoint; snap the dataset first")]
    UnboundEndpoint(String),

    #[error("at least 3 control points are required, got {0}")]
    TooFewControlPoints(usize),

    #[error("control points are collinear in image space")]
    CollinearControlPoints,

    #[error("affine transform is not invertible")]
    SingularTransform,

    #[error("transformed vertex {index} ({lon}, {lat}) lies outside WGS84 bounds")]
    OutOfBounds { index: usize, lon: f64, lat: f64 },

    #[error("unknown attribute field `{0}`")]
    UnknownField(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("transition plan: {0}")]
    Plan(String),

    #[error("node id `{0}` generated by node splitting already exists")]
    NameCollision(String),

    #[error("short pipe `{short_pipe}` references split node `{node}`; bind it to one of the sub-nodes")]
    SplitConflict { short_pipe: String, node: String },

    #[error("transitional node `{0}` has no incident repurposed segment")]
    DanglingInterface(String),

    #[error("degenerate polygon for region `{0}` (zero area)")]
    DegeneratePolygon(String),

    #[error("year {year} fails validation with {violations} violation(s)")]
    ValidationFailed { year: i32, violations: usize },

    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn schema(feature: impl Into<String>, field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Schema {
            feature: feature.into(),
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Wraps the error with the name of the pipeline stage that produced it.
    pub fn stage(self, stage: &'static str) -> Self {
        match self {
            e @ Error::Stage { .. } => e,
            e => Error::Stage {
                stage,
                source: Box::new(e),
            },
        }
    }
}
