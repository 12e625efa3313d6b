//! End-to-end run: ingest → georef → build → match → defaults → transition
//! → validate → export, with a dataset snapshot written after every stage.

use std::fs;
use std::path::{Path, PathBuf};

use crate::defaults::{apply_distribution_defaults, DefaultTable};
use crate::error::{Error, Result};
use crate::export::{export_all, ExportFormat, ExportSummary};
use crate::geodata::{load_dataset, save_dataset, NetworkDataset};
use crate::georef::{estimate_affine, georeference_trace, merge_traced, read_control_points};
use crate::matcher::{
    assign_attributes, load_reference, match_all, AttrField, FieldMap, DEFAULT_BUFFER_M, DEFAULT_STEP_M,
};
use crate::temporal::{default_years, read_exceptions, validate_years, ValidationReport};
use crate::topology::{snap_and_build, Graph, DEFAULT_SNAP_TOLERANCE_M};
use crate::transition::{apply_plan, read_region_specs, TransitionPlan};

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub input: PathBuf,
    pub work_dir: PathBuf,
    /// Control points and traced layer; both or neither.
    pub control_points: Option<PathBuf>,
    pub trace: Option<PathBuf>,
    pub reference: Option<PathBuf>,
    pub field_map: Option<PathBuf>,
    pub fields: Vec<AttrField>,
    pub buffer_m: f64,
    pub step_m: f64,
    pub snap_tolerance_m: f64,
    pub defaults: Option<PathBuf>,
    pub plan: Option<PathBuf>,
    pub regions: Option<PathBuf>,
    /// Validation years; defaults to the horizon years and their
    /// predecessors.
    pub years: Option<Vec<i32>>,
    pub exceptions: Option<PathBuf>,
    /// Export directory; `<work_dir>/export` when unset.
    pub export_dir: Option<PathBuf>,
    pub force: bool,
}

impl PipelineConfig {
    pub fn new(input: impl Into<PathBuf>, work_dir: impl Into<PathBuf>) -> Self {
        PipelineConfig {
            input: input.into(),
            work_dir: work_dir.into(),
            control_points: None,
            trace: None,
            reference: None,
            field_map: None,
            fields: AttrField::ALL.to_vec(),
            buffer_m: DEFAULT_BUFFER_M,
            step_m: DEFAULT_STEP_M,
            snap_tolerance_m: DEFAULT_SNAP_TOLERANCE_M,
            defaults: None,
            plan: None,
            regions: None,
            years: None,
            exceptions: None,
            export_dir: None,
            force: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    pub dataset: NetworkDataset,
    pub report: ValidationReport,
    pub snapshots: Vec<PathBuf>,
    pub export: ExportSummary,
}

struct Snapshots<'a> {
    dir: &'a Path,
    written: Vec<PathBuf>,
}

impl Snapshots<'_> {
    fn save(&mut self, name: &str, ds: &NetworkDataset) -> Result<()> {
        let path = self.dir.join(format!("{:02}_{name}.geojson", self.written.len() + 1));
        save_dataset(ds, &path)?;
        self.written.push(path);
        Ok(())
    }
}

fn staged<T>(stage: &'static str, f: impl FnOnce() -> Result<T>) -> Result<T> {
    f().map_err(|e| e.stage(stage))
}

pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineOutcome> {
    fs::create_dir_all(&cfg.work_dir).map_err(|e| Error::io(&cfg.work_dir, e))?;
    let mut snaps = Snapshots {
        dir: &cfg.work_dir,
        written: Vec::new(),
    };

    let ds = staged("ingest", || {
        let ds = load_dataset(&cfg.input)?;
        snaps.save("ingest", &ds)?;
        Ok(ds)
    })?;

    let ds = staged("georef", || {
        let ds = match (&cfg.control_points, &cfg.trace) {
            (Some(cp), Some(trace)) => {
                let fit = estimate_affine(&read_control_points(cp)?)?;
                merge_traced(&ds, georeference_trace(trace, &fit.transform)?)?
            }
            (None, None) => ds,
            _ => {
                return Err(Error::Plan(
                    "georeferencing needs both control points and a trace".into(),
                ))
            }
        };
        snaps.save("georef", &ds)?;
        Ok(ds)
    })?;

    let (ds, graph) = staged("build", || {
        let built = snap_and_build(&ds, cfg.snap_tolerance_m)?;
        snaps.save("build", &built.0)?;
        Ok(built)
    })?;

    let ds = staged("match", || {
        let ds = match &cfg.reference {
            Some(path) => {
                let map = match &cfg.field_map {
                    Some(p) => FieldMap::read(p)?,
                    None => FieldMap::default(),
                };
                let reference = load_reference(path, &map)?;
                let results = match_all(&ds, &reference, cfg.buffer_m, cfg.step_m, |_| true);
                assign_attributes(&ds, &results, &reference, &cfg.fields)?.dataset
            }
            None => ds,
        };
        snaps.save("match", &ds)?;
        Ok(ds)
    })?;

    let ds = staged("defaults", || {
        let table = match &cfg.defaults {
            Some(p) => DefaultTable::from_file(p)?,
            None => DefaultTable::default(),
        };
        let ds = apply_distribution_defaults(&ds, &graph, &table);
        snaps.save("defaults", &ds)?;
        Ok(ds)
    })?;

    let ds = staged("transition", || {
        let plan = match &cfg.plan {
            Some(p) => TransitionPlan::read(p)?,
            None => TransitionPlan::default(),
        };
        let regions = match &cfg.regions {
            Some(p) => read_region_specs(p)?,
            None => Vec::new(),
        };
        let ds = apply_plan(&ds, &plan, &regions, cfg.snap_tolerance_m)?;
        // The split leaves a graph consistent with the dataset.
        Graph::from_dataset(&ds)?;
        snaps.save("transition", &ds)?;
        Ok(ds)
    })?;

    let exceptions = match &cfg.exceptions {
        Some(p) => staged("validate", || read_exceptions(p))?,
        None => Vec::new(),
    };
    let years = cfg.years.clone().unwrap_or_else(|| default_years(&ds.metadata.horizon));
    let report = staged("validate", || {
        let report = validate_years(&ds, &years, &exceptions)?;
        let path = cfg.work_dir.join("validation.json");
        fs::write(&path, report.to_json()).map_err(|e| Error::io(&path, e))?;
        Ok(report)
    })?;

    let export_dir = cfg.export_dir.clone().unwrap_or_else(|| cfg.work_dir.join("export"));
    let export = staged("export", || {
        export_all(&ds, &years, &export_dir, &exceptions, cfg.force, ExportFormat::Both)
    })?;

    Ok(PipelineOutcome {
        dataset: ds,
        report,
        snapshots: snaps.written,
        export,
    })
}
