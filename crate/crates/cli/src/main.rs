use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};

use gasgraph::defaults::{apply_distribution_defaults, DefaultTable};
use gasgraph::export::{export_all, ExportFormat};
use gasgraph::geodata::{load_dataset, save_dataset};
use gasgraph::georef::{estimate_affine, georeference_trace, merge_traced, read_control_points};
use gasgraph::matcher::{self, assign_attributes, load_reference, match_all, AttrField, FieldMap};
use gasgraph::pipeline::{run_pipeline, PipelineConfig};
use gasgraph::stats::compute_stats;
use gasgraph::temporal::{default_years, read_exceptions, validate_years};
use gasgraph::topology::{snap_and_build, Graph, DEFAULT_SNAP_TOLERANCE_M};
use gasgraph::transition::{apply_plan, read_region_specs, TransitionPlan};
use gasgraph::{Error, NetworkDataset};

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_VALIDATION: u8 = 3;

#[derive(Parser)]
#[command(
    name = "gasgraph",
    version,
    about = "Build, enrich and validate gas pipeline network graphs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutFormat {
    Csv,
    Geojson,
    Both,
}

impl From<OutFormat> for ExportFormat {
    fn from(f: OutFormat) -> Self {
        match f {
            OutFormat::Csv => ExportFormat::Csv,
            OutFormat::Geojson => ExportFormat::Geojson,
            OutFormat::Both => ExportFormat::Both,
        }
    }
}

#[derive(clap::Args)]
struct DatasetArg {
    /// Working dataset (layered GeoJSON), read and rewritten in place.
    #[arg(long, env = "GASGRAPH_DATASET")]
    dataset: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Validate input datasets, optionally snap endpoints, and write the
    /// working dataset.
    Ingest {
        /// Input datasets; later ones are appended to the first.
        #[arg(long, required = true, env = "GASGRAPH_INPUT", value_delimiter = ',')]
        input: Vec<PathBuf>,
        /// Snap segment endpoints to nodes within this distance.
        #[arg(long, env = "GASGRAPH_SNAP_TOL_M")]
        snap_tol_m: Option<f64>,
        #[command(flatten)]
        dataset: DatasetArg,
    },
    /// Georeference a traced layer and merge it into the dataset.
    Georef {
        #[command(flatten)]
        dataset: DatasetArg,
        /// Control points, one `x y lon lat` row per line.
        #[arg(long, env = "GASGRAPH_CONTROL_POINTS")]
        control_points: PathBuf,
        /// Traced layer in pixel coordinates.
        #[arg(long, env = "GASGRAPH_TRACE")]
        trace: PathBuf,
    },
    /// Snap segment endpoints to nodes, spawning junctions where needed.
    Build {
        #[command(flatten)]
        dataset: DatasetArg,
        #[arg(long, env = "GASGRAPH_SNAP_TOL_M", default_value_t = DEFAULT_SNAP_TOLERANCE_M)]
        snap_tol_m: f64,
    },
    /// Copy attributes from a reference dataset by buffered overlap.
    Match {
        #[command(flatten)]
        dataset: DatasetArg,
        #[arg(long, env = "GASGRAPH_REFERENCE")]
        reference: PathBuf,
        /// `source_property target_field` rows.
        #[arg(long, env = "GASGRAPH_FIELD_MAP")]
        field_map: Option<PathBuf>,
        /// Fields to copy (default: all).
        #[arg(long, env = "GASGRAPH_FIELDS", value_delimiter = ',')]
        fields: Vec<String>,
        #[arg(long, env = "GASGRAPH_BUFFER_M", default_value_t = matcher::DEFAULT_BUFFER_M)]
        buffer_m: f64,
        #[arg(long, env = "GASGRAPH_SAMPLE_STEP_M", default_value_t = matcher::DEFAULT_STEP_M)]
        sample_step_m: f64,
        /// Write the per-segment match report as JSON.
        #[arg(long, env = "GASGRAPH_REPORT")]
        report: Option<PathBuf>,
    },
    /// Fill distribution-level diameter and pressure assumptions.
    Defaults {
        #[command(flatten)]
        dataset: DatasetArg,
        /// Override rows `category position field min max`.
        #[arg(long, env = "GASGRAPH_TABLE")]
        table: Option<PathBuf>,
    },
    /// Apply a transition plan and optional regional demand.
    Transition {
        #[command(flatten)]
        dataset: DatasetArg,
        #[arg(long, env = "GASGRAPH_PLAN")]
        plan: PathBuf,
        /// NUTS-3 demand polygons.
        #[arg(long, env = "GASGRAPH_DEMAND")]
        demand: Option<PathBuf>,
        #[arg(long, env = "GASGRAPH_SNAP_TOL_M", default_value_t = DEFAULT_SNAP_TOLERANCE_M)]
        snap_tol_m: f64,
    },
    /// Check carrier decoupling and supply for each year.
    Validate {
        #[command(flatten)]
        dataset: DatasetArg,
        /// Years to check (default: horizon years and their predecessors).
        #[arg(long, env = "GASGRAPH_YEARS", value_delimiter = ',')]
        years: Vec<i32>,
        /// Node ids or NUTS-3 codes exempt from the supply check.
        #[arg(long, env = "GASGRAPH_EXCEPTIONS")]
        exceptions: Option<PathBuf>,
        #[arg(long, env = "GASGRAPH_REPORT_FORMAT", value_enum, default_value = "text")]
        format: Format,
    },
    /// Length and count summary.
    Stats {
        #[command(flatten)]
        dataset: DatasetArg,
        /// Evaluate the active network in this year.
        #[arg(long, env = "GASGRAPH_YEAR")]
        year: Option<i32>,
        #[arg(long, env = "GASGRAPH_REPORT_FORMAT", value_enum, default_value = "text")]
        format: Format,
    },
    /// Write per-year tables or GeoJSON views.
    Export {
        #[command(flatten)]
        dataset: DatasetArg,
        #[arg(long, env = "GASGRAPH_OUT")]
        out: PathBuf,
        #[arg(long, env = "GASGRAPH_YEARS", value_delimiter = ',')]
        years: Vec<i32>,
        #[arg(long, env = "GASGRAPH_FORMAT", value_enum, default_value = "csv")]
        format: OutFormat,
        #[arg(long, env = "GASGRAPH_EXCEPTIONS")]
        exceptions: Option<PathBuf>,
        /// Export even if validation fails.
        #[arg(long, env = "GASGRAPH_FORCE")]
        force: bool,
    },
    /// Run every stage, writing a snapshot after each one.
    Pipeline {
        #[arg(long, env = "GASGRAPH_INPUT")]
        input: PathBuf,
        #[arg(long, env = "GASGRAPH_WORK_DIR")]
        work_dir: PathBuf,
        #[arg(long, env = "GASGRAPH_CONTROL_POINTS", requires = "trace")]
        control_points: Option<PathBuf>,
        #[arg(long, env = "GASGRAPH_TRACE", requires = "control_points")]
        trace: Option<PathBuf>,
        #[arg(long, env = "GASGRAPH_REFERENCE")]
        reference: Option<PathBuf>,
        #[arg(long, env = "GASGRAPH_FIELD_MAP")]
        field_map: Option<PathBuf>,
        #[arg(long, env = "GASGRAPH_FIELDS", value_delimiter = ',')]
        fields: Vec<String>,
        #[arg(long, env = "GASGRAPH_BUFFER_M", default_value_t = matcher::DEFAULT_BUFFER_M)]
        buffer_m: f64,
        #[arg(long, env = "GASGRAPH_SAMPLE_STEP_M", default_value_t = matcher::DEFAULT_STEP_M)]
        sample_step_m: f64,
        #[arg(long, env = "GASGRAPH_SNAP_TOL_M", default_value_t = DEFAULT_SNAP_TOLERANCE_M)]
        snap_tol_m: f64,
        #[arg(long, env = "GASGRAPH_TABLE")]
        table: Option<PathBuf>,
        #[arg(long, env = "GASGRAPH_PLAN")]
        plan: Option<PathBuf>,
        #[arg(long, env = "GASGRAPH_DEMAND")]
        demand: Option<PathBuf>,
        #[arg(long, env = "GASGRAPH_YEARS", value_delimiter = ',')]
        years: Vec<i32>,
        #[arg(long, env = "GASGRAPH_EXCEPTIONS")]
        exceptions: Option<PathBuf>,
        /// Export directory (default: <work-dir>/export).
        #[arg(long, env = "GASGRAPH_OUT")]
        out: Option<PathBuf>,
        #[arg(long, env = "GASGRAPH_FORCE")]
        force: bool,
    },
}

/// Outcome that is not an error but still sets a non-zero exit code.
enum Done {
    Ok,
    ValidationFailed,
}

fn load(path: &Path) -> anyhow::Result<NetworkDataset> {
    Ok(load_dataset(path)?)
}

fn fields_or_all(names: &[String]) -> anyhow::Result<Vec<AttrField>> {
    if names.is_empty() {
        Ok(AttrField::ALL.to_vec())
    } else {
        Ok(matcher::parse_fields(names)?)
    }
}

fn exceptions(path: &Option<PathBuf>) -> anyhow::Result<Vec<String>> {
    Ok(match path {
        Some(p) => read_exceptions(p)?,
        None => Vec::new(),
    })
}

fn years_or_default(years: Vec<i32>, ds: &NetworkDataset) -> anyhow::Result<Vec<i32>> {
    let years = if years.is_empty() {
        default_years(&ds.metadata.horizon)
    } else {
        years
    };
    if years.is_empty() {
        anyhow::bail!("no years given and the dataset has no horizon");
    }
    Ok(years)
}

fn run(cli: Cli) -> anyhow::Result<Done> {
    match cli.command {
        Command::Ingest {
            input,
            snap_tol_m,
            dataset,
        } => {
            let mut ds = load(&input[0])?;
            for extra in &input[1..] {
                ds = merge_traced(&ds, load(extra)?)?;
            }
            if let Some(tol) = snap_tol_m {
                ds = snap_and_build(&ds, tol)?.0;
            }
            save_dataset(&ds, &dataset.dataset)?;
            eprintln!(
                "ingested {} nodes, {} segments, {} short pipes",
                ds.nodes.len(),
                ds.segments.len(),
                ds.short_pipes.len()
            );
        }
        Command::Georef {
            dataset,
            control_points,
            trace,
        } => {
            let ds = load(&dataset.dataset)?;
            let fit = estimate_affine(&read_control_points(&control_points)?)?;
            let traced = georeference_trace(&trace, &fit.transform)?;
            let n = traced.segments.len();
            save_dataset(&merge_traced(&ds, traced)?, &dataset.dataset)?;
            println!(
                "affine fit: max residual {:.3} m, rms {:.3} m; {n} traced segments merged",
                fit.max_residual_m(),
                fit.rms_residual_m()
            );
            for (i, r) in fit.residuals_m.iter().enumerate() {
                println!("  control point {i}: {r:.3} m");
            }
        }
        Command::Build { dataset, snap_tol_m } => {
            let ds = load(&dataset.dataset)?;
            let before = ds.nodes.len();
            let (ds, graph) = snap_and_build(&ds, snap_tol_m)?;
            save_dataset(&ds, &dataset.dataset)?;
            println!(
                "{} nodes ({} spawned), {} edges",
                ds.nodes.len(),
                ds.nodes.len() - before,
                graph.edges().len()
            );
        }
        Command::Match {
            dataset,
            reference,
            field_map,
            fields,
            buffer_m,
            sample_step_m,
            report,
        } => {
            anyhow::ensure!(
                buffer_m > 0.0 && sample_step_m > 0.0,
                "buffer and step must be positive"
            );
            let ds = load(&dataset.dataset)?;
            let map = match field_map {
                Some(p) => FieldMap::read(&p)?,
                None => FieldMap::default(),
            };
            let fields = fields_or_all(&fields)?;
            let reference = load_reference(&reference, &map)?;
            let results = match_all(&ds, &reference, buffer_m, sample_step_m, |_| true);
            let assignment = assign_attributes(&ds, &results, &reference, &fields)?;
            save_dataset(&assignment.dataset, &dataset.dataset)?;
            let matched = assignment.results.iter().filter(|r| r.chosen.is_some()).count();
            println!("{matched} of {} segments matched", assignment.results.len());
            if let Some(path) = report {
                let json = serde_json::to_string_pretty(&assignment.results)?;
                std::fs::write(&path, json).with_context(|| format!("writing {}", path.display()))?;
            }
        }
        Command::Defaults { dataset, table } => {
            let ds = load(&dataset.dataset)?;
            let table = match table {
                Some(p) => DefaultTable::from_file(&p)?,
                None => DefaultTable::default(),
            };
            let graph = Graph::from_dataset(&ds)?;
            let out = apply_distribution_defaults(&ds, &graph, &table);
            let changed = out.segments.iter().zip(&ds.segments).filter(|(a, b)| a != b).count();
            save_dataset(&out, &dataset.dataset)?;
            println!("defaults applied to {changed} segments");
        }
        Command::Transition {
            dataset,
            plan,
            demand,
            snap_tol_m,
        } => {
            let ds = load(&dataset.dataset)?;
            let plan = TransitionPlan::read(&plan)?;
            let regions = match demand {
                Some(p) => read_region_specs(&p)?,
                None => Vec::new(),
            };
            let out = apply_plan(&ds, &plan, &regions, snap_tol_m)?;
            save_dataset(&out, &dataset.dataset)?;
            println!(
                "{} nodes, {} segments, {} short pipes, {} demand points",
                out.nodes.len(),
                out.segments.len(),
                out.short_pipes.len(),
                out.demand_points.len()
            );
        }
        Command::Validate {
            dataset,
            years,
            exceptions: exc,
            format,
        } => {
            let ds = load(&dataset.dataset)?;
            let years = years_or_default(years, &ds)?;
            let report = validate_years(&ds, &years, &exceptions(&exc)?)?;
            match format {
                Format::Text => print!("{}", report.to_text()),
                Format::Json => println!("{}", report.to_json()),
            }
            if !report.passed() {
                return Ok(Done::ValidationFailed);
            }
        }
        Command::Stats { dataset, year, format } => {
            let ds = load(&dataset.dataset)?;
            let stats = compute_stats(&ds, year);
            match format {
                Format::Text => print!("{}", stats.to_text()),
                Format::Json => println!("{}", stats.to_json()),
            }
        }
        Command::Export {
            dataset,
            out,
            years,
            format,
            exceptions: exc,
            force,
        } => {
            let ds = load(&dataset.dataset)?;
            let years = years_or_default(years, &ds)?;
            let exc = exceptions(&exc)?;
            if force {
                let report = validate_years(&ds, &years, &exc)?;
                if !report.passed() {
                    eprintln!(
                        "warning: exporting despite {} validation violation(s)",
                        report.violations.len()
                    );
                }
            }
            let summary = export_all(&ds, &years, &out, &exc, force, format.into())?;
            for y in &summary.years {
                if !y.unassigned_demand.is_empty() {
                    eprintln!(
                        "{}: no active node of matching carrier for {}",
                        y.year,
                        y.unassigned_demand.join(", ")
                    );
                }
            }
            println!("exported {} years to {}", years.len(), out.display());
        }
        Command::Pipeline {
            input,
            work_dir,
            control_points,
            trace,
            reference,
            field_map,
            fields,
            buffer_m,
            sample_step_m,
            snap_tol_m,
            table,
            plan,
            demand,
            years,
            exceptions,
            out,
            force,
        } => {
            let mut cfg = PipelineConfig::new(input, work_dir);
            cfg.control_points = control_points;
            cfg.trace = trace;
            cfg.reference = reference;
            cfg.field_map = field_map;
            cfg.fields = fields_or_all(&fields)?;
            cfg.buffer_m = buffer_m;
            cfg.step_m = sample_step_m;
            cfg.snap_tolerance_m = snap_tol_m;
            cfg.defaults = table;
            cfg.plan = plan;
            cfg.regions = demand;
            cfg.years = (!years.is_empty()).then_some(years);
            cfg.exceptions = exceptions;
            cfg.export_dir = out;
            cfg.force = force;
            let outcome = run_pipeline(&cfg)?;
            print!("{}", outcome.report.to_text());
            println!(
                "{} snapshots written to {}",
                outcome.snapshots.len(),
                cfg.work_dir.display()
            );
            if !outcome.report.passed() {
                return Ok(Done::ValidationFailed);
            }
        }
    }
    Ok(Done::Ok)
}

fn is_validation_failure(err: &anyhow::Error) -> bool {
    match err.downcast_ref::<Error>() {
        Some(Error::ValidationFailed { .. }) => true,
        Some(Error::Stage { source, .. }) => matches!(**source, Error::ValidationFailed { .. }),
        _ => false,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(Done::Ok) => ExitCode::SUCCESS,
        Ok(Done::ValidationFailed) => ExitCode::from(EXIT_VALIDATION),
        Err(e) if is_validation_failure(&e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_VALIDATION)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_DATA)
        }
    }
}
