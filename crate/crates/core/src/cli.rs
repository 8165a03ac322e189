//! Command-line front end. Each subcommand reads the previous stage's CSV
//! artifacts from the output directory and writes its own.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::artifacts::{self, EstimateRow, OmegaRow, PhiRow, PredictionRow, ScoreRow};
use crate::config::RunConfig;
use crate::error::Error;
use crate::estimator::{
    apply_constraints, estimate_raw, EstimatorConfig, EstimatorKind, Knot, Knots,
};
use crate::explorer::{explore_with_progress, run_config, select_optimal, ParamConfig};
use crate::ingest::{build_frame, IngestConfig};
use crate::metrics::{composite_score, normalize, MetricBundle};

pub const EXIT_GENERAL: i32 = 1;
pub const EXIT_PARSE: i32 = 2;
pub const EXIT_EMPTY: i32 = 3;
pub const EXIT_ALL_FAILED: i32 = 4;
pub const EXIT_MISSING_PHI: i32 = 5;
pub const EXIT_WINDOW_SHAPE: i32 = 6;
pub const EXIT_REPORT_INPUTS: i32 = 7;

pub const FRAME_CSV: &str = "frame.csv";
pub const OMEGA_CSV: &str = "omega.csv";
pub const PHI_CSV: &str = "phi.csv";
pub const ESTIMATE_CSV: &str = "estimate.csv";
pub const PREDICTION_CSV: &str = "prediction.csv";
pub const SCORES_CSV: &str = "scores.csv";
pub const PARAM_SPACE_CSV: &str = "param_space.csv";
pub const SCORE_VS_HORIZON_CSV: &str = "score_vs_horizon.csv";
pub const MANIFEST_JSON: &str = "manifest.json";

#[derive(Debug, Parser)]
#[command(
    name = "atlo",
    version,
    about = "Input-length and sampling-interval search for time-series regression"
)]
pub struct Cli {
    /// Configuration file of `key = value` lines.
    #[arg(long, global = true, env = "ATLO_CONFIG")]
    pub config: Option<PathBuf>,
    /// Output directory (overrides `output_dir`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Only errors on stderr, nothing but requested data on stdout.
    #[arg(long, short, global = true)]
    pub quiet: bool,
    /// Reserved; the built-in models are deterministic.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Override a configuration key, e.g. `--set grid.multipliers=1,2`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build the wide frame from long-format sensor readings.
    Ingest(IngestArgs),
    /// Explore every grid configuration and select the best one per horizon.
    Explore(ExploreArgs),
    /// Estimate input length and interval for the validation horizons.
    Estimate(EstimateArgs),
    /// Train and test with the estimated parameters.
    Predict(PredictArgs),
    /// Emit chart data from the selected parameters and scores.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// CSV with header `timestamp,sensor_id,measurement_type,value`.
    pub input: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExploreArgs {
    #[arg(long)]
    pub frame: Option<PathBuf>,
    /// Target column; repeatable. Defaults to `targets`, then every column.
    #[arg(long = "target")]
    pub targets: Vec<String>,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[arg(long)]
    pub phi: Option<PathBuf>,
    /// Frame used to read the native step; falls back to `ingest.sample_interval`.
    #[arg(long)]
    pub frame: Option<PathBuf>,
    /// One of li_e, poly, exp_smooth, knn, none, or `all`.
    #[arg(long)]
    pub estimator: Option<String>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub frame: Option<PathBuf>,
    #[arg(long)]
    pub estimates: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub phi: Option<PathBuf>,
    #[arg(long)]
    pub scores: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn new(code: i32, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Parse { .. } => EXIT_PARSE,
            _ => EXIT_GENERAL,
        };
        Self::new(code, e.to_string())
    }
}

type CliResult<T = ()> = std::result::Result<T, CliError>;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ArtifactRecord {
    pub path: String,
    pub rows: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub completed_at: String,
    pub artifacts: Vec<ArtifactRecord>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_digest: String,
    pub tool_version: String,
    pub stages: BTreeMap<String, StageRecord>,
}

struct Ctx {
    cfg: RunConfig,
    out: PathBuf,
    quiet: bool,
}

impl Ctx {
    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn say(&self, line: &str) {
        if !self.quiet {
            println!("{line}");
        }
    }

    /// Writes the stage's artifacts atomically, then records them in the manifest.
    fn commit(&self, stage: &str, files: &[(&str, Vec<u8>, usize)]) -> CliResult {
        for (name, bytes, _) in files {
            artifacts::write_atomic(&self.path(name), bytes)?;
        }
        let digest = self.cfg.digest();
        let mpath = self.path(MANIFEST_JSON);
        let mut manifest = fs::read(&mpath)
            .ok()
            .and_then(|b| serde_json::from_slice::<RunManifest>(&b).ok())
            .filter(|m| m.config_digest == digest)
            .unwrap_or_default();
        manifest.config_digest = digest;
        manifest.tool_version = env!("CARGO_PKG_VERSION").to_string();
        manifest.stages.insert(
            stage.to_string(),
            StageRecord {
                completed_at: chrono::Utc::now().to_rfc3339(),
                artifacts: files
                    .iter()
                    .map(|(name, _, rows)| ArtifactRecord {
                        path: name.to_string(),
                        rows: *rows,
                    })
                    .collect(),
            },
        );
        let json = serde_json::to_vec_pretty(&manifest)
            .map_err(|e| CliError::new(EXIT_GENERAL, e.to_string()))?;
        artifacts::write_atomic(&mpath, &json)?;
        Ok(())
    }
}

/// Resolves configuration: defaults, then the config file, then `--set`,
/// then `--out`.
pub fn load_config(cli: &Cli) -> CliResult<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(p) = &cli.config {
        let text = fs::read_to_string(p)
            .map_err(|e| CliError::new(EXIT_GENERAL, format!("{}: {e}", p.display())))?;
        cfg.apply_text(&text)?;
    }
    for kv in &cli.set {
        let (k, v) = kv.split_once('=').ok_or_else(|| {
            CliError::new(EXIT_PARSE, format!("--set expects KEY=VALUE, got '{kv}'"))
        })?;
        cfg.set(k.trim(), v.trim())
            .map_err(|e| CliError::new(EXIT_PARSE, e.to_string()))?;
    }
    if let Some(o) = &cli.out {
        cfg.output_dir = o.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn run(cli: Cli) -> CliResult {
    let cfg = load_config(&cli)?;
    let ctx = Ctx {
        out: cfg.output_dir.clone(),
        cfg,
        quiet: cli.quiet,
    };
    match &cli.command {
        Command::Ingest(a) => cmd_ingest(&ctx, a),
        Command::Explore(a) => cmd_explore(&ctx, a),
        Command::Estimate(a) => cmd_estimate(&ctx, a),
        Command::Predict(a) => cmd_predict(&ctx, a),
        Command::Report(a) => cmd_report(&ctx, a),
    }
}

fn cmd_ingest(ctx: &Ctx, a: &IngestArgs) -> CliResult {
    let records = artifacts::read_raw_file(&a.input)?;
    let s = &ctx.cfg.ingest;
    let t_end = s
        .t_end
        .or_else(|| records.iter().map(|r| r.timestamp).max())
        .ok_or_else(|| CliError::new(EXIT_EMPTY, "input has no records"))?;
    let delta_t = match s.delta_t {
        Some(d) => d,
        None => {
            let first = records.iter().map(|r| r.timestamp).min().unwrap_or(t_end);
            (t_end - first).max(1)
        }
    };
    let icfg = IngestConfig {
        t_end,
        delta_t,
        sample_interval: s.sample_interval,
        epsilon: s.epsilon,
        relevant_types: s.relevant_types.clone(),
    };
    let built = build_frame(records, &icfg).map_err(|e| match e {
        Error::EmptyWindow
        | Error::AllMissing(_)
        | Error::AllColumnsConstant
        | Error::NoRelevantColumns
        | Error::NoCompleteRows => CliError::new(EXIT_EMPTY, e.to_string()),
        e => e.into(),
    })?;
    let (frame, report) = (built.frame, built.report);
    ctx.say(&format!(
        "frame: {} rows x {} columns (step {}s, {} sensors acquired)",
        frame.n_rows(),
        frame.n_cols(),
        frame.step,
        report.sensors_acquired
    ));
    if !report.dropped_constant.is_empty() {
        ctx.say(&format!(
            "dropped constant: {}",
            report.dropped_constant.join(",")
        ));
    }
    if !report.dropped_irrelevant.is_empty() {
        ctx.say(&format!(
            "dropped irrelevant: {}",
            report.dropped_irrelevant.join(",")
        ));
    }
    if report.trimmed_rows > 0 {
        ctx.say(&format!("trimmed leading rows: {}", report.trimmed_rows));
    }
    let bytes = artifacts::frame_csv(&frame)?;
    ctx.commit("ingest", &[(FRAME_CSV, bytes, frame.n_rows())])
}

fn frame_path(ctx: &Ctx, p: &Option<PathBuf>) -> PathBuf {
    p.clone().unwrap_or_else(|| ctx.path(FRAME_CSV))
}

fn load_frame(path: &Path, native_step: i64) -> CliResult<crate::ingest::AlignedFrame> {
    let f = fs::File::open(path)
        .map_err(|e| CliError::new(EXIT_GENERAL, format!("{}: {e}", path.display())))?;
    Ok(artifacts::read_frame(f, native_step)?)
}

fn cmd_explore(ctx: &Ctx, a: &ExploreArgs) -> CliResult {
    let cfg = &ctx.cfg;
    let frame = load_frame(&frame_path(ctx, &a.frame), cfg.ingest.sample_interval)?;
    let targets: Vec<String> = if !a.targets.is_empty() {
        a.targets.clone()
    } else if !cfg.targets.is_empty() {
        cfg.targets.clone()
    } else {
        frame.columns.iter().map(|c| c.sensor_id.clone()).collect()
    };
    for t in &targets {
        if frame.column_index(t).is_none() {
            return Err(Error::UnknownColumn(t.clone()).into());
        }
    }

    let model_label = cfg.model.kind.to_string();
    let mut omega: Vec<OmegaRow> = vec![];
    let mut phi: Vec<PhiRow> = vec![];
    let mut failed: Vec<String> = vec![];
    for t in &targets {
        let progress =
            |c: &ParamConfig, o: &crate::error::Result<crate::explorer::ConfigOutcome>| match o {
                Ok(o) => info!(
                    "{t} h={} r={} i={}: r2={} rmse={}",
                    c.horizon, c.sample_interval, c.input_length, o.metrics.r2, o.metrics.rmse
                ),
                Err(e) => info!(
                    "{t} h={} r={} i={}: failed ({})",
                    c.horizon,
                    c.sample_interval,
                    c.input_length,
                    e.code()
                ),
            };
        let ex = match explore_with_progress(
            &frame,
            t,
            &cfg.grid,
            &cfg.model,
            &cfg.weights,
            cfg.split_fraction,
            progress,
        ) {
            Ok(ex) => ex,
            Err(Error::AllConfigsFailed) => {
                warn!("{t}: every configuration failed");
                failed.push(t.clone());
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        for s in &ex.skipped {
            info!(
                "{t}: skipped h={} d={} m={}: {}",
                s.horizon, s.divisor, s.multiplier, s.reason
            );
        }
        omega.extend(ex.evaluated.iter().map(|e| OmegaRow::from_evaluated(t, e)));
        let opt = select_optimal(t, &ex.evaluated, &cfg.weights, &model_label)?;
        for h in &opt.unresolved {
            warn!("{t}: no successful configuration at h={h}");
        }
        ctx.say(&format!(
            "{t}: {} configurations, {} horizons selected",
            ex.evaluated.len(),
            opt.len()
        ));
        phi.extend(artifacts::phi_rows(&opt));
    }

    ctx.commit(
        "explore",
        &[
            (OMEGA_CSV, artifacts::omega_csv(&omega)?, omega.len()),
            (PHI_CSV, artifacts::phi_csv(&phi)?, phi.len()),
        ],
    )?;
    if !failed.is_empty() {
        return Err(CliError::new(
            EXIT_ALL_FAILED,
            format!("every configuration failed for: {}", failed.join(",")),
        ));
    }
    Ok(())
}

fn parse_kinds(arg: &Option<String>, default: EstimatorKind) -> CliResult<Vec<EstimatorKind>> {
    match arg.as_deref() {
        None => Ok(vec![default]),
        Some("all") => Ok(EstimatorKind::ALL.to_vec()),
        Some(s) => s
            .split(',')
            .map(|k| k.trim().parse::<EstimatorKind>())
            .collect::<crate::error::Result<Vec<_>>>()
            .map_err(|e| CliError::new(EXIT_PARSE, e.to_string())),
    }
}

/// Estimates every (target, horizon, kind) cell; failures become rows with
/// empty values rather than errors.
pub fn estimate_rows(
    knots: &Knots,
    target: &str,
    horizons: &[i64],
    kinds: &[EstimatorKind],
    base: &EstimatorConfig,
    native_step: i64,
) -> Vec<EstimateRow> {
    let mut rows = vec![];
    for &h in horizons {
        for &kind in kinds {
            let cfg = EstimatorConfig { kind, ..*base };
            let mut row = EstimateRow {
                target: target.to_string(),
                horizon: h,
                estimator: kind,
                raw_input_length: None,
                raw_sample_interval: None,
                input_length: None,
                sample_interval: None,
            };
            match estimate_raw(knots, h as f64, &cfg) {
                Ok(raw) => {
                    row.raw_input_length = Some(raw.i);
                    row.raw_sample_interval = Some(raw.r);
                    match apply_constraints(raw, h, &cfg, native_step) {
                        Ok(e) => {
                            row.input_length = Some(e.input_length);
                            row.sample_interval = Some(e.sample_interval);
                        }
                        Err(e) => warn!("{target} h={h} {kind}: infeasible ({e})"),
                    }
                }
                Err(e) => warn!("{target} h={h} {kind}: no estimate ({e})"),
            }
            rows.push(row);
        }
    }
    rows
}

fn cmd_estimate(ctx: &Ctx, a: &EstimateArgs) -> CliResult {
    let cfg = &ctx.cfg;
    let phi_path = a.phi.clone().unwrap_or_else(|| ctx.path(PHI_CSV));
    let phi = artifacts::read_phi_file(&phi_path).map_err(|e| match e {
        Error::Io(m) => CliError::new(EXIT_MISSING_PHI, m),
        e => e.into(),
    })?;
    let fpath = frame_path(ctx, &a.frame);
    let native_step = if fpath.exists() {
        load_frame(&fpath, cfg.ingest.sample_interval)?.step
    } else {
        cfg.ingest.sample_interval
    };
    let kinds = parse_kinds(&a.estimator, cfg.estimator.kind)?;

    let grouped = artifacts::phi_entries(&phi);
    let targets: Vec<String> = if cfg.targets.is_empty() {
        grouped.iter().map(|(t, _)| t.clone()).collect()
    } else {
        cfg.targets.clone()
    };
    let mut rows = vec![];
    for t in &targets {
        let entries = grouped
            .iter()
            .find(|(g, _)| g == t)
            .map(|(_, e)| e)
            .ok_or_else(|| {
                CliError::new(
                    EXIT_MISSING_PHI,
                    format!("no selected parameters for target '{t}'"),
                )
            })?;
        let knots = Knots::new(
            entries
                .iter()
                .map(|e| {
                    Knot::new(
                        e.config.horizon as f64,
                        e.config.input_length as f64,
                        e.config.sample_interval as f64,
                    )
                })
                .collect(),
        )?;
        rows.extend(estimate_rows(
            &knots,
            t,
            &cfg.validation_horizons,
            &kinds,
            &cfg.estimator,
            native_step,
        ));
    }
    let feasible = rows.iter().filter(|r| r.is_feasible()).count();
    ctx.say(&format!("{} estimates, {} feasible", rows.len(), feasible));
    ctx.commit(
        "estimate",
        &[(ESTIMATE_CSV, artifacts::estimate_csv(&rows)?, rows.len())],
    )
}

fn cmd_predict(ctx: &Ctx, a: &PredictArgs) -> CliResult {
    let cfg = &ctx.cfg;
    let frame = load_frame(&frame_path(ctx, &a.frame), cfg.ingest.sample_interval)?;
    let est_path = a
        .estimates
        .clone()
        .unwrap_or_else(|| ctx.path(ESTIMATE_CSV));
    let estimates: Vec<EstimateRow> = artifacts::read_estimates_file(&est_path)?
        .into_iter()
        .filter(EstimateRow::is_feasible)
        .collect();

    let runs: Vec<_> = estimates
        .par_iter()
        .map(|e| {
            let r = e.sample_interval.expect("feasible row");
            let i = e.input_length.expect("feasible row");
            let config = ParamConfig::new(e.horizon / r * r, r, i);
            run_config(&frame, &e.target, &config, &cfg.model, cfg.split_fraction)
        })
        .collect();

    let mut predictions: Vec<PredictionRow> = vec![];
    let mut bundles: Vec<MetricBundle> = vec![];
    for (e, run) in estimates.iter().zip(runs) {
        let run = run.map_err(|err| match err {
            Error::FrameTooShort { .. }
            | Error::DegenerateSplit { .. }
            | Error::IncompatibleInterval { .. }
            | Error::InvalidWindow(_) => CliError::new(
                EXIT_WINDOW_SHAPE,
                format!("{} h={} {}: {err}", e.target, e.horizon, e.estimator),
            ),
            err => err.into(),
        })?;
        for (k, anchor) in run.anchors.iter().enumerate() {
            for (s, (&obs, &pred)) in run.observed[k].iter().zip(&run.predicted[k]).enumerate() {
                predictions.push(PredictionRow {
                    target: e.target.clone(),
                    horizon: e.horizon,
                    estimator: e.estimator,
                    anchor: *anchor,
                    step: s + 1,
                    observed: obs,
                    predicted: pred,
                });
            }
        }
        bundles.push(run.outcome.metrics);
    }

    // scores are normalized within each target across its (horizon, estimator) cells
    let mut scores = vec![0.0; estimates.len()];
    let mut targets: Vec<&str> = estimates.iter().map(|e| e.target.as_str()).collect();
    targets.sort_unstable();
    targets.dedup();
    for t in targets {
        let idx: Vec<usize> = (0..estimates.len())
            .filter(|&k| estimates[k].target == t)
            .collect();
        let group: Vec<MetricBundle> = idx.iter().map(|&k| bundles[k]).collect();
        for (&k, nb) in idx.iter().zip(normalize(&group)?) {
            scores[k] = composite_score(&nb, &cfg.weights)?;
        }
    }
    let score_rows: Vec<ScoreRow> = estimates
        .iter()
        .zip(&bundles)
        .zip(&scores)
        .map(|((e, m), &score)| ScoreRow {
            target: e.target.clone(),
            horizon: e.horizon,
            estimator: e.estimator,
            r2: m.r2,
            rmse: m.rmse,
            rmsle: m.rmsle,
            mae: m.mae,
            score,
        })
        .collect();
    for s in &score_rows {
        ctx.say(&format!(
            "{} h={} {}: r2={} score={}",
            s.target, s.horizon, s.estimator, s.r2, s.score
        ));
    }
    ctx.commit(
        "predict",
        &[
            (
                PREDICTION_CSV,
                artifacts::prediction_csv(&predictions)?,
                predictions.len(),
            ),
            (
                SCORES_CSV,
                artifacts::scores_csv(&score_rows)?,
                score_rows.len(),
            ),
        ],
    )
}

fn cmd_report(ctx: &Ctx, a: &ReportArgs) -> CliResult {
    let phi_path = a.phi.clone().unwrap_or_else(|| ctx.path(PHI_CSV));
    let scores_path = a.scores.clone().unwrap_or_else(|| ctx.path(SCORES_CSV));
    for p in [&phi_path, &scores_path] {
        if !p.exists() {
            return Err(CliError::new(
                EXIT_REPORT_INPUTS,
                format!("missing input {}", p.display()),
            ));
        }
    }
    let phi = artifacts::read_phi_file(&phi_path)?;
    let scores = artifacts::read_scores_file(&scores_path)?;
    let mut rs: Vec<f64> = phi
        .iter()
        .map(|p| p.config.sample_interval as f64 / p.config.horizon as f64)
        .collect();
    rs.sort_by(f64::total_cmp);
    if let (Some(lo), Some(hi)) = (rs.first(), rs.last()) {
        ctx.say(&format!("r/h ranges over [{lo}, {hi}]"));
    }
    ctx.commit(
        "report",
        &[
            (
                PARAM_SPACE_CSV,
                artifacts::param_space_csv(&phi)?,
                phi.len(),
            ),
            (
                SCORE_VS_HORIZON_CSV,
                artifacts::score_vs_horizon_csv(&scores)?,
                scores.len(),
            ),
        ],
    )
}
