//! CSV readers and writers for every inter-stage artifact.
//!
//! Floats are written with Rust's shortest round-trip `Display`, so reading a
//! file back yields bit-identical values and reruns give identical bytes.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use chrono::{DateTime, NaiveDateTime};

use crate::error::{Error, Result};
use crate::estimator::EstimatorKind;
use crate::explorer::{EvaluatedConfig, OptimalEntry, OptimalSet, Outcome, ParamConfig};
use crate::ingest::{AlignedFrame, Column, Instant, RawRecord};

pub const RAW_HEADER: [&str; 4] = ["timestamp", "sensor_id", "measurement_type", "value"];
pub const OMEGA_HEADER: [&str; 15] = [
    "target", "h_sec", "r_sec", "i_sec", "r2", "rmse", "rmsle", "mae", "nrmse", "nrmsle", "nmae",
    "score", "n_train", "n_test", "status",
];
pub const PHI_HEADER: [&str; 5] = ["target", "h_sec", "i_sec", "r_sec", "score"];
pub const ESTIMATE_HEADER: [&str; 7] = [
    "target",
    "h_sec",
    "estimator",
    "raw_i_sec",
    "raw_r_sec",
    "i_sec",
    "r_sec",
];
pub const PREDICTION_HEADER: [&str; 7] = [
    "target",
    "h_sec",
    "estimator",
    "anchor",
    "step",
    "observed",
    "predicted",
];
pub const SCORES_HEADER: [&str; 8] = [
    "target",
    "h_sec",
    "estimator",
    "r2",
    "rmse",
    "rmsle",
    "mae",
    "score",
];
pub const PARAM_SPACE_HEADER: [&str; 4] = ["target", "h_sec", "i_over_h", "r_over_h"];

/// Label used in the horizon column for the per-target average row.
pub const MEAN_ROW_LABEL: &str = "mean_unweighted";

pub fn fmt_f64(x: f64) -> String {
    format!("{x}")
}

fn fmt_opt<T: ToString>(x: Option<T>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// Writes `bytes` to a temporary file beside `path`, then renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.to_string()))?;
    Ok(())
}

fn csv_bytes<I, R>(header: &[&str], rows: I) -> Result<Vec<u8>>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(vec![]);
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.into_iter().collect::<Vec<_>>())?;
    }
    w.into_inner().map_err(|e| Error::Io(e.to_string()))
}

struct Table {
    header: Vec<String>,
    rows: Vec<(usize, csv::StringRecord)>,
}

fn read_table<R: Read>(reader: R, expected: Option<&[&str]>) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if let Some(exp) = expected {
        if header != exp {
            return Err(Error::Parse {
                line: 1,
                message: format!(
                    "expected header '{}', found '{}'",
                    exp.join(","),
                    header.join(",")
                ),
            });
        }
    }
    let mut rows = vec![];
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        rows.push((line, rec));
    }
    Ok(Table { header, rows })
}

fn open(path: &Path) -> Result<fs::File> {
    fs::File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn field<T: std::str::FromStr>(
    rec: &csv::StringRecord,
    line: usize,
    idx: usize,
    name: &str,
) -> Result<T> {
    let raw = rec.get(idx).unwrap_or("");
    raw.parse().map_err(|_| Error::Parse {
        line,
        message: format!("bad {name} value '{raw}'"),
    })
}

fn opt_field<T: std::str::FromStr>(
    rec: &csv::StringRecord,
    line: usize,
    idx: usize,
    name: &str,
) -> Result<Option<T>> {
    if rec.get(idx).unwrap_or("").is_empty() {
        Ok(None)
    } else {
        field(rec, line, idx, name).map(Some)
    }
}

/// Integer epoch seconds, RFC 3339, or a naive `YYYY-MM-DD[ T]HH:MM:SS` taken as UTC.
pub fn parse_timestamp(s: &str) -> Option<Instant> {
    if let Ok(v) = s.parse::<i64>() {
        return Some(v);
    }
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.timestamp());
    }
    [
        "%Y-%m-%dT%H:%M:%S",
        "%Y-%m-%d %H:%M:%S",
        "%Y-%m-%dT%H:%M",
        "%Y-%m-%d %H:%M",
    ]
    .iter()
    .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
    .map(|dt| dt.and_utc().timestamp())
}

/// Long-format sensor readings. An empty value cell marks a gap.
pub fn read_raw<R: Read>(reader: R) -> Result<Vec<RawRecord>> {
    let t = read_table(reader, Some(&RAW_HEADER))?;
    t.rows
        .into_iter()
        .map(|(line, rec)| {
            let ts = rec.get(0).unwrap_or("");
            let timestamp = parse_timestamp(ts).ok_or_else(|| Error::Parse {
                line,
                message: format!("bad timestamp '{ts}'"),
            })?;
            let value: Option<f64> = opt_field(&rec, line, 3, "value")?;
            if value.is_some_and(|v| !v.is_finite()) {
                return Err(Error::Parse {
                    line,
                    message: "non-finite value".into(),
                });
            }
            Ok(RawRecord {
                timestamp,
                sensor_id: rec[1].to_string(),
                measurement_type: rec[2].to_string(),
                value,
            })
        })
        .collect()
}

pub fn read_raw_file(path: &Path) -> Result<Vec<RawRecord>> {
    read_raw(open(path)?)
}

pub fn frame_csv(frame: &AlignedFrame) -> Result<Vec<u8>> {
    let mut header = vec!["timestamp"];
    header.extend(frame.columns.iter().map(|c| c.sensor_id.as_str()));
    csv_bytes(
        &header,
        (0..frame.n_rows())
            .map(|r| std::iter::once(frame.grid[r].to_string()).chain(frame.row(r).map(fmt_f64))),
    )
}

/// Reads a wide frame. Measurement types are not stored in the file and come
/// back empty. With fewer than two rows the step cannot be inferred and
/// `fallback_step` is used.
pub fn read_frame<R: Read>(reader: R, fallback_step: i64) -> Result<AlignedFrame> {
    let t = read_table(reader, None)?;
    if t.header.first().map(String::as_str) != Some("timestamp") {
        return Err(Error::Parse {
            line: 1,
            message: "first column must be 'timestamp'".into(),
        });
    }
    let n_cols = t.header.len() - 1;
    let mut grid = Vec::with_capacity(t.rows.len());
    let mut values = vec![Vec::with_capacity(t.rows.len()); n_cols];
    for (line, rec) in &t.rows {
        grid.push(field(rec, *line, 0, "timestamp")?);
        for (c, col) in values.iter_mut().enumerate() {
            col.push(field(rec, *line, c + 1, &t.header[c + 1])?);
        }
    }
    let step = if grid.len() >= 2 {
        grid[1] - grid[0]
    } else {
        fallback_step
    };
    AlignedFrame::new(
        step,
        grid,
        t.header[1..]
            .iter()
            .zip(values)
            .map(|(id, values)| Column {
                sensor_id: id.clone(),
                measurement_type: String::new(),
                values,
            })
            .collect(),
    )
}

pub fn read_frame_file(path: &Path) -> Result<AlignedFrame> {
    read_frame(open(path)?, 1)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredFields {
    pub r2: f64,
    pub rmse: f64,
    pub rmsle: f64,
    pub mae: f64,
    pub nrmse: f64,
    pub nrmsle: f64,
    pub nmae: f64,
    pub score: f64,
    pub n_train: usize,
    pub n_test: usize,
}

/// One evaluated configuration. `scored` is empty for failed configurations,
/// whose `status` carries the error code.
#[derive(Debug, Clone, PartialEq)]
pub struct OmegaRow {
    pub target: String,
    pub config: ParamConfig,
    pub scored: Option<ScoredFields>,
    pub status: String,
}

impl OmegaRow {
    pub fn from_evaluated(target: &str, ev: &EvaluatedConfig) -> Self {
        let (scored, status) = match &ev.outcome {
            Outcome::Scored {
                metrics,
                normalized,
                score,
                n_train,
                n_test,
            } => (
                Some(ScoredFields {
                    r2: metrics.r2,
                    rmse: metrics.rmse,
                    rmsle: metrics.rmsle,
                    mae: metrics.mae,
                    nrmse: normalized.nrmse,
                    nrmsle: normalized.nrmsle,
                    nmae: normalized.nmae,
                    score: *score,
                    n_train: *n_train,
                    n_test: *n_test,
                }),
                "ok".to_string(),
            ),
            Outcome::Failed(e) => (None, e.code().to_string()),
        };
        Self {
            target: target.to_string(),
            config: ev.config,
            scored,
            status,
        }
    }
}

pub fn omega_csv(rows: &[OmegaRow]) -> Result<Vec<u8>> {
    csv_bytes(
        &OMEGA_HEADER,
        rows.iter().map(|r| {
            let c = &r.config;
            let s = r.scored;
            let mut v = vec![
                r.target.clone(),
                c.horizon.to_string(),
                c.sample_interval.to_string(),
                c.input_length.to_string(),
            ];
            v.extend(
                [
                    s.map(|s| s.r2),
                    s.map(|s| s.rmse),
                    s.map(|s| s.rmsle),
                    s.map(|s| s.mae),
                    s.map(|s| s.nrmse),
                    s.map(|s| s.nrmsle),
                    s.map(|s| s.nmae),
                    s.map(|s| s.score),
                ]
                .into_iter()
                .map(|x| x.map(fmt_f64).unwrap_or_default()),
            );
            v.push(fmt_opt(s.map(|s| s.n_train)));
            v.push(fmt_opt(s.map(|s| s.n_test)));
            v.push(r.status.clone());
            v
        }),
    )
}

pub fn read_omega<R: Read>(reader: R) -> Result<Vec<OmegaRow>> {
    let t = read_table(reader, Some(&OMEGA_HEADER))?;
    t.rows
        .into_iter()
        .map(|(line, rec)| {
            let config = ParamConfig::new(
                field(&rec, line, 1, "h_sec")?,
                field(&rec, line, 2, "r_sec")?,
                field(&rec, line, 3, "i_sec")?,
            );
            let status = rec.get(14).unwrap_or("").to_string();
            let scored = if status == "ok" {
                Some(ScoredFields {
                    r2: field(&rec, line, 4, "r2")?,
                    rmse: field(&rec, line, 5, "rmse")?,
                    rmsle: field(&rec, line, 6, "rmsle")?,
                    mae: field(&rec, line, 7, "mae")?,
                    nrmse: field(&rec, line, 8, "nrmse")?,
                    nrmsle: field(&rec, line, 9, "nrmsle")?,
                    nmae: field(&rec, line, 10, "nmae")?,
                    score: field(&rec, line, 11, "score")?,
                    n_train: field(&rec, line, 12, "n_train")?,
                    n_test: field(&rec, line, 13, "n_test")?,
                })
            } else {
                None
            };
            Ok(OmegaRow {
                target: rec[0].to_string(),
                config,
                scored,
                status,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhiRow {
    pub target: String,
    pub config: ParamConfig,
    pub score: f64,
}

pub fn phi_rows(phi: &OptimalSet) -> Vec<PhiRow> {
    phi.entries
        .values()
        .map(|e| PhiRow {
            target: phi.target.clone(),
            config: e.config,
            score: e.score,
        })
        .collect()
}

/// Groups rows back into per-target entry maps, in first-seen target order.
pub fn phi_entries(rows: &[PhiRow]) -> Vec<(String, Vec<OptimalEntry>)> {
    let mut out: Vec<(String, Vec<OptimalEntry>)> = vec![];
    for r in rows {
        let e = OptimalEntry {
            config: r.config,
            score: r.score,
        };
        match out.iter_mut().find(|(t, _)| *t == r.target) {
            Some((_, v)) => v.push(e),
            None => out.push((r.target.clone(), vec![e])),
        }
    }
    out
}

pub fn phi_csv(rows: &[PhiRow]) -> Result<Vec<u8>> {
    csv_bytes(
        &PHI_HEADER,
        rows.iter().map(|r| {
            vec![
                r.target.clone(),
                r.config.horizon.to_string(),
                r.config.input_length.to_string(),
                r.config.sample_interval.to_string(),
                fmt_f64(r.score),
            ]
        }),
    )
}

pub fn read_phi<R: Read>(reader: R) -> Result<Vec<PhiRow>> {
    let t = read_table(reader, Some(&PHI_HEADER))?;
    t.rows
        .into_iter()
        .map(|(line, rec)| {
            Ok(PhiRow {
                target: rec[0].to_string(),
                config: ParamConfig::new(
                    field(&rec, line, 1, "h_sec")?,
                    field(&rec, line, 3, "r_sec")?,
                    field(&rec, line, 2, "i_sec")?,
                ),
                score: field(&rec, line, 4, "score")?,
            })
        })
        .collect()
}

/// One estimate. Empty raw values mean the estimator itself failed; empty
/// final values mean the horizon was infeasible after constraints.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateRow {
    pub target: String,
    pub horizon: i64,
    pub estimator: EstimatorKind,
    pub raw_input_length: Option<f64>,
    pub raw_sample_interval: Option<f64>,
    pub input_length: Option<i64>,
    pub sample_interval: Option<i64>,
}

impl EstimateRow {
    pub fn is_feasible(&self) -> bool {
        self.input_length.is_some() && self.sample_interval.is_some()
    }
}

pub fn estimate_csv(rows: &[EstimateRow]) -> Result<Vec<u8>> {
    csv_bytes(
        &ESTIMATE_HEADER,
        rows.iter().map(|r| {
            vec![
                r.target.clone(),
                r.horizon.to_string(),
                r.estimator.to_string(),
                r.raw_input_length.map(fmt_f64).unwrap_or_default(),
                r.raw_sample_interval.map(fmt_f64).unwrap_or_default(),
                fmt_opt(r.input_length),
                fmt_opt(r.sample_interval),
            ]
        }),
    )
}

pub fn read_estimates<R: Read>(reader: R) -> Result<Vec<EstimateRow>> {
    let t = read_table(reader, Some(&ESTIMATE_HEADER))?;
    t.rows
        .into_iter()
        .map(|(line, rec)| {
            Ok(EstimateRow {
                target: rec[0].to_string(),
                horizon: field(&rec, line, 1, "h_sec")?,
                estimator: field(&rec, line, 2, "estimator")?,
                raw_input_length: opt_field(&rec, line, 3, "raw_i_sec")?,
                raw_sample_interval: opt_field(&rec, line, 4, "raw_r_sec")?,
                input_length: opt_field(&rec, line, 5, "i_sec")?,
                sample_interval: opt_field(&rec, line, 6, "r_sec")?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRow {
    pub target: String,
    pub horizon: i64,
    pub estimator: EstimatorKind,
    pub anchor: Instant,
    /// 1-based output step within the window.
    pub step: usize,
    pub observed: f64,
    pub predicted: f64,
}

pub fn prediction_csv(rows: &[PredictionRow]) -> Result<Vec<u8>> {
    csv_bytes(
        &PREDICTION_HEADER,
        rows.iter().map(|r| {
            vec![
                r.target.clone(),
                r.horizon.to_string(),
                r.estimator.to_string(),
                r.anchor.to_string(),
                r.step.to_string(),
                fmt_f64(r.observed),
                fmt_f64(r.predicted),
            ]
        }),
    )
}

pub fn read_predictions<R: Read>(reader: R) -> Result<Vec<PredictionRow>> {
    let t = read_table(reader, Some(&PREDICTION_HEADER))?;
    t.rows
        .into_iter()
        .map(|(line, rec)| {
            Ok(PredictionRow {
                target: rec[0].to_string(),
                horizon: field(&rec, line, 1, "h_sec")?,
                estimator: field(&rec, line, 2, "estimator")?,
                anchor: field(&rec, line, 3, "anchor")?,
                step: field(&rec, line, 4, "step")?,
                observed: field(&rec, line, 5, "observed")?,
                predicted: field(&rec, line, 6, "predicted")?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRow {
    pub target: String,
    pub horizon: i64,
    pub estimator: EstimatorKind,
    pub r2: f64,
    pub rmse: f64,
    pub rmsle: f64,
    pub mae: f64,
    pub score: f64,
}

pub fn scores_csv(rows: &[ScoreRow]) -> Result<Vec<u8>> {
    csv_bytes(
        &SCORES_HEADER,
        rows.iter().map(|r| {
            vec![
                r.target.clone(),
                r.horizon.to_string(),
                r.estimator.to_string(),
                fmt_f64(r.r2),
                fmt_f64(r.rmse),
                fmt_f64(r.rmsle),
                fmt_f64(r.mae),
                fmt_f64(r.score),
            ]
        }),
    )
}

pub fn read_scores<R: Read>(reader: R) -> Result<Vec<ScoreRow>> {
    let t = read_table(reader, Some(&SCORES_HEADER))?;
    t.rows
        .into_iter()
        .map(|(line, rec)| {
            Ok(ScoreRow {
                target: rec[0].to_string(),
                horizon: field(&rec, line, 1, "h_sec")?,
                estimator: field(&rec, line, 2, "estimator")?,
                r2: field(&rec, line, 3, "r2")?,
                rmse: field(&rec, line, 4, "rmse")?,
                rmsle: field(&rec, line, 5, "rmsle")?,
                mae: field(&rec, line, 6, "mae")?,
                score: field(&rec, line, 7, "score")?,
            })
        })
        .collect()
}

pub fn param_space_csv(rows: &[PhiRow]) -> Result<Vec<u8>> {
    csv_bytes(
        &PARAM_SPACE_HEADER,
        rows.iter().map(|r| {
            let h = r.config.horizon as f64;
            vec![
                r.target.clone(),
                r.config.horizon.to_string(),
                fmt_f64(r.config.input_length as f64 / h),
                fmt_f64(r.config.sample_interval as f64 / h),
            ]
        }),
    )
}

/// Score per (target, horizon) with one column per estimator present, in
/// canonical estimator order. Each target ends with an unweighted mean row.
/// Cells without a score stay empty and are left out of the mean.
pub fn score_vs_horizon_csv(rows: &[ScoreRow]) -> Result<Vec<u8>> {
    let mut kinds: Vec<EstimatorKind> = rows.iter().map(|r| r.estimator).collect();
    kinds.sort();
    kinds.dedup();

    let mut targets: Vec<&str> = vec![];
    for r in rows {
        if !targets.contains(&r.target.as_str()) {
            targets.push(&r.target);
        }
    }

    let mut header = vec!["target".to_string(), "h_sec".to_string()];
    header.extend(kinds.iter().map(|k| k.to_string()));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();

    let mut out: Vec<Vec<String>> = vec![];
    for t in targets {
        let mut horizons: Vec<i64> = rows
            .iter()
            .filter(|r| r.target == t)
            .map(|r| r.horizon)
            .collect();
        horizons.sort_unstable();
        horizons.dedup();
        let cell = |h: i64, k: EstimatorKind| {
            rows.iter()
                .find(|r| r.target == t && r.horizon == h && r.estimator == k)
                .map(|r| r.score)
        };
        for &h in &horizons {
            let mut line = vec![t.to_string(), h.to_string()];
            line.extend(
                kinds
                    .iter()
                    .map(|&k| cell(h, k).map(fmt_f64).unwrap_or_default()),
            );
            out.push(line);
        }
        let mut line = vec![t.to_string(), MEAN_ROW_LABEL.to_string()];
        line.extend(kinds.iter().map(|&k| {
            let v: Vec<f64> = horizons.iter().filter_map(|&h| cell(h, k)).collect();
            if v.is_empty() {
                String::new()
            } else {
                fmt_f64(v.iter().sum::<f64>() / v.len() as f64)
            }
        }));
        out.push(line);
    }
    csv_bytes(&header, out)
}

pub fn read_phi_file(path: &Path) -> Result<Vec<PhiRow>> {
    read_phi(open(path)?)
}

pub fn read_estimates_file(path: &Path) -> Result<Vec<EstimateRow>> {
    read_estimates(open(path)?)
}

pub fn read_scores_file(path: &Path) -> Result<Vec<ScoreRow>> {
    read_scores(open(path)?)
}
