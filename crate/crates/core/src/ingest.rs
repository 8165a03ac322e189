//! Sensor ingest: acquisition window, as-of alignment onto a uniform grid,
//! forward fill, constant-column elimination, relevance filtering and the
//! long-to-wide restructuring into an [`AlignedFrame`].

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};

/// Epoch seconds.
pub type Instant = i64;

/// One long-format reading. `value` is `None` only for explicitly flagged gaps.
#[derive(Debug, Clone, PartialEq)]
pub struct RawRecord {
    pub timestamp: Instant,
    pub sensor_id: String,
    pub measurement_type: String,
    pub value: Option<f64>,
}

impl RawRecord {
    pub fn new(timestamp: Instant, sensor_id: &str, measurement_type: &str, value: f64) -> Self {
        Self {
            timestamp,
            sensor_id: sensor_id.to_string(),
            measurement_type: measurement_type.to_string(),
            value: Some(value),
        }
    }

    pub fn missing(timestamp: Instant, sensor_id: &str, measurement_type: &str) -> Self {
        Self {
            timestamp,
            sensor_id: sensor_id.to_string(),
            measurement_type: measurement_type.to_string(),
            value: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensorSeries {
    pub sensor_id: String,
    pub measurement_type: String,
    /// Strictly increasing in timestamp.
    pub samples: Vec<(Instant, Option<f64>)>,
}

impl SensorSeries {
    pub fn first_timestamp(&self) -> Option<Instant> {
        self.samples.first().map(|s| s.0)
    }

    pub fn last_timestamp(&self) -> Option<Instant> {
        self.samples.last().map(|s| s.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IngestConfig {
    pub t_end: Instant,
    /// Length of the acquisition window in seconds.
    pub delta_t: i64,
    /// Grid step R in seconds.
    pub sample_interval: i64,
    /// Variance threshold in squared sensor units.
    pub epsilon: f64,
    /// Empty means keep every measurement type.
    pub relevant_types: BTreeSet<String>,
}

pub const DEFAULT_EPSILON: f64 = 1e-12;

impl IngestConfig {
    pub fn validate(&self) -> Result<()> {
        if self.delta_t <= 0 {
            return Err(Error::InvalidConfig("delta_t must be positive".into()));
        }
        if self.sample_interval <= 0 {
            return Err(Error::InvalidConfig(
                "sample_interval must be positive".into(),
            ));
        }
        if !(self.epsilon >= 0.0) {
            return Err(Error::InvalidConfig("epsilon must be non-negative".into()));
        }
        Ok(())
    }

    pub fn t_start(&self) -> Instant {
        self.t_end - self.delta_t
    }

    pub fn is_relevant(&self, measurement_type: &str) -> bool {
        self.relevant_types.is_empty() || self.relevant_types.contains(measurement_type)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub sensor_id: String,
    pub measurement_type: String,
    pub values: Vec<f64>,
}

/// Wide matrix on a uniform grid. Every column has one value per grid instant.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedFrame {
    pub step: i64,
    pub grid: Vec<Instant>,
    pub columns: Vec<Column>,
}

impl AlignedFrame {
    /// Builds a frame and checks the shape invariants.
    pub fn new(step: i64, grid: Vec<Instant>, columns: Vec<Column>) -> Result<Self> {
        if step <= 0 {
            return Err(Error::InvalidConfig("frame step must be positive".into()));
        }
        if grid.windows(2).any(|w| w[1] - w[0] != step) {
            return Err(Error::InvalidConfig(format!(
                "grid is not uniformly spaced at {step}s"
            )));
        }
        for c in &columns {
            if c.values.len() != grid.len() {
                return Err(Error::InvalidConfig(format!(
                    "column `{}` has {} values for {} grid points",
                    c.sensor_id,
                    c.values.len(),
                    grid.len()
                )));
            }
            if c.values.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "column `{}` contains a non-finite value",
                    c.sensor_id
                )));
            }
        }
        Ok(Self {
            step,
            grid,
            columns,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.grid.len()
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn column_index(&self, sensor_id: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.sensor_id == sensor_id)
    }

    pub fn column(&self, sensor_id: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.sensor_id == sensor_id)
    }

    pub fn column_names(&self) -> Vec<&str> {
        self.columns.iter().map(|c| c.sensor_id.as_str()).collect()
    }

    /// Row `r` across all columns, in column order.
    pub fn row(&self, r: usize) -> impl Iterator<Item = f64> + '_ {
        self.columns.iter().map(move |c| c.values[r])
    }
}

/// Keeps records with `t_end - delta_t <= timestamp <= t_end`, grouped per sensor.
/// A repeated timestamp for one sensor keeps the last value seen.
pub fn acquire<I>(records: I, cfg: &IngestConfig) -> Result<BTreeMap<String, SensorSeries>>
where
    I: IntoIterator<Item = RawRecord>,
{
    cfg.validate()?;
    let (t_start, t_end) = (cfg.t_start(), cfg.t_end);

    let mut by_sensor: BTreeMap<String, (String, BTreeMap<Instant, Option<f64>>)> = BTreeMap::new();
    for rec in records {
        if rec.timestamp < t_start || rec.timestamp > t_end {
            continue;
        }
        let entry = by_sensor
            .entry(rec.sensor_id)
            .or_insert_with(|| (rec.measurement_type.clone(), BTreeMap::new()));
        entry.0 = rec.measurement_type;
        entry.1.insert(rec.timestamp, rec.value);
    }
    if by_sensor.is_empty() {
        return Err(Error::EmptyWindow);
    }

    Ok(by_sensor
        .into_iter()
        .map(|(sensor_id, (measurement_type, samples))| {
            let series = SensorSeries {
                sensor_id: sensor_id.clone(),
                measurement_type,
                samples: samples.into_iter().collect(),
            };
            (sensor_id, series)
        })
        .collect())
}

/// As-of alignment: each grid point `grid_start + k * sample_interval <= grid_end`
/// takes the value of the latest sample at or before it. Grid points with no
/// predecessor, or whose predecessor is a flagged gap, come out as `None`.
pub fn align_resample(
    series: &SensorSeries,
    grid_start: Instant,
    sample_interval: i64,
    grid_end: Instant,
) -> Result<Vec<Option<f64>>> {
    if series.samples.is_empty() {
        return Err(Error::AllMissing(series.sensor_id.clone()));
    }
    if sample_interval <= 0 {
        return Err(Error::InvalidConfig(
            "sample_interval must be positive".into(),
        ));
    }
    if grid_start > grid_end {
        return Err(Error::InvalidConfig("grid_start is after grid_end".into()));
    }

    let n = ((grid_end - grid_start) / sample_interval) as usize + 1;
    let mut out = Vec::with_capacity(n);
    let samples = &series.samples;
    let mut cursor = 0usize;
    let mut current: Option<Option<f64>> = None;
    for k in 0..n {
        let t = grid_start + k as i64 * sample_interval;
        while cursor < samples.len() && samples[cursor].0 <= t {
            current = Some(samples[cursor].1);
            cursor += 1;
        }
        out.push(current.flatten());
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilledColumn {
    pub values: Vec<Option<f64>>,
    /// Number of leading entries that had no valid predecessor.
    pub leading_gap: usize,
}

/// Propagates the last valid observation forward. Leading gaps stay missing
/// and are reported through `leading_gap`.
pub fn forward_fill(column: &[Option<f64>]) -> Result<FilledColumn> {
    let leading_gap = column
        .iter()
        .position(Option::is_some)
        .ok_or_else(|| Error::AllMissing(String::new()))?;
    let mut last = None;
    let values = column
        .iter()
        .map(|v| {
            if v.is_some() {
                last = *v;
            }
            last
        })
        .collect();
    Ok(FilledColumn {
        values,
        leading_gap,
    })
}

/// Population variance (divides by n).
pub fn population_variance(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n
}

/// Removes columns whose population variance is strictly below `epsilon`.
/// Returns the reduced frame and the ids of the removed columns.
pub fn drop_constant_columns(
    frame: AlignedFrame,
    epsilon: f64,
) -> Result<(AlignedFrame, Vec<String>)> {
    let AlignedFrame {
        step,
        grid,
        columns,
    } = frame;
    let (kept, dropped): (Vec<Column>, Vec<Column>) = columns
        .into_iter()
        .partition(|c| population_variance(&c.values) >= epsilon);
    if kept.is_empty() {
        return Err(Error::AllColumnsConstant);
    }
    Ok((
        AlignedFrame {
            step,
            grid,
            columns: kept,
        },
        dropped.into_iter().map(|c| c.sensor_id).collect(),
    ))
}

/// Keeps columns whose measurement type is in `relevant_types`; an empty set keeps all.
pub fn select_relevant(
    frame: AlignedFrame,
    relevant_types: &BTreeSet<String>,
) -> Result<AlignedFrame> {
    if relevant_types.is_empty() {
        return Ok(frame);
    }
    let AlignedFrame {
        step,
        grid,
        columns,
    } = frame;
    let columns: Vec<Column> = columns
        .into_iter()
        .filter(|c| relevant_types.contains(&c.measurement_type))
        .collect();
    if columns.is_empty() {
        return Err(Error::NoRelevantColumns);
    }
    Ok(AlignedFrame {
        step,
        grid,
        columns,
    })
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BuildReport {
    pub sensors_acquired: usize,
    pub dropped_irrelevant: Vec<String>,
    pub dropped_constant: Vec<String>,
    /// Rows removed from the top because some column had no prior sample yet.
    pub trimmed_rows: usize,
    /// Per-sensor leading gap length on the untrimmed grid.
    pub leading_gaps: Vec<(String, usize)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameBuild {
    pub frame: AlignedFrame,
    pub report: BuildReport,
}

/// Full preprocessing chain from long-format records to a complete wide frame.
///
/// The shared grid starts at the earliest retained sample and steps by
/// `cfg.sample_interval` up to the latest one. After forward fill, rows are
/// trimmed from the top until every relevant sensor has a value.
pub fn build_frame<I>(records: I, cfg: &IngestConfig) -> Result<FrameBuild>
where
    I: IntoIterator<Item = RawRecord>,
{
    let series = acquire(records, cfg)?;
    let mut report = BuildReport {
        sensors_acquired: series.len(),
        ..Default::default()
    };

    // Relevance is decided up front so irrelevant late starters cannot trim rows.
    let (relevant, irrelevant): (Vec<SensorSeries>, Vec<SensorSeries>) = series
        .into_values()
        .partition(|s| cfg.is_relevant(&s.measurement_type));
    report.dropped_irrelevant = irrelevant.into_iter().map(|s| s.sensor_id).collect();
    if relevant.is_empty() {
        return Err(Error::NoRelevantColumns);
    }

    let grid_start = relevant
        .iter()
        .filter_map(SensorSeries::first_timestamp)
        .min()
        .ok_or(Error::EmptyWindow)?;
    let grid_end = relevant
        .iter()
        .filter_map(SensorSeries::last_timestamp)
        .max()
        .ok_or(Error::EmptyWindow)?;
    let step = cfg.sample_interval;

    let mut filled = Vec::with_capacity(relevant.len());
    for s in &relevant {
        let aligned = align_resample(s, grid_start, step, grid_end)?;
        let col = forward_fill(&aligned).map_err(|_| Error::AllMissing(s.sensor_id.clone()))?;
        report
            .leading_gaps
            .push((s.sensor_id.clone(), col.leading_gap));
        filled.push((s, col));
    }

    let n_rows = ((grid_end - grid_start) / step) as usize + 1;
    let trim = filled.iter().map(|(_, c)| c.leading_gap).max().unwrap_or(0);
    if trim >= n_rows {
        return Err(Error::NoCompleteRows);
    }
    report.trimmed_rows = trim;

    let grid: Vec<Instant> = (trim..n_rows)
        .map(|k| grid_start + k as i64 * step)
        .collect();
    let columns = filled
        .into_iter()
        .map(|(s, c)| Column {
            sensor_id: s.sensor_id.clone(),
            measurement_type: s.measurement_type.clone(),
            values: c.values[trim..]
                .iter()
                .map(|v| v.expect("filled past the leading gap"))
                .collect(),
        })
        .collect();
    let frame = AlignedFrame::new(step, grid, columns)?;

    let (frame, dropped) = drop_constant_columns(frame, cfg.epsilon)?;
    report.dropped_constant = dropped;
    let frame = select_relevant(frame, &cfg.relevant_types)?;
    Ok(FrameBuild { frame, report })
}
