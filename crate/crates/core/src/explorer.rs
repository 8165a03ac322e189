//! Exhaustive exploration of (horizon, interval, input length) configurations
//! and per-horizon selection of the best one.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::ingest::AlignedFrame;
use crate::metrics::{composite_score, normalize, MetricBundle, NormalizedBundle, ScoreWeights};
use crate::models::{Dataset, Regressor};
use crate::windowing::{make_windows, split_chronological, WindowSpec};

/// One point `(h, r, i)` of the search space, all in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamConfig {
    pub horizon: i64,
    pub sample_interval: i64,
    pub input_length: i64,
}

impl ParamConfig {
    pub fn new(horizon: i64, sample_interval: i64, input_length: i64) -> Self {
        Self {
            horizon,
            sample_interval,
            input_length,
        }
    }

    pub fn window_spec(&self, target: &str) -> WindowSpec {
        WindowSpec::new(
            self.horizon,
            self.sample_interval,
            self.input_length,
            target,
        )
    }
}

/// Horizons in seconds; intervals are `h / d` and input lengths `h * m`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGrid {
    pub horizons: Vec<i64>,
    pub interval_divisors: Vec<u32>,
    pub input_multipliers: Vec<u32>,
}

/// Output horizons explored by default, in minutes.
pub const DEFAULT_HORIZONS_MIN: [i64; 19] = [
    5, 10, 20, 40, 80, 120, 160, 200, 240, 280, 320, 360, 400, 440, 480, 520, 560, 600, 640,
];

impl Default for ParamGrid {
    fn default() -> Self {
        Self {
            horizons: DEFAULT_HORIZONS_MIN.iter().map(|m| m * 60).collect(),
            interval_divisors: vec![1, 2, 3, 4],
            input_multipliers: vec![1, 2, 3, 4],
        }
    }
}

impl ParamGrid {
    pub fn validate(&self) -> Result<()> {
        if self.horizons.is_empty()
            || self.interval_divisors.is_empty()
            || self.input_multipliers.is_empty()
        {
            return Err(Error::EmptyGrid);
        }
        if self.horizons.iter().any(|&h| h <= 0) {
            return Err(Error::InvalidConfig("horizons must be positive".into()));
        }
        if self.horizons.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig(
                "horizons must be strictly increasing".into(),
            ));
        }
        if self.interval_divisors.contains(&0) || self.input_multipliers.contains(&0) {
            return Err(Error::InvalidConfig(
                "divisors and multipliers must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkippedConfig {
    pub horizon: i64,
    pub divisor: u32,
    pub multiplier: u32,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridBuild {
    pub configs: Vec<ParamConfig>,
    pub skipped: Vec<SkippedConfig>,
}

fn sorted_unique(v: &[u32]) -> Vec<u32> {
    let mut v = v.to_vec();
    v.sort_unstable();
    v.dedup();
    v
}

/// Cartesian product ordered by horizon, then multiplier, then divisor.
/// Intervals that are not a whole multiple of `native_step` are skipped.
pub fn build_grid(grid: &ParamGrid, native_step: i64) -> Result<GridBuild> {
    grid.validate()?;
    if native_step <= 0 {
        return Err(Error::InvalidConfig("native step must be positive".into()));
    }
    let divisors = sorted_unique(&grid.interval_divisors);
    let multipliers = sorted_unique(&grid.input_multipliers);
    let mut out = GridBuild {
        configs: vec![],
        skipped: vec![],
    };
    for &h in &grid.horizons {
        for &m in &multipliers {
            for &d in &divisors {
                let d64 = d as i64;
                if h % d64 != 0 || (h / d64) % native_step != 0 {
                    out.skipped.push(SkippedConfig {
                        horizon: h,
                        divisor: d,
                        multiplier: m,
                        reason: format!(
                            "{h}s / {d} is not a whole multiple of the {native_step}s step"
                        ),
                    });
                    continue;
                }
                out.configs.push(ParamConfig::new(h, h / d64, h * m as i64));
            }
        }
    }
    if out.configs.is_empty() {
        return Err(Error::EmptyGrid);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigOutcome {
    pub metrics: MetricBundle,
    pub n_train: usize,
    pub n_test: usize,
}

/// Observed and predicted values pooled over every step of every test window.
#[derive(Debug, Clone, PartialEq)]
pub struct TestRun {
    pub outcome: ConfigOutcome,
    pub anchors: Vec<i64>,
    pub observed: Vec<Vec<f64>>,
    pub predicted: Vec<Vec<f64>>,
}

/// Windows the frame, fits on the chronological train part and predicts the
/// purged test part. Returns per-window predictions alongside the metrics.
pub fn run_config<R: Regressor + ?Sized>(
    frame: &AlignedFrame,
    target: &str,
    config: &ParamConfig,
    model: &R,
    split_fraction: f64,
) -> Result<TestRun> {
    let windows = make_windows(frame, &config.window_spec(target))?;
    let split = split_chronological(&windows, split_fraction, true)?;
    let train = Dataset::from_windows(&split.train)?;
    let test = Dataset::from_windows(&split.test)?;
    let fitted = model.fit_dataset(&train)?;
    let pred = fitted.predict(&test.x)?;

    let observed: Vec<f64> = test.y.as_slice().to_vec();
    let metrics = MetricBundle::compute(&observed, pred.as_slice())?;
    Ok(TestRun {
        outcome: ConfigOutcome {
            metrics,
            n_train: split.train.len(),
            n_test: split.test.len(),
        },
        anchors: split.test.anchor_times.clone(),
        observed: split.test.outputs.clone(),
        predicted: pred.iter_rows().map(<[f64]>::to_vec).collect(),
    })
}

pub fn evaluate_config<R: Regressor + ?Sized>(
    frame: &AlignedFrame,
    target: &str,
    config: &ParamConfig,
    model: &R,
    split_fraction: f64,
) -> Result<ConfigOutcome> {
    run_config(frame, target, config, model, split_fraction).map(|r| r.outcome)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Scored {
        metrics: MetricBundle,
        normalized: NormalizedBundle,
        score: f64,
        n_train: usize,
        n_test: usize,
    },
    Failed(Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluatedConfig {
    pub config: ParamConfig,
    pub outcome: Outcome,
}

impl EvaluatedConfig {
    pub fn score(&self) -> Option<f64> {
        match &self.outcome {
            Outcome::Scored { score, .. } => Some(*score),
            Outcome::Failed(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Exploration {
    pub target: String,
    pub evaluated: Vec<EvaluatedConfig>,
    pub skipped: Vec<SkippedConfig>,
}

/// Normalizes the successful outcomes against each other and scores them.
/// Failed configurations take no part in the maxima.
pub fn score_outcomes(
    configs: &[ParamConfig],
    outcomes: Vec<Result<ConfigOutcome>>,
    weights: &ScoreWeights,
) -> Result<Vec<EvaluatedConfig>> {
    weights.validate()?;
    let bundles: Vec<MetricBundle> = outcomes
        .iter()
        .filter_map(|o| o.as_ref().ok().map(|o| o.metrics))
        .collect();
    if bundles.is_empty() {
        return Err(Error::AllConfigsFailed);
    }
    let mut normalized = normalize(&bundles)?.into_iter();
    configs
        .iter()
        .zip(outcomes)
        .map(|(config, outcome)| {
            let outcome = match outcome {
                Ok(o) => {
                    let nb = normalized
                        .next()
                        .expect("one normalized bundle per success");
                    Outcome::Scored {
                        metrics: o.metrics,
                        normalized: nb,
                        score: composite_score(&nb, weights)?,
                        n_train: o.n_train,
                        n_test: o.n_test,
                    }
                }
                Err(e) => Outcome::Failed(e),
            };
            Ok(EvaluatedConfig {
                config: *config,
                outcome,
            })
        })
        .collect()
}

/// Evaluates every grid configuration (in parallel), then normalizes and scores
/// them in one pass. Output order follows [`build_grid`].
pub fn explore<R: Regressor + ?Sized>(
    frame: &AlignedFrame,
    target: &str,
    grid: &ParamGrid,
    model: &R,
    weights: &ScoreWeights,
    split_fraction: f64,
) -> Result<Exploration> {
    explore_with_progress(
        frame,
        target,
        grid,
        model,
        weights,
        split_fraction,
        |_, _| {},
    )
}

pub fn explore_with_progress<R, F>(
    frame: &AlignedFrame,
    target: &str,
    grid: &ParamGrid,
    model: &R,
    weights: &ScoreWeights,
    split_fraction: f64,
    progress: F,
) -> Result<Exploration>
where
    R: Regressor + ?Sized,
    F: Fn(&ParamConfig, &Result<ConfigOutcome>) + Sync,
{
    if frame.column_index(target).is_none() {
        return Err(Error::UnknownColumn(target.to_string()));
    }
    let built = build_grid(grid, frame.step)?;
    let outcomes: Vec<Result<ConfigOutcome>> = built
        .configs
        .par_iter()
        .map(|c| {
            let o = evaluate_config(frame, target, c, model, split_fraction);
            progress(c, &o);
            o
        })
        .collect();
    Ok(Exploration {
        target: target.to_string(),
        evaluated: score_outcomes(&built.configs, outcomes, weights)?,
        skipped: built.skipped,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimalEntry {
    pub config: ParamConfig,
    pub score: f64,
}

/// Best configuration per explored horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimalSet {
    pub target: String,
    pub entries: BTreeMap<i64, OptimalEntry>,
    pub weights: ScoreWeights,
    pub model: String,
    /// Horizons that appeared in the exploration without a single success.
    pub unresolved: Vec<i64>,
}

impl OptimalSet {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// True when `a` should replace the incumbent `b`: higher score, then smaller
/// input length, then larger interval. Full ties keep the incumbent.
fn beats(a: &OptimalEntry, b: &OptimalEntry) -> bool {
    if a.score != b.score {
        return a.score > b.score;
    }
    if a.config.input_length != b.config.input_length {
        return a.config.input_length < b.config.input_length;
    }
    a.config.sample_interval > b.config.sample_interval
}

/// Per-horizon argmax of the score over the successful configurations.
pub fn select_optimal(
    target: &str,
    evaluated: &[EvaluatedConfig],
    weights: &ScoreWeights,
    model: &str,
) -> Result<OptimalSet> {
    let mut entries: BTreeMap<i64, OptimalEntry> = BTreeMap::new();
    let mut seen: Vec<i64> = vec![];
    for ev in evaluated {
        let h = ev.config.horizon;
        if !seen.contains(&h) {
            seen.push(h);
        }
        let Some(score) = ev.score() else { continue };
        let cand = OptimalEntry {
            config: ev.config,
            score,
        };
        match entries.get(&h) {
            Some(best) if !beats(&cand, best) => {}
            _ => {
                entries.insert(h, cand);
            }
        }
    }
    if entries.is_empty() {
        return Err(match seen.first() {
            Some(&h) => Error::NoSuccessfulConfig(h),
            None => Error::EmptyGrid,
        });
    }
    let unresolved = seen
        .into_iter()
        .filter(|h| !entries.contains_key(h))
        .collect();
    Ok(OptimalSet {
        target: target.to_string(),
        entries,
        weights: *weights,
        model: model.to_string(),
        unresolved,
    })
}
