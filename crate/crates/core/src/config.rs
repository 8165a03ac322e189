//! Flat `key = value` run configuration with dotted keys.
//!
//! ```text
//! # comments start with '#'
//! ingest.sample_interval = 1m
//! grid.horizons = 5m,10m,20m
//! targets = pm25,no2
//! ```
//!
//! Durations accept a bare number of seconds or a `s`/`m`/`h`/`d` suffix.

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::estimator::{EstimatorConfig, EstimatorKind, DEFAULT_VALIDATION_HORIZONS_MIN};
use crate::explorer::ParamGrid;
use crate::ingest::DEFAULT_EPSILON;
use crate::metrics::ScoreWeights;
use crate::models::{RegressorKind, RegressorSpec};

/// Ingest settings. Unset window bounds default to the extent of the input.
#[derive(Debug, Clone, PartialEq)]
pub struct IngestSettings {
    pub t_end: Option<i64>,
    pub delta_t: Option<i64>,
    pub sample_interval: i64,
    pub epsilon: f64,
    pub relevant_types: BTreeSet<String>,
}

impl Default for IngestSettings {
    fn default() -> Self {
        Self {
            t_end: None,
            delta_t: None,
            sample_interval: 60,
            epsilon: DEFAULT_EPSILON,
            relevant_types: BTreeSet::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub ingest: IngestSettings,
    pub grid: ParamGrid,
    pub weights: ScoreWeights,
    pub model: RegressorSpec,
    pub estimator: EstimatorConfig,
    /// Empty means every frame column.
    pub targets: Vec<String>,
    pub split_fraction: f64,
    pub validation_horizons: Vec<i64>,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            ingest: IngestSettings::default(),
            grid: ParamGrid::default(),
            weights: ScoreWeights::default(),
            model: RegressorSpec::default(),
            estimator: EstimatorConfig::default(),
            targets: vec![],
            split_fraction: 0.8,
            validation_horizons: DEFAULT_VALIDATION_HORIZONS_MIN
                .iter()
                .map(|m| m * 60)
                .collect(),
            output_dir: PathBuf::from("out"),
        }
    }
}

pub const KEYS: [&str; 27] = [
    "ingest.t_end",
    "ingest.delta_t",
    "ingest.sample_interval",
    "ingest.epsilon",
    "ingest.relevant_types",
    "grid.horizons",
    "grid.divisors",
    "grid.multipliers",
    "weights.w1",
    "weights.w2",
    "weights.w3",
    "weights.w4",
    "model.kind",
    "model.knn_k",
    "model.tree_max_depth",
    "model.tree_min_leaf",
    "model.ridge_lambda",
    "estimator.kind",
    "estimator.poly_degree",
    "estimator.alpha",
    "estimator.knn_k",
    "estimator.min_samples",
    "targets",
    "split_fraction",
    "validation.horizons",
    "output_dir",
    // accepted for symmetry with the CLI flag; built-ins are deterministic
    "seed",
];

pub fn parse_duration(s: &str) -> Result<i64> {
    let s = s.trim();
    let (num, mult) = match s.char_indices().last() {
        Some((i, 's')) => (&s[..i], 1),
        Some((i, 'm')) => (&s[..i], 60),
        Some((i, 'h')) => (&s[..i], 3600),
        Some((i, 'd')) => (&s[..i], 86_400),
        _ => (s, 1),
    };
    num.trim()
        .parse::<i64>()
        .ok()
        .and_then(|v| v.checked_mul(mult))
        .ok_or_else(|| Error::InvalidConfig(format!("bad duration '{s}'")))
}

fn parse_list<T>(s: &str, f: impl Fn(&str) -> Result<T>) -> Result<Vec<T>> {
    s.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(f)
        .collect()
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim()
        .parse()
        .map_err(|_| Error::InvalidConfig(format!("{key}: bad value '{v}'")))
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(",")
}

impl RunConfig {
    /// Parses configuration text on top of the defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: n + 1,
                message: format!("expected key = value, got '{line}'"),
            })?;
            self.set(k.trim(), v.trim()).map_err(|e| Error::Parse {
                line: n + 1,
                message: e.to_string(),
            })?;
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        match key {
            "ingest.t_end" => self.ingest.t_end = Some(parse_num(key, v)?),
            "ingest.delta_t" => self.ingest.delta_t = Some(parse_duration(v)?),
            "ingest.sample_interval" => self.ingest.sample_interval = parse_duration(v)?,
            "ingest.epsilon" => self.ingest.epsilon = parse_num(key, v)?,
            "ingest.relevant_types" => {
                self.ingest.relevant_types =
                    parse_list(v, |s| Ok(s.to_string()))?.into_iter().collect()
            }
            "grid.horizons" => self.grid.horizons = parse_list(v, parse_duration)?,
            "grid.divisors" => self.grid.interval_divisors = parse_list(v, |s| parse_num(key, s))?,
            "grid.multipliers" => {
                self.grid.input_multipliers = parse_list(v, |s| parse_num(key, s))?
            }
            "weights.w1" => self.weights.w1 = parse_num(key, v)?,
            "weights.w2" => self.weights.w2 = parse_num(key, v)?,
            "weights.w3" => self.weights.w3 = parse_num(key, v)?,
            "weights.w4" => self.weights.w4 = parse_num(key, v)?,
            "model.kind" => self.model.kind = v.parse::<RegressorKind>()?,
            "model.knn_k" => self.model.knn_k = parse_num(key, v)?,
            "model.tree_max_depth" => self.model.tree_max_depth = parse_num(key, v)?,
            "model.tree_min_leaf" => self.model.tree_min_leaf = parse_num(key, v)?,
            "model.ridge_lambda" => self.model.ridge_lambda = parse_num(key, v)?,
            "estimator.kind" => self.estimator.kind = v.parse::<EstimatorKind>()?,
            "estimator.poly_degree" => self.estimator.poly_degree = parse_num(key, v)?,
            "estimator.alpha" => self.estimator.alpha = parse_num(key, v)?,
            "estimator.knn_k" => self.estimator.knn_k = parse_num(key, v)?,
            "estimator.min_samples" => self.estimator.min_samples = parse_num(key, v)?,
            "targets" => self.targets = parse_list(v, |s| Ok(s.to_string()))?,
            "split_fraction" => self.split_fraction = parse_num(key, v)?,
            "validation.horizons" => self.validation_horizons = parse_list(v, parse_duration)?,
            "output_dir" => self.output_dir = PathBuf::from(v),
            "seed" => {
                parse_num::<u64>(key, v)?;
            }
            _ => return Err(Error::InvalidConfig(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.ingest.sample_interval <= 0 {
            return Err(Error::InvalidConfig(
                "ingest.sample_interval must be positive".into(),
            ));
        }
        if self.ingest.delta_t.is_some_and(|d| d <= 0) {
            return Err(Error::InvalidConfig(
                "ingest.delta_t must be positive".into(),
            ));
        }
        self.grid.validate()?;
        self.weights.validate()?;
        self.model.validate()?;
        self.estimator.validate()?;
        if !(self.split_fraction > 0.0 && self.split_fraction < 1.0) {
            return Err(Error::InvalidConfig(
                "split_fraction must lie in (0, 1)".into(),
            ));
        }
        if self.validation_horizons.iter().any(|&h| h <= 0) {
            return Err(Error::InvalidConfig(
                "validation horizons must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Every setting that influences artifacts, one `key=value` per line in
    /// key order. The output directory is excluded so relocated runs share a
    /// digest.
    pub fn canonical(&self) -> String {
        let mut m: BTreeMap<&str, String> = BTreeMap::new();
        let i = &self.ingest;
        m.insert(
            "ingest.t_end",
            i.t_end.map(|v| v.to_string()).unwrap_or_default(),
        );
        m.insert(
            "ingest.delta_t",
            i.delta_t.map(|v| v.to_string()).unwrap_or_default(),
        );
        m.insert("ingest.sample_interval", i.sample_interval.to_string());
        m.insert("ingest.epsilon", i.epsilon.to_string());
        m.insert(
            "ingest.relevant_types",
            join(&i.relevant_types.iter().collect::<Vec<_>>()),
        );
        m.insert("grid.horizons", join(&self.grid.horizons));
        m.insert("grid.divisors", join(&self.grid.interval_divisors));
        m.insert("grid.multipliers", join(&self.grid.input_multipliers));
        let w = &self.weights;
        for (k, v) in [
            ("weights.w1", w.w1),
            ("weights.w2", w.w2),
            ("weights.w3", w.w3),
            ("weights.w4", w.w4),
        ] {
            m.insert(k, v.to_string());
        }
        let s = &self.model;
        m.insert("model.kind", s.kind.to_string());
        m.insert("model.knn_k", s.knn_k.to_string());
        m.insert("model.tree_max_depth", s.tree_max_depth.to_string());
        m.insert("model.tree_min_leaf", s.tree_min_leaf.to_string());
        m.insert("model.ridge_lambda", s.ridge_lambda.to_string());
        let e = &self.estimator;
        m.insert("estimator.kind", e.kind.to_string());
        m.insert("estimator.poly_degree", e.poly_degree.to_string());
        m.insert("estimator.alpha", e.alpha.to_string());
        m.insert("estimator.knn_k", e.knn_k.to_string());
        m.insert("estimator.min_samples", e.min_samples.to_string());
        m.insert("targets", join(&self.targets));
        m.insert("split_fraction", self.split_fraction.to_string());
        m.insert("validation.horizons", join(&self.validation_horizons));
        m.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.canonical().as_bytes()))
    }
}
