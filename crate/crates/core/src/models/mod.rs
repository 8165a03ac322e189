//! Pluggable regressors trained on flattened window pairs.
//!
//! [`Regressor`] is the extension point the explorer trains against. The
//! built-in [`RegressorSpec`] covers k-nearest neighbours, (ridge) least
//! squares and a CART regression tree, all deterministic.

mod knn;
mod linear;
mod tree;

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::windowing::WindowSet;

pub use knn::KnnModel;
pub use linear::LinearModel;
pub use tree::{RegressionTree, TreeModel};

/// Feature matrix (one flattened input window per row) and multi-output targets.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: Matrix,
    pub y: Matrix,
}

impl Dataset {
    pub fn new(x: Matrix, y: Matrix) -> Result<Self> {
        if x.rows() == 0 {
            return Err(Error::EmptyTrainingSet);
        }
        if x.rows() != y.rows() {
            return Err(Error::ShapeMismatch {
                expected: x.rows(),
                got: y.rows(),
            });
        }
        if x.as_slice()
            .iter()
            .chain(y.as_slice())
            .any(|v| !v.is_finite())
        {
            return Err(Error::InvalidRegressor(
                "dataset contains non-finite values".into(),
            ));
        }
        Ok(Self { x, y })
    }

    /// Inputs are already time-major flattened by the windowing stage.
    pub fn from_windows(w: &WindowSet) -> Result<Self> {
        if w.is_empty() {
            return Err(Error::EmptyTrainingSet);
        }
        Self::new(
            Matrix::from_rows(&w.inputs)?,
            Matrix::from_rows(&w.outputs)?,
        )
    }

    pub fn n_samples(&self) -> usize {
        self.x.rows()
    }

    pub fn n_features(&self) -> usize {
        self.x.cols()
    }

    pub fn n_outputs(&self) -> usize {
        self.y.cols()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RegressorKind {
    Knn,
    Linear,
    Tree,
}

impl fmt::Display for RegressorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RegressorKind::Knn => "knn",
            RegressorKind::Linear => "linear",
            RegressorKind::Tree => "tree",
        })
    }
}

impl FromStr for RegressorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "knn" => Ok(RegressorKind::Knn),
            "linear" => Ok(RegressorKind::Linear),
            "tree" => Ok(RegressorKind::Tree),
            other => Err(Error::InvalidRegressor(format!(
                "unknown model kind `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressorSpec {
    pub kind: RegressorKind,
    pub knn_k: usize,
    pub tree_max_depth: usize,
    pub tree_min_leaf: usize,
    pub ridge_lambda: f64,
}

impl Default for RegressorSpec {
    fn default() -> Self {
        Self {
            kind: RegressorKind::Knn,
            knn_k: 5,
            tree_max_depth: 8,
            tree_min_leaf: 5,
            ridge_lambda: 0.0,
        }
    }
}

impl RegressorSpec {
    pub fn knn(k: usize) -> Self {
        Self {
            kind: RegressorKind::Knn,
            knn_k: k,
            ..Default::default()
        }
    }

    pub fn linear(ridge_lambda: f64) -> Self {
        Self {
            kind: RegressorKind::Linear,
            ridge_lambda,
            ..Default::default()
        }
    }

    pub fn tree(max_depth: usize, min_leaf: usize) -> Self {
        Self {
            kind: RegressorKind::Tree,
            tree_max_depth: max_depth,
            tree_min_leaf: min_leaf,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.knn_k == 0 {
            return Err(Error::InvalidRegressor("knn_k must be at least 1".into()));
        }
        if self.tree_max_depth == 0 || self.tree_min_leaf == 0 {
            return Err(Error::InvalidRegressor(
                "tree depth and leaf size must be at least 1".into(),
            ));
        }
        if !(self.ridge_lambda >= 0.0 && self.ridge_lambda.is_finite()) {
            return Err(Error::InvalidRegressor("ridge_lambda must be >= 0".into()));
        }
        Ok(())
    }
}

/// A trained model.
pub trait Predictor: Send + Sync {
    fn n_features(&self) -> usize;
    fn n_outputs(&self) -> usize;
    fn predict(&self, x: &Matrix) -> Result<Matrix>;
}

/// Anything that can be trained on a [`Dataset`].
pub trait Regressor: Send + Sync {
    fn label(&self) -> String;
    fn fit_dataset(&self, train: &Dataset) -> Result<Box<dyn Predictor>>;
}

#[derive(Debug, Clone)]
enum State {
    Knn(KnnModel),
    Linear(LinearModel),
    Tree(TreeModel),
}

#[derive(Debug, Clone)]
pub struct FittedModel {
    pub spec: RegressorSpec,
    pub n_features: usize,
    pub n_outputs: usize,
    state: State,
}

pub fn fit(spec: &RegressorSpec, train: &Dataset) -> Result<FittedModel> {
    spec.validate()?;
    if train.n_samples() == 0 {
        return Err(Error::EmptyTrainingSet);
    }
    let state = match spec.kind {
        RegressorKind::Knn => State::Knn(KnnModel::fit(train, spec.knn_k)?),
        RegressorKind::Linear => State::Linear(LinearModel::fit(train, spec.ridge_lambda)?),
        RegressorKind::Tree => State::Tree(TreeModel::fit(
            train,
            spec.tree_max_depth,
            spec.tree_min_leaf,
        )?),
    };
    Ok(FittedModel {
        spec: spec.clone(),
        n_features: train.n_features(),
        n_outputs: train.n_outputs(),
        state,
    })
}

pub fn predict(model: &FittedModel, x: &Matrix) -> Result<Matrix> {
    if x.cols() != model.n_features {
        return Err(Error::ShapeMismatch {
            expected: model.n_features,
            got: x.cols(),
        });
    }
    match &model.state {
        State::Knn(m) => m.predict(x),
        State::Linear(m) => m.predict(x),
        State::Tree(m) => m.predict(x),
    }
}

impl Predictor for FittedModel {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn n_outputs(&self) -> usize {
        self.n_outputs
    }

    fn predict(&self, x: &Matrix) -> Result<Matrix> {
        predict(self, x)
    }
}

impl Regressor for RegressorSpec {
    fn label(&self) -> String {
        self.kind.to_string()
    }

    fn fit_dataset(&self, train: &Dataset) -> Result<Box<dyn Predictor>> {
        Ok(Box::new(fit(self, train)?))
    }
}

/// Per-feature z-scoring fitted on the training split only.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Standardizer {
    mean: Vec<f64>,
    inv_std: Vec<f64>,
}

impl Standardizer {
    pub(crate) fn fit(x: &Matrix) -> Self {
        let (n, p) = (x.rows() as f64, x.cols());
        let mut mean = vec![0.0; p];
        for row in x.iter_rows() {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; p];
        for row in x.iter_rows() {
            for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let inv_std = var
            .into_iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd > 1e-12 {
                    1.0 / sd
                } else {
                    1.0
                }
            })
            .collect();
        Self { mean, inv_std }
    }

    pub(crate) fn apply_row(&self, row: &[f64], out: &mut [f64]) {
        for (j, v) in row.iter().enumerate() {
            out[j] = (v - self.mean[j]) * self.inv_std[j];
        }
    }

    pub(crate) fn apply(&self, x: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(x.rows(), x.cols());
        for r in 0..x.rows() {
            self.apply_row(x.row(r), out.row_mut(r));
        }
        out
    }
}
