use std::cmp::Ordering;

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};
use crate::tree::{fit_tree_presorted, RegressionTree, SortedDesign, TreeParams};

/// Stage weight used when the very first round is already worse than
/// chance: the tree is kept with weight `ln(1 / DEGENERATE_BETA)`.
pub const DEGENERATE_BETA: f64 = 0.999;

/// Smallest maximum residual used when normalizing errors.
const RESIDUAL_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    #[default]
    Linear,
    Square,
    Exponential,
}

/// Maps absolute residuals into `[0, 1]`, relative to the largest one.
pub fn adjusted_errors(residuals: &[f64], loss: LossKind) -> Vec<f64> {
    let max = residuals.iter().fold(0.0f64, |m, &r| m.max(r)).max(RESIDUAL_FLOOR);
    residuals
        .iter()
        .map(|&r| {
            let ratio = r / max;
            match loss {
                LossKind::Linear => ratio,
                LossKind::Square => ratio * ratio,
                LossKind::Exponential => 1.0 - (-ratio).exp(),
            }
        })
        .collect()
}

/// Smallest value whose cumulative weight (values sorted ascending)
/// reaches half the total weight.
pub fn weighted_median(values: &[f64], weights: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::argument("weighted median of an empty set"));
    }
    if values.len() != weights.len() {
        return Err(Error::argument(format!(
            "{} values but {} weights",
            values.len(),
            weights.len()
        )));
    }
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(Error::argument("weights must have a positive sum"));
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap_or(Ordering::Equal));
    let half = 0.5 * total;
    let mut cumulative = 0.0;
    for &i in &order {
        cumulative += weights[i];
        if cumulative >= half {
            return Ok(values[i]);
        }
    }
    Ok(values[*order.last().expect("non-empty")])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdaBoostConfig {
    pub iterations: usize,
    pub loss: LossKind,
    pub tree: TreeParams,
}

impl Default for AdaBoostConfig {
    fn default() -> Self {
        AdaBoostConfig {
            iterations: 30,
            loss: LossKind::Linear,
            tree: TreeParams::default(),
        }
    }
}

/// Weak trees combined by weighted median.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaBoostEnsemble {
    pub trees: Vec<RegressionTree>,
    /// `ln(1 / beta)` per round.
    pub stage_log_weights: Vec<f64>,
    pub loss_kind: LossKind,
}

impl AdaBoostEnsemble {
    pub fn n_features(&self) -> usize {
        self.trees.first().map_or(0, |t| t.n_features)
    }

    /// Weighted median of the tree predictions, without clamping.
    pub fn predict_raw(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n_features() {
            return Err(Error::argument(format!(
                "model expects {} features, got {}",
                self.n_features(),
                x.len()
            )));
        }
        let preds: Vec<f64> = self.trees.iter().map(|t| t.predict_unchecked(x)).collect();
        weighted_median(&preds, &self.stage_log_weights)
    }

    /// Prediction clamped at zero.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        self.predict_raw(x).map(|v| v.max(0.0))
    }

    pub fn predict_rows(&self, x: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
        x.rows()
            .into_iter()
            .map(|row| match row.as_slice() {
                Some(s) => self.predict(s),
                None => self.predict(&row.to_vec()),
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct AdaBoostFit {
    pub ensemble: AdaBoostEnsemble,
    /// Weight vector after the last completed round.
    pub weights: Vec<f64>,
    /// The first round already had weighted error >= 0.5.
    pub degenerate: bool,
}

/// Drucker's AdaBoost.R2 with weighted (not resampled) tree fits.
///
/// With `frozen_source = Some(n)`, the first `n` weights are never touched;
/// only the remaining block is updated, then rescaled to keep its total mass.
pub fn adaboost_r2_fit(
    x: ArrayView2<'_, f64>,
    y: &[f64],
    init_weights: &[f64],
    config: &AdaBoostConfig,
    frozen_source: Option<usize>,
) -> Result<AdaBoostFit> {
    adaboost_r2_fit_presorted(x, &SortedDesign::new(x), y, init_weights, config, frozen_source)
}

pub(crate) fn adaboost_r2_fit_presorted(
    x: ArrayView2<'_, f64>,
    sorted: &SortedDesign,
    y: &[f64],
    init_weights: &[f64],
    config: &AdaBoostConfig,
    frozen_source: Option<usize>,
) -> Result<AdaBoostFit> {
    let n = x.nrows();
    if config.iterations == 0 {
        return Err(Error::argument("AdaBoost.R2 needs at least one iteration"));
    }
    if y.len() != n || init_weights.len() != n {
        return Err(Error::argument(format!(
            "dimension mismatch: {n} rows, {} targets, {} weights",
            y.len(),
            init_weights.len()
        )));
    }
    ensure_finite(init_weights, "boosting weights")?;
    if init_weights.iter().any(|&w| w < 0.0) || !(init_weights.iter().sum::<f64>() > 0.0) {
        return Err(Error::argument("weights must be nonnegative with a positive sum"));
    }
    let frozen = match frozen_source {
        Some(s) if s > n => {
            return Err(Error::argument(format!(
                "frozen source block of {s} exceeds {n} instances"
            )))
        }
        Some(s) => s,
        None => 0,
    };

    let mut weights = init_weights.to_vec();
    if frozen_source.is_none() {
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
    }

    let mut trees = Vec::with_capacity(config.iterations);
    let mut stage_log_weights = Vec::with_capacity(config.iterations);
    let mut degenerate = false;

    for round in 0..config.iterations {
        let tree = fit_tree_presorted(x, y, &weights, &config.tree, sorted)?;
        let residuals: Vec<f64> = tree
            .predict_rows(x)?
            .iter()
            .zip(y)
            .map(|(p, t)| (p - t).abs())
            .collect();
        let errors = adjusted_errors(&residuals, config.loss);
        let total: f64 = weights.iter().sum();
        let mean_error = weights.iter().zip(&errors).map(|(w, e)| w * e).sum::<f64>() / total;

        if mean_error <= 0.0 {
            if trees.is_empty() {
                trees.push(tree);
                stage_log_weights.push(1.0);
            }
            break;
        }
        if mean_error >= 0.5 {
            if round == 0 {
                log::warn!("first AdaBoost.R2 round has weighted error {mean_error:.4} >= 0.5");
                trees.push(tree);
                stage_log_weights.push((1.0 / DEGENERATE_BETA).ln());
                degenerate = true;
            }
            break;
        }

        let beta = mean_error / (1.0 - mean_error);
        trees.push(tree);
        stage_log_weights.push((1.0 / beta).ln());

        let updatable = frozen..n;
        let before: f64 = weights[updatable.clone()].iter().sum();
        for i in updatable.clone() {
            weights[i] *= beta.powf(1.0 - errors[i]);
        }
        let after: f64 = weights[updatable.clone()].iter().sum();
        if after > 0.0 {
            let scale = if frozen_source.is_some() { before / after } else { 1.0 / after };
            for i in updatable {
                weights[i] *= scale;
            }
        }
    }

    Ok(AdaBoostFit {
        ensemble: AdaBoostEnsemble {
            trees,
            stage_log_weights,
            loss_kind: config.loss,
        },
        weights,
        degenerate,
    })
}
