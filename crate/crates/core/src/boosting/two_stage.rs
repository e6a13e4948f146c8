use ndarray::{concatenate, Array2, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::adaboost::{adaboost_r2_fit_presorted, adjusted_errors, AdaBoostConfig, AdaBoostEnsemble};
use crate::error::{ensure_finite, Error, Result};
use crate::folds::{complement, kfold};
use crate::tree::{fit_tree_presorted, SortedDesign};

/// Bisection stops once the achieved target mass is this close to the goal.
pub const MASS_TOLERANCE: f64 = 1e-8;

const MAX_BISECTIONS: usize = 200;
const SLACK: f64 = 1e-12;

/// Source errors below this count as zero when solving for beta.
pub const ERROR_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TwoStageConfig {
    pub steps: usize,
    pub folds: usize,
    pub boost: AdaBoostConfig,
    pub seed: u64,
}

impl Default for TwoStageConfig {
    fn default() -> Self {
        TwoStageConfig {
            steps: 10,
            folds: 5,
            boost: AdaBoostConfig::default(),
            seed: 0,
        }
    }
}

impl TwoStageConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::argument("steps must be at least 1"));
        }
        if self.folds < 2 {
            return Err(Error::argument("folds must be at least 2"));
        }
        if self.boost.iterations == 0 {
            return Err(Error::argument("boosting iterations must be at least 1"));
        }
        self.boost.tree.validate()
    }
}

/// Source rows stacked above target rows.
#[derive(Debug, Clone)]
pub struct Pool {
    pub x: Array2<f64>,
    pub y: Vec<f64>,
    pub n_source: usize,
}

impl Pool {
    pub fn new(
        source_x: ArrayView2<'_, f64>,
        source_y: &[f64],
        target_x: ArrayView2<'_, f64>,
        target_y: &[f64],
    ) -> Result<Pool> {
        if source_x.nrows() != source_y.len() || target_x.nrows() != target_y.len() {
            return Err(Error::argument("row and label counts differ"));
        }
        if source_x.ncols() != target_x.ncols() {
            return Err(Error::argument(format!(
                "source has {} features, target has {}",
                source_x.ncols(),
                target_x.ncols()
            )));
        }
        let x = concatenate(Axis(0), &[source_x, target_x])
            .map_err(|e| Error::argument(e.to_string()))?;
        let mut y = source_y.to_vec();
        y.extend_from_slice(target_y);
        ensure_finite(&y, "labels")?;
        Ok(Pool {
            x,
            y,
            n_source: source_y.len(),
        })
    }

    pub fn n_target(&self) -> usize {
        self.y.len() - self.n_source
    }
}

/// Target share of the total weight after step `t` (zero-based).
pub fn target_fraction(n_source: usize, n_target: usize, steps: usize, t: usize) -> f64 {
    let (n, m) = (n_source as f64, n_target as f64);
    if steps <= 1 {
        return m / (n + m);
    }
    (m + n * t as f64 / (steps - 1) as f64) / (n + m)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaSolution {
    /// `ln(beta)`; negative infinity zeroes the whole source block.
    pub log_beta: f64,
    /// No beta in (0, 1] reaches the requested mass. When some source rows
    /// have nonzero error the limit `f64::MIN` is returned, which keeps only
    /// the zero-error source rows.
    pub degenerate: bool,
}

impl BetaSolution {
    pub fn beta(&self) -> f64 {
        self.log_beta.exp()
    }
}

fn target_mass(weights: &[f64], n_source: usize, errors: &[f64], u: f64) -> f64 {
    let target: f64 = weights[n_source..].iter().sum();
    let source: f64 = weights[..n_source]
        .iter()
        .zip(errors)
        .map(|(w, e)| if *e == 0.0 { *w } else { w * (e * u).exp() })
        .sum();
    target / (target + source)
}

/// Finds the source down-weighting factor so that, after
/// [`update_weights`], the target block holds `fraction` of the mass.
pub fn solve_beta(
    weights: &[f64],
    n_source: usize,
    source_errors: &[f64],
    fraction: f64,
) -> Result<BetaSolution> {
    if n_source > weights.len() || source_errors.len() != n_source {
        return Err(Error::argument("source block does not match the weight vector"));
    }
    let current = target_mass(weights, n_source, source_errors, 0.0);
    if !(fraction >= current - SLACK && fraction <= 1.0 + SLACK) {
        return Err(Error::argument(format!(
            "target fraction {fraction} outside [{current}, 1]"
        )));
    }
    let identity = BetaSolution {
        log_beta: 0.0,
        degenerate: false,
    };
    if n_source == 0 || fraction <= current + SLACK {
        return Ok(identity);
    }
    if fraction >= 1.0 {
        return Ok(BetaSolution {
            log_beta: f64::NEG_INFINITY,
            degenerate: false,
        });
    }
    let movable = weights[..n_source]
        .iter()
        .zip(source_errors)
        .any(|(w, e)| *w > 0.0 && *e > 0.0);
    if !movable {
        return Ok(BetaSolution {
            degenerate: true,
            ..identity
        });
    }

    // As beta goes to zero only rows with e = 0 keep their source weight.
    let target: f64 = weights[n_source..].iter().sum();
    let stuck: f64 = weights[..n_source]
        .iter()
        .zip(source_errors)
        .filter(|(_, e)| **e == 0.0)
        .map(|(w, _)| *w)
        .sum();
    if target / (target + stuck) < fraction - MASS_TOLERANCE {
        log::warn!("target fraction {fraction} unreachable with a positive beta");
        return Ok(BetaSolution {
            log_beta: f64::MIN,
            degenerate: true,
        });
    }
    let mut hi = 0.0;
    let mut lo = -1.0;
    while target_mass(weights, n_source, source_errors, lo) < fraction && lo > f64::MIN / 2.0 {
        hi = lo;
        lo *= 2.0;
    }
    let mut mid = lo;
    for _ in 0..MAX_BISECTIONS {
        mid = 0.5 * (lo + hi);
        let mass = target_mass(weights, n_source, source_errors, mid);
        if (mass - fraction).abs() <= MASS_TOLERANCE {
            break;
        }
        if mass < fraction {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(BetaSolution {
        log_beta: mid,
        degenerate: false,
    })
}

/// Multiplies source weights by `beta^e`, leaves target weights, renormalizes.
pub fn update_weights(
    weights: &[f64],
    n_source: usize,
    source_errors: &[f64],
    log_beta: f64,
) -> Vec<f64> {
    let mut next = weights.to_vec();
    for (i, w) in next[..n_source].iter_mut().enumerate() {
        if log_beta == f64::NEG_INFINITY {
            *w = 0.0;
        } else if source_errors[i] != 0.0 {
            *w *= (source_errors[i] * log_beta).exp();
        }
    }
    let total: f64 = next.iter().sum();
    next.iter_mut().for_each(|w| *w /= total);
    next
}

/// One boosted model per outer step; prediction uses the one with the
/// lowest cross-validated error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrAModel {
    pub stage_models: Vec<AdaBoostEnsemble>,
    pub stage_errors: Vec<f64>,
    pub chosen_stage: usize,
    pub config: TwoStageConfig,
}

impl TrAModel {
    pub fn chosen(&self) -> &AdaBoostEnsemble {
        &self.stage_models[self.chosen_stage]
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        self.chosen().predict(x)
    }

    pub fn predict_rows(&self, x: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
        self.chosen().predict_rows(x)
    }
}

#[derive(Debug, Clone)]
pub struct StageTrace {
    pub target_fraction: f64,
    pub log_beta: f64,
    pub degenerate: bool,
    /// Weights after this step's update.
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct TwoStageFit {
    pub model: TrAModel,
    pub trace: Vec<StageTrace>,
}

fn rows(x: &Array2<f64>, idx: &[usize]) -> Array2<f64> {
    x.select(Axis(0), idx)
}

/// One cross-validation split of the target block, fixed across steps.
struct Fold {
    train: Vec<usize>,
    held: Vec<usize>,
    x: Array2<f64>,
    y: Vec<f64>,
    sorted: SortedDesign,
    held_x: Array2<f64>,
}

impl Fold {
    fn new(pool: &Pool, target_fold: &[usize]) -> Fold {
        let (n, m) = (pool.n_source, pool.n_target());
        let mut train: Vec<usize> = (0..n).collect();
        train.extend(complement(m, target_fold).into_iter().map(|i| n + i));
        let held: Vec<usize> = target_fold.iter().map(|i| n + i).collect();
        let x = rows(&pool.x, &train);
        Fold {
            y: train.iter().map(|&i| pool.y[i]).collect(),
            sorted: SortedDesign::new(x.view()),
            held_x: rows(&pool.x, &held),
            x,
            train,
            held,
        }
    }

    fn rmse(&self, pool: &Pool, weights: &[f64], boost: &AdaBoostConfig) -> Result<f64> {
        let w: Vec<f64> = self.train.iter().map(|&i| weights[i]).collect();
        if !w.iter().any(|&v| v > 0.0) {
            return Ok(f64::INFINITY);
        }
        let fit = adaboost_r2_fit_presorted(self.x.view(), &self.sorted, &self.y, &w, boost, Some(pool.n_source))?;
        let pred = fit.ensemble.predict_rows(self.held_x.view())?;
        let sse: f64 = pred
            .iter()
            .zip(&self.held)
            .map(|(p, &i)| (p - pool.y[i]).powi(2))
            .sum();
        Ok((sse / self.held.len() as f64).sqrt())
    }
}

fn cv_error(pool: &Pool, weights: &[f64], folds: &[Fold], boost: &AdaBoostConfig) -> Result<f64> {
    let rmses = folds
        .par_iter()
        .map(|f| f.rmse(pool, weights, boost))
        .collect::<Result<Vec<f64>>>()?;
    Ok(rmses.iter().sum::<f64>() / rmses.len() as f64)
}

/// Two-stage TrAdaBoost.R2 over a source-then-target pool.
pub fn two_stage_fit(pool: &Pool, config: &TwoStageConfig) -> Result<TwoStageFit> {
    config.validate()?;
    let (n, m) = (pool.n_source, pool.n_target());
    if m == 0 {
        return Err(Error::argument("the target block is empty"));
    }
    if pool.x.iter().any(|v| !v.is_finite()) {
        return Err(Error::numeric("features contain non-finite values"));
    }

    // Fewer target rows than folds: leave one out.
    let partition = match config.folds.min(m) {
        1 => vec![vec![0]],
        k => kfold(m, k, config.seed)?,
    };
    let folds: Vec<Fold> = partition
        .iter()
        .map(|f| Fold::new(pool, f))
        .collect();
    let sorted = SortedDesign::new(pool.x.view());
    let mut weights = vec![1.0 / (n + m) as f64; n + m];
    let mut stage_models = Vec::with_capacity(config.steps);
    let mut stage_errors = Vec::with_capacity(config.steps);
    let mut trace = Vec::with_capacity(config.steps);

    for t in 0..config.steps {
        let fraction = target_fraction(n, m, config.steps, t);
        let tree = fit_tree_presorted(pool.x.view(), &pool.y, &weights, &config.boost.tree, &sorted)?;
        let residuals: Vec<f64> = tree
            .predict_rows(pool.x.view())?
            .iter()
            .zip(&pool.y)
            .map(|(p, y)| (p - y).abs())
            .collect();
        let mut errors = adjusted_errors(&residuals, config.boost.loss);
        // Rounding-level errors would otherwise demand an astronomically small beta.
        errors.iter_mut().filter(|e| **e < ERROR_FLOOR).for_each(|e| *e = 0.0);
        let solution = solve_beta(&weights, n, &errors[..n], fraction.min(1.0))?;
        weights = update_weights(&weights, n, &errors[..n], solution.log_beta);
        log::debug!(
            "step {t}: target fraction {fraction:.4}, log beta {:.4}",
            solution.log_beta
        );

        stage_errors.push(cv_error(pool, &weights, &folds, &config.boost)?);
        let fit = adaboost_r2_fit_presorted(pool.x.view(), &sorted, &pool.y, &weights, &config.boost, Some(n))?;
        stage_models.push(fit.ensemble);
        trace.push(StageTrace {
            target_fraction: fraction,
            log_beta: solution.log_beta,
            degenerate: solution.degenerate,
            weights: weights.clone(),
        });
    }

    let chosen_stage = stage_errors
        .iter()
        .enumerate()
        .fold(0, |best, (i, e)| if *e < stage_errors[best] { i } else { best });
    if !stage_errors[chosen_stage].is_finite() {
        return Err(Error::numeric("cross-validated stage errors are not finite"));
    }
    Ok(TwoStageFit {
        model: TrAModel {
            stage_models,
            stage_errors,
            chosen_stage,
            config: *config,
        },
        trace,
    })
}
