//! Error metrics, leave-one-intersection-out evaluation, grid search and
//! the comparison baselines.

mod baselines;

use std::fmt::Write as _;
use std::path::Path;

use ndarray::{Array2, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use baselines::{forest_fit, knn_fit_predict, Forest, ForestConfig, KnnWeighting};

use crate::boosting::{adaboost_r2_fit, AdaBoostConfig};
use crate::error::{Error, Result};
use crate::folds::{complement, derive_seed, kfold};
use crate::io::write_json;
use crate::lasso::{select_features, FeatureSelection, LassoConfig};
use crate::schema::{design_matrix, label_vector, Counts, Dataset, Feature, Instance, Movement};
use crate::transfer::{plan_target, PipelineConfig};

fn check_pair(y: &[f64], y_hat: &[f64]) -> Result<()> {
    if y.is_empty() {
        return Err(Error::argument("metric of an empty sample"));
    }
    if y.len() != y_hat.len() {
        return Err(Error::argument(format!(
            "{} observations but {} estimates",
            y.len(),
            y_hat.len()
        )));
    }
    Ok(())
}

pub fn mae(y: &[f64], y_hat: &[f64]) -> Result<f64> {
    check_pair(y, y_hat)?;
    Ok(y.iter().zip(y_hat).map(|(a, b)| (a - b).abs()).sum::<f64>() / y.len() as f64)
}

pub fn rmse(y: &[f64], y_hat: &[f64]) -> Result<f64> {
    check_pair(y, y_hat)?;
    Ok((y.iter().zip(y_hat).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / y.len() as f64).sqrt())
}

/// What a model sees in one fold. `test` carries no labels.
pub struct FoldData<'a> {
    pub train: &'a Dataset,
    pub test: &'a Dataset,
    pub selection: &'a FeatureSelection,
    pub seed: u64,
}

pub trait ModelFactory: Sync {
    fn name(&self) -> String;

    /// Estimates for every test instance, in order.
    fn fit_predict(&self, fold: &FoldData<'_>) -> Result<Vec<Counts>>;
}

/// The full transfer pipeline.
pub struct TransferFactory {
    pub config: PipelineConfig,
}

impl ModelFactory for TransferFactory {
    fn name(&self) -> String {
        "TL".into()
    }

    fn fit_predict(&self, fold: &FoldData<'_>) -> Result<Vec<Counts>> {
        let rows: Vec<&Instance> = fold.test.instances().iter().collect();
        let config = PipelineConfig {
            seed: fold.seed,
            ..self.config
        };
        let out = plan_target(fold.train, fold.selection, &rows, &config)?;
        Ok(out.predictions.iter().map(|p| p.counts()).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Baseline {
    Knn { k: usize, weighting: KnnWeighting },
    Forest(ForestConfig),
    #[serde(rename = "adaboost_r2")]
    AdaBoost(AdaBoostConfig),
}

impl Baseline {
    pub fn name(&self) -> &'static str {
        match self {
            Baseline::Knn { .. } => "KNN",
            Baseline::Forest(_) => "RF",
            Baseline::AdaBoost(_) => "AdaBoost.R2",
        }
    }

    /// Trains on `(x, y)` and predicts `query`, clamped at zero.
    pub fn fit_predict(&self, x: ArrayView2<'_, f64>, y: &[f64], query: ArrayView2<'_, f64>, seed: u64) -> Result<Vec<f64>> {
        let raw = match self {
            Baseline::Knn { k, weighting } => knn_fit_predict(x, y, query, *k, *weighting)?,
            Baseline::Forest(config) => forest_fit(x, y, config, seed)?.predict_rows(query)?,
            Baseline::AdaBoost(config) => {
                let w = vec![1.0; y.len()];
                adaboost_r2_fit(x, y, &w, config, None)?.ensemble.predict_rows(query)?
            }
        };
        Ok(raw.into_iter().map(|v| v.max(0.0)).collect())
    }
}

/// A pooled supervised model per movement on the selected predictors.
pub struct BaselineFactory {
    pub baseline: Baseline,
}

impl ModelFactory for BaselineFactory {
    fn name(&self) -> String {
        self.baseline.name().into()
    }

    fn fit_predict(&self, fold: &FoldData<'_>) -> Result<Vec<Counts>> {
        let vars = if fold.selection.selected.is_empty() {
            Feature::ALL.to_vec()
        } else {
            fold.selection.selected.clone()
        };
        let x = design_matrix(fold.train.instances(), &vars);
        let q = design_matrix(fold.test.instances(), &vars);
        let per_movement = Movement::ALL
            .iter()
            .map(|&m| {
                let y = label_vector(fold.train.instances(), m)?;
                self.baseline
                    .fit_predict(x.view(), &y, q.view(), derive_seed(fold.seed, m.index() as u64))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((0..q.nrows())
            .map(|i| Counts {
                left: per_movement[0][i],
                through: per_movement[1][i],
                right: per_movement[2][i],
            })
            .collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    pub lasso: LassoConfig,
    pub seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            lasso: LassoConfig::default(),
            seed: 0,
        }
    }
}

/// Metrics per movement (left, through, right).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MovementMetrics {
    pub mae: [f64; 3],
    pub rmse: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntersectionResult {
    pub intersection_id: String,
    pub model: String,
    pub metrics: MovementMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub model: String,
    /// Averages over the intersections where the model succeeded.
    pub metrics: MovementMetrics,
    pub folds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldFailure {
    pub intersection_id: String,
    pub model: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub seed: u64,
    pub config: serde_json::Value,
    pub summary: Vec<SummaryRow>,
    pub per_intersection: Vec<IntersectionResult>,
    pub failures: Vec<FoldFailure>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Mae,
    Rmse,
}

impl EvalReport {
    /// Models as rows, movements as columns.
    pub fn table_csv(&self, metric: Metric) -> String {
        let mut out = String::from("model");
        for m in Movement::ALL {
            out.push(',');
            out.push_str(m.title());
        }
        out.push('\n');
        for row in &self.summary {
            let cells = match metric {
                Metric::Mae => row.metrics.mae,
                Metric::Rmse => row.metrics.rmse,
            };
            let _ = writeln!(out, "{},{:.4},{:.4},{:.4}", row.model, cells[0], cells[1], cells[2]);
        }
        out
    }

    pub fn per_intersection_csv(&self) -> String {
        let mut out = String::from("intersection_id,model,metric");
        for m in Movement::ALL {
            out.push(',');
            out.push_str(m.title());
        }
        out.push('\n');
        for r in &self.per_intersection {
            for (name, cells) in [("MAE", r.metrics.mae), ("RMSE", r.metrics.rmse)] {
                let _ = writeln!(
                    out,
                    "{},{},{name},{:.6},{:.6},{:.6}",
                    r.intersection_id, r.model, cells[0], cells[1], cells[2]
                );
            }
        }
        out
    }

    /// Writes `mae.csv`, `rmse.csv`, `per_intersection.csv` and `report.json`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("mae.csv"), self.table_csv(Metric::Mae))?;
        std::fs::write(dir.join("rmse.csv"), self.table_csv(Metric::Rmse))?;
        std::fs::write(dir.join("per_intersection.csv"), self.per_intersection_csv())?;
        write_json(self, dir.join("report.json"))
    }
}

fn score(truth: &[&Instance], estimates: &[Counts]) -> Result<MovementMetrics> {
    let mut metrics = MovementMetrics {
        mae: [0.0; 3],
        rmse: [0.0; 3],
    };
    for m in Movement::ALL {
        let y = label_vector(truth.iter().copied(), m)?;
        let y_hat: Vec<f64> = estimates.iter().map(|c| c.get(m)).collect();
        metrics.mae[m.index()] = mae(&y, &y_hat)?;
        metrics.rmse[m.index()] = rmse(&y, &y_hat)?;
    }
    Ok(metrics)
}

enum Outcome {
    Scored(IntersectionResult),
    Failed(FoldFailure),
}

/// Holds out each intersection in turn, trains every factory on the rest
/// and scores it on the held-out labels.
pub fn loio_evaluate(
    dataset: &Dataset,
    factories: &[&dyn ModelFactory],
    config: &EvalConfig,
) -> Result<EvalReport> {
    let ids = dataset.intersection_ids();
    if ids.len() < 2 {
        return Err(Error::argument("leave-one-out needs at least two intersections"));
    }
    if !dataset.is_fully_labeled() {
        return Err(Error::argument("evaluation data must be fully labeled"));
    }
    if factories.is_empty() {
        return Err(Error::argument("no models to evaluate"));
    }
    let outcomes: Vec<Vec<Outcome>> = ids
        .par_iter()
        .enumerate()
        .map(|(k, id)| {
            let (held, rest) = dataset.split_out(id);
            let fail_all = |e: Error| {
                factories
                    .iter()
                    .map(|f| {
                        Outcome::Failed(FoldFailure {
                            intersection_id: id.clone(),
                            model: f.name(),
                            error: e.to_string(),
                        })
                    })
                    .collect::<Vec<_>>()
            };
            let train = match Dataset::new(rest) {
                Ok(d) => d,
                Err(e) => return fail_all(e),
            };
            let truth = match Dataset::new(held) {
                Ok(d) => d,
                Err(e) => return fail_all(e),
            };
            let test = truth.unlabeled();
            let seed = derive_seed(config.seed, k as u64);
            let selection = match select_features(&train, &config.lasso, seed) {
                Ok(s) => s,
                Err(e) => return fail_all(e),
            };
            let fold = FoldData {
                train: &train,
                test: &test,
                selection: &selection,
                seed,
            };
            let truth_rows: Vec<&Instance> = truth.instances().iter().collect();
            factories
                .par_iter()
                .map(|f| {
                    let result = f.fit_predict(&fold).and_then(|est| {
                        if est.len() != truth_rows.len() {
                            return Err(Error::argument(format!(
                                "{} returned {} estimates for {} instances",
                                f.name(),
                                est.len(),
                                truth_rows.len()
                            )));
                        }
                        score(&truth_rows, &est)
                    });
                    match result {
                        Ok(metrics) => Outcome::Scored(IntersectionResult {
                            intersection_id: id.clone(),
                            model: f.name(),
                            metrics,
                        }),
                        Err(e) => {
                            log::warn!("{} failed on {id}: {e}", f.name());
                            Outcome::Failed(FoldFailure {
                                intersection_id: id.clone(),
                                model: f.name(),
                                error: e.to_string(),
                            })
                        }
                    }
                })
                .collect()
        })
        .collect();

    let mut per_intersection = Vec::new();
    let mut failures = Vec::new();
    for o in outcomes.into_iter().flatten() {
        match o {
            Outcome::Scored(r) => per_intersection.push(r),
            Outcome::Failed(f) => failures.push(f),
        }
    }
    let summary = factories
        .iter()
        .map(|f| {
            let name = f.name();
            let rows: Vec<&IntersectionResult> = per_intersection.iter().filter(|r| r.model == name).collect();
            let avg = |pick: fn(&MovementMetrics) -> [f64; 3]| -> [f64; 3] {
                std::array::from_fn(|m| rows.iter().map(|r| pick(&r.metrics)[m]).sum::<f64>() / rows.len() as f64)
            };
            SummaryRow {
                model: name,
                metrics: MovementMetrics {
                    mae: avg(|m| m.mae),
                    rmse: avg(|m| m.rmse),
                },
                folds: rows.len(),
            }
        })
        .collect();
    Ok(EvalReport {
        seed: config.seed,
        config: serde_json::to_value(config)?,
        summary,
        per_intersection,
        failures,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub index: usize,
    pub fold_rmse: Vec<f64>,
    pub mean_rmse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult<P> {
    pub best_index: usize,
    pub best: P,
    pub table: Vec<GridRow>,
}

/// Exhaustive K-fold search over `grid`, scored by mean fold RMSE. Ties go
/// to the earlier grid point.
pub fn grid_search<P, F>(
    fit_predict: F,
    grid: &[P],
    x: ArrayView2<'_, f64>,
    y: &[f64],
    folds: usize,
    seed: u64,
) -> Result<GridResult<P>>
where
    P: Clone + Sync,
    F: Fn(&P, ArrayView2<'_, f64>, &[f64], ArrayView2<'_, f64>) -> Result<Vec<f64>> + Sync,
{
    if grid.is_empty() {
        return Err(Error::argument("empty parameter grid"));
    }
    if y.len() != x.nrows() {
        return Err(Error::argument("rows and labels differ in count"));
    }
    let parts = kfold(y.len(), folds, seed)?;
    let splits: Vec<(Array2<f64>, Vec<f64>, Array2<f64>, Vec<f64>)> = parts
        .iter()
        .map(|held| {
            let train = complement(y.len(), held);
            (
                x.select(Axis(0), &train),
                train.iter().map(|&i| y[i]).collect(),
                x.select(Axis(0), held),
                held.iter().map(|&i| y[i]).collect(),
            )
        })
        .collect();
    let table = grid
        .par_iter()
        .enumerate()
        .map(|(index, params)| {
            let fold_rmse = splits
                .iter()
                .map(|(tx, ty, qx, qy)| rmse(qy, &fit_predict(params, tx.view(), ty, qx.view())?))
                .collect::<Result<Vec<f64>>>()?;
            let mean_rmse = fold_rmse.iter().sum::<f64>() / fold_rmse.len() as f64;
            Ok(GridRow {
                index,
                fold_rmse,
                mean_rmse,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let best_index = table
        .iter()
        .fold(0, |b, r| if r.mean_rmse < table[b].mean_rmse { r.index } else { b });
    Ok(GridResult {
        best_index,
        best: grid[best_index].clone(),
        table,
    })
}
