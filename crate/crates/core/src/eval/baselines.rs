use ndarray::ArrayView2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::folds::derive_seed;
use crate::tree::{fit_tree_presorted, fit_tree_sampled, FeatureSampler, RegressionTree, SortedDesign, TreeParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KnnWeighting {
    #[default]
    Uniform,
    InverseDistance,
}

/// Column means and population standard deviations; zero-spread columns
/// get a scale of 0 and drop out of the distance.
fn z_scaler(x: ArrayView2<'_, f64>) -> (Vec<f64>, Vec<f64>) {
    let n = x.nrows() as f64;
    x.columns()
        .into_iter()
        .map(|c| {
            let m = c.sum() / n;
            let sd = (c.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n).sqrt();
            (m, if sd > 0.0 { 1.0 / sd } else { 0.0 })
        })
        .unzip()
}

/// K-nearest-neighbour regression under Euclidean distance on features
/// z-scored with training statistics. Distance ties go to the earlier
/// training row.
pub fn knn_fit_predict(
    train_x: ArrayView2<'_, f64>,
    train_y: &[f64],
    query_x: ArrayView2<'_, f64>,
    k: usize,
    weighting: KnnWeighting,
) -> Result<Vec<f64>> {
    let n = train_x.nrows();
    if train_y.len() != n {
        return Err(Error::argument("training rows and labels differ in count"));
    }
    if k == 0 || k > n {
        return Err(Error::argument(format!("k = {k} outside 1..={n}")));
    }
    if query_x.ncols() != train_x.ncols() {
        return Err(Error::argument("query and training predictor counts differ"));
    }
    let (mean, inv) = z_scaler(train_x);
    let scale = |row: ndarray::ArrayView1<'_, f64>| -> Vec<f64> {
        row.iter().zip(&mean).zip(&inv).map(|((v, m), s)| (v - m) * s).collect()
    };
    let train: Vec<Vec<f64>> = train_x.rows().into_iter().map(scale).collect();
    let queries: Vec<Vec<f64>> = query_x.rows().into_iter().map(scale).collect();
    Ok(queries
        .par_iter()
        .map(|q| {
            let mut d: Vec<(f64, usize)> = train
                .iter()
                .enumerate()
                .map(|(i, t)| (t.iter().zip(q).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt(), i))
                .collect();
            let by = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
            if k < n {
                d.select_nth_unstable_by(k - 1, by);
            }
            let near = &d[..k];
            match weighting {
                KnnWeighting::Uniform => near.iter().map(|&(_, i)| train_y[i]).sum::<f64>() / k as f64,
                KnnWeighting::InverseDistance => {
                    let exact: Vec<f64> = near.iter().filter(|p| p.0 == 0.0).map(|&(_, i)| train_y[i]).collect();
                    if !exact.is_empty() {
                        exact.iter().sum::<f64>() / exact.len() as f64
                    } else {
                        let w: f64 = near.iter().map(|p| 1.0 / p.0).sum();
                        near.iter().map(|&(dist, i)| train_y[i] / dist).sum::<f64>() / w
                    }
                }
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub tree: TreeParams,
    /// Share of predictors considered at each split.
    pub feature_fraction: f64,
    pub bootstrap: bool,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_trees: 100,
            tree: TreeParams {
                max_depth: 8,
                min_samples_leaf: 2,
                ..TreeParams::default()
            },
            feature_fraction: 1.0 / 3.0,
            bootstrap: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub trees: Vec<RegressionTree>,
}

impl Forest {
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        let mut sum = 0.0;
        for t in &self.trees {
            sum += t.predict(x)?;
        }
        Ok(sum / self.trees.len() as f64)
    }

    pub fn predict_rows(&self, x: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
        x.rows().into_iter().map(|r| self.predict(&r.to_vec())).collect()
    }
}

/// Bagged regression trees; bootstrap draws enter as integer row weights.
pub fn forest_fit(x: ArrayView2<'_, f64>, y: &[f64], config: &ForestConfig, seed: u64) -> Result<Forest> {
    if config.n_trees == 0 {
        return Err(Error::argument("a forest needs at least one tree"));
    }
    if !(config.feature_fraction > 0.0 && config.feature_fraction <= 1.0) {
        return Err(Error::argument("feature fraction outside (0, 1]"));
    }
    let (n, p) = x.dim();
    let per_split = ((config.feature_fraction * p as f64).ceil() as usize).clamp(1, p.max(1));
    let sorted = SortedDesign::new(x);
    let trees = (0..config.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, t as u64));
            let mut w = vec![0.0; n];
            if config.bootstrap {
                for _ in 0..n {
                    w[rng.random_range(0..n)] += 1.0;
                }
            } else {
                w.fill(1.0);
            }
            if per_split >= p {
                fit_tree_presorted(x, y, &w, &config.tree, &sorted)
            } else {
                let sampler = FeatureSampler { per_split, rng: &mut rng };
                fit_tree_sampled(x, y, &w, &config.tree, sampler, Some(&sorted))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Forest { trees })
}
