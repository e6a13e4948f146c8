//! Source-to-target transfer: feature selection, intersection matching,
//! substitution of target-like source instances, and per-movement
//! two-stage TrAdaBoost.R2 training.

use std::collections::BTreeMap;

use ndarray::{Array2, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::boosting::{two_stage_fit, Pool, TrAModel, TwoStageConfig};
use crate::error::{Error, Result};
use crate::folds::derive_seed;
use crate::lasso::{select_features, FeatureSelection, LassoConfig};
use crate::schema::{
    design_matrix, label_vector, Counts, Dataset, Feature, Instance, InstanceKey, Movement,
    PEAK_BINS,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correlation {
    pub r: f64,
    /// One of the inputs had zero variance; `r` is then 0.
    pub degenerate: bool,
}

/// Sample Pearson correlation.
pub fn pearson(a: &[f64], b: &[f64]) -> Result<Correlation> {
    if a.len() != b.len() {
        return Err(Error::argument(format!(
            "correlation of vectors with lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    if a.len() < 2 {
        return Err(Error::argument("correlation needs at least two points"));
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Ok(Correlation {
            r: 0.0,
            degenerate: true,
        });
    }
    Ok(Correlation {
        r: (sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0),
        degenerate: false,
    })
}

/// Cosine similarity; zero-norm inputs give 0 with the degenerate flag set.
pub fn cosine(a: &[f64], b: &[f64]) -> Correlation {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Correlation {
            r: 0.0,
            degenerate: true,
        };
    }
    Correlation {
        r: (dot / (na * nb)).clamp(-1.0, 1.0),
        degenerate: false,
    }
}

/// Mean of one variable per peak bin, over days and approaches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileVector {
    pub variable: Feature,
    /// `None` marks a bin without observations.
    pub bins: Vec<Option<f64>>,
}

/// Variables whose profiles are correlated: the time-varying ones among
/// `selected`, or every time-varying variable when none was selected.
pub fn profile_variables(selected: &[Feature]) -> Vec<Feature> {
    let chosen: Vec<Feature> = selected.iter().copied().filter(|f| f.is_time_varying()).collect();
    if chosen.is_empty() {
        Feature::ALL.iter().copied().filter(|f| f.is_time_varying()).collect()
    } else {
        chosen
    }
}

fn profiles_of(rows: &[&Instance], variables: &[Feature]) -> BTreeMap<Feature, ProfileVector> {
    variables
        .iter()
        .filter(|f| f.is_time_varying())
        .map(|&f| {
            let mut sum = [0.0; PEAK_BINS];
            let mut count = [0usize; PEAK_BINS];
            for inst in rows {
                let b = inst.key.interval_index as usize;
                sum[b] += inst.features.get(f);
                count[b] += 1;
            }
            let bins = (0..PEAK_BINS)
                .map(|b| (count[b] > 0).then(|| sum[b] / count[b] as f64))
                .collect();
            (f, ProfileVector { variable: f, bins })
        })
        .collect()
}

/// Profiles of the selected time-varying variables of one intersection.
/// Static and calendar variables are skipped.
pub fn build_profiles(
    dataset: &Dataset,
    intersection_id: &str,
    variables: &[Feature],
) -> Result<BTreeMap<Feature, ProfileVector>> {
    let rows = dataset.intersection(intersection_id);
    if rows.is_empty() {
        return Err(Error::argument(format!("no intersection `{intersection_id}` in dataset")));
    }
    Ok(profiles_of(&rows, variables))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchCandidate {
    pub intersection_id: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub target_id: String,
    /// Best first; equal scores ordered by id.
    pub ranked: Vec<MatchCandidate>,
    pub chosen: String,
}

fn profile_score(
    source: &BTreeMap<Feature, ProfileVector>,
    target: &BTreeMap<Feature, ProfileVector>,
) -> Result<(f64, bool)> {
    let mut score = 0.0;
    let mut any_common = false;
    for (f, tp) in target {
        let Some(sp) = source.get(f) else { continue };
        let (a, b): (Vec<f64>, Vec<f64>) = sp
            .bins
            .iter()
            .zip(&tp.bins)
            .filter_map(|(s, t)| Some(((*s)?, (*t)?)))
            .unzip();
        if a.is_empty() {
            continue;
        }
        any_common = true;
        if a.len() >= 2 {
            score += pearson(&a, &b)?.r;
        }
    }
    Ok((score, any_common))
}

/// Ranks source intersections by the summed profile correlation with the
/// target and picks the best.
pub fn match_intersections(source: &Dataset, target: &[&Instance], selected: &[Feature]) -> Result<MatchResult> {
    let ids = source.intersection_ids();
    if ids.is_empty() {
        return Err(Error::Matching("no source intersections".into()));
    }
    let Some(first) = target.first() else {
        return Err(Error::Matching("no target observations".into()));
    };
    let variables = profile_variables(selected);
    let target_profiles = profiles_of(target, &variables);
    let mut ranked = ids
        .iter()
        .map(|id| {
            let rows = source.intersection(id);
            let (score, common) = profile_score(&profiles_of(&rows, &variables), &target_profiles)?;
            if !common {
                return Err(Error::Matching(format!(
                    "source `{id}` shares no peak bins with target `{}`",
                    first.intersection_id()
                )));
            }
            Ok(MatchCandidate {
                intersection_id: id.clone(),
                score,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    ranked.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| a.intersection_id.cmp(&b.intersection_id))
    });
    Ok(MatchResult {
        target_id: first.intersection_id().to_string(),
        chosen: ranked[0].intersection_id.clone(),
        ranked,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Substitution {
    /// Chosen source rows, most similar first.
    pub indices: Vec<usize>,
    /// Similarity of every source row to the target centroid.
    pub similarities: Vec<f64>,
    /// Similarity of the last chosen row.
    pub threshold: f64,
    /// Rows whose standardized vector had zero norm.
    pub zero_norm: usize,
}

pub fn substitution_size(fraction: f64, n: usize) -> usize {
    ((fraction * n as f64 - 1e-9).ceil() as usize).clamp(1, n)
}

/// Picks the source rows most similar (cosine, after joint z-scoring) to
/// the centroid of the target rows.
pub fn substitute_target(
    source: ArrayView2<'_, f64>,
    target: ArrayView2<'_, f64>,
    fraction: f64,
) -> Result<Substitution> {
    if source.nrows() == 0 || target.nrows() == 0 {
        return Err(Error::argument("substitution needs source and target rows"));
    }
    if source.ncols() != target.ncols() {
        return Err(Error::argument("source and target predictor counts differ"));
    }
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::argument(format!("substitution fraction {fraction} outside (0, 1]")));
    }
    let p = source.ncols();
    let total = (source.nrows() + target.nrows()) as f64;
    let mut mean = vec![0.0; p];
    let mut sd = vec![0.0; p];
    for j in 0..p {
        let (sc, tc) = (source.column(j), target.column(j));
        let col = sc.iter().chain(tc.iter()).copied();
        mean[j] = col.clone().sum::<f64>() / total;
        sd[j] = (col.map(|v| (v - mean[j]).powi(2)).sum::<f64>() / total).sqrt();
    }
    let z = |row: ndarray::ArrayView1<'_, f64>| -> Vec<f64> {
        (0..p)
            .map(|j| if sd[j] > 0.0 { (row[j] - mean[j]) / sd[j] } else { 0.0 })
            .collect()
    };
    let mut centroid = vec![0.0; p];
    for row in target.rows() {
        for (c, v) in centroid.iter_mut().zip(z(row)) {
            *c += v;
        }
    }
    centroid.iter_mut().for_each(|c| *c /= target.nrows() as f64);

    let mut zero_norm = 0;
    let similarities: Vec<f64> = source
        .rows()
        .into_iter()
        .map(|row| {
            let c = cosine(&z(row), &centroid);
            zero_norm += usize::from(c.degenerate);
            c.r
        })
        .collect();
    let mut order: Vec<usize> = (0..similarities.len()).collect();
    order.sort_by(|&a, &b| similarities[b].total_cmp(&similarities[a]).then(a.cmp(&b)));
    order.truncate(substitution_size(fraction, similarities.len()));
    Ok(Substitution {
        threshold: similarities[*order.last().expect("at least one row")],
        indices: order,
        similarities,
        zero_norm,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub lasso: LassoConfig,
    pub boosting: TwoStageConfig,
    pub substitution_fraction: f64,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            lasso: LassoConfig::default(),
            boosting: TwoStageConfig::default(),
            substitution_fraction: 0.10,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferPlan {
    #[serde(rename = "match")]
    pub match_result: MatchResult,
    /// Indices into the matched intersection's rows (dataset order).
    pub substitute_indices: Vec<usize>,
    pub threshold: f64,
    pub selected_variables: Vec<Feature>,
    /// Left, through, right.
    pub models: Vec<TrAModel>,
}

impl TransferPlan {
    pub fn predict(&self, inst: &Instance) -> Result<Counts> {
        let x = inst.features.select(&self.selected_variables);
        let v: Vec<f64> = self
            .models
            .iter()
            .map(|m| m.predict(&x))
            .collect::<Result<_>>()?;
        Ok(Counts {
            left: v[0],
            through: v[1],
            right: v[2],
        })
    }
}

/// One output row: observation key plus the three estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub intersection_id: String,
    pub approach_id: String,
    pub day_index: u32,
    pub interval_index: u8,
    pub v_lm_hat: f64,
    pub v_tm_hat: f64,
    pub v_rm_hat: f64,
}

impl Prediction {
    pub fn new(key: &InstanceKey, c: Counts) -> Prediction {
        Prediction {
            intersection_id: key.intersection_id.clone(),
            approach_id: key.approach_id.clone(),
            day_index: key.day_index,
            interval_index: key.interval_index,
            v_lm_hat: c.left,
            v_tm_hat: c.through,
            v_rm_hat: c.right,
        }
    }

    pub fn counts(&self) -> Counts {
        Counts {
            left: self.v_lm_hat,
            through: self.v_tm_hat,
            right: self.v_rm_hat,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TransferOutput {
    pub plan: TransferPlan,
    pub predictions: Vec<Prediction>,
}

fn rows_of(x: &Array2<f64>, idx: &[usize]) -> Array2<f64> {
    x.select(Axis(0), idx)
}

/// Builds and applies a plan for one target intersection, given a feature
/// selection already made on the source pool.
pub fn plan_target(
    source: &Dataset,
    selection: &FeatureSelection,
    target: &[&Instance],
    config: &PipelineConfig,
) -> Result<TransferOutput> {
    let selected = if selection.selected.is_empty() {
        log::warn!("no predictor selected; using all of them");
        Feature::ALL.to_vec()
    } else {
        selection.selected.clone()
    };
    let matched = match_intersections(source, target, &selected).map_err(|e| e.in_stage("matching"))?;

    let all = design_matrix(source.instances(), &selected);
    let matched_rows: Vec<usize> = source
        .instances()
        .iter()
        .enumerate()
        .filter(|(_, i)| i.intersection_id() == matched.chosen)
        .map(|(k, _)| k)
        .collect();
    let target_x = design_matrix(target.iter().copied(), &selected);
    let sub = substitute_target(
        rows_of(&all, &matched_rows).view(),
        target_x.view(),
        config.substitution_fraction,
    )
    .map_err(|e| e.in_stage("substitution"))?;

    let mut in_sub = vec![false; source.len()];
    let substitute: Vec<usize> = sub.indices.iter().map(|&i| matched_rows[i]).collect();
    substitute.iter().for_each(|&k| in_sub[k] = true);
    let rest: Vec<usize> = (0..source.len()).filter(|&k| !in_sub[k]).collect();
    let (xs, xt) = (rows_of(&all, &rest), rows_of(&all, &substitute));
    let pick = |idx: &[usize]| -> Vec<&Instance> { idx.iter().map(|&k| &source.instances()[k]).collect() };
    let (src_rows, sub_rows) = (pick(&rest), pick(&substitute));

    let models = Movement::ALL
        .par_iter()
        .map(|&m| {
            let ys = label_vector(src_rows.iter().copied(), m)?;
            let yt = label_vector(sub_rows.iter().copied(), m)?;
            let pool = Pool::new(xs.view(), &ys, xt.view(), &yt)?;
            let boosting = TwoStageConfig {
                seed: derive_seed(config.seed, 1 + m.index() as u64),
                ..config.boosting
            };
            two_stage_fit(&pool, &boosting).map(|f| f.model)
        })
        .collect::<Result<Vec<_>>>()
        .map_err(|e| e.in_stage("training"))?;

    let mut substitute_indices = sub.indices;
    substitute_indices.sort_unstable();
    let plan = TransferPlan {
        match_result: matched,
        substitute_indices,
        threshold: sub.threshold,
        selected_variables: selected,
        models,
    };
    let predictions = target
        .iter()
        .map(|inst| plan.predict(inst).map(|c| Prediction::new(&inst.key, c)))
        .collect::<Result<Vec<_>>>()
        .map_err(|e| e.in_stage("prediction"))?;
    Ok(TransferOutput { plan, predictions })
}

/// Full pipeline: one plan per target intersection, all sharing one
/// feature selection on the labeled source pool.
pub fn run_pipeline(source: &Dataset, target: &Dataset, config: &PipelineConfig) -> Result<(FeatureSelection, Vec<TransferOutput>)> {
    if !(config.substitution_fraction > 0.0 && config.substitution_fraction <= 1.0) {
        return Err(Error::argument("substitution fraction must be in (0, 1]"));
    }
    config.boosting.validate()?;
    let selection = select_features(source, &config.lasso, derive_seed(config.seed, 0))
        .map_err(|e| e.in_stage("feature selection"))?;
    let outputs = target
        .intersection_ids()
        .par_iter()
        .map(|id| plan_target(source, &selection, &target.intersection(id), config))
        .collect::<Result<Vec<_>>>()?;
    Ok((selection, outputs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boosting::AdaBoostConfig;
    use crate::datagen::generate_network;
    use crate::schema::FeatureVector;
    use crate::tree::TreeParams;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pearson_oracle(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let sa: f64 = a.iter().sum();
        let sb: f64 = b.iter().sum();
        let sab: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        let saa: f64 = a.iter().map(|x| x * x).sum();
        let sbb: f64 = b.iter().map(|y| y * y).sum();
        (n * sab - sa * sb) / ((n * saa - sa * sa).sqrt() * (n * sbb - sb * sb).sqrt())
    }

    #[test]
    fn pearson_basics() {
        let a = [1.0, 2.0, 4.0, 7.0];
        assert!((pearson(&a, &a).unwrap().r - 1.0).abs() < 1e-15);
        let neg: Vec<f64> = a.iter().map(|v| -v).collect();
        assert!((pearson(&a, &neg).unwrap().r + 1.0).abs() < 1e-15);
        let c = pearson(&a, &[3.0; 4]).unwrap();
        assert!(c.degenerate && c.r == 0.0);
        assert!(pearson(&a, &[1.0]).is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let a: Vec<f64> = (0..10).map(|_| rng.random_range(-5.0..5.0)).collect();
            let b: Vec<f64> = (0..10).map(|_| rng.random_range(-5.0..5.0)).collect();
            assert!((pearson(&a, &b).unwrap().r - pearson_oracle(&a, &b)).abs() < 1e-12);
        }
    }

    fn inst(id: &str, approach: &str, day: u32, bin: u8, value: f64) -> Instance {
        let mut v = [0.0; crate::schema::NUM_FEATURES];
        v[Feature::DTm.index()] = value;
        v[Feature::LTl.index()] = 2.0;
        v[Feature::R.index()] = 1.0;
        v[Feature::L.index()] = 1.0;
        let (h, q) = crate::schema::peak_bin_time(bin).unwrap();
        let (moh, hod) = crate::schema::encode_interval(h, q).unwrap();
        v[Feature::HMoh.index()] = moh as f64;
        v[Feature::HHod.index()] = hod as f64;
        Instance {
            key: InstanceKey {
                intersection_id: id.into(),
                approach_id: approach.into(),
                day_index: day,
                interval_index: bin,
            },
            features: FeatureVector::new(v).unwrap(),
            labels: None,
        }
    }

    #[test]
    fn profile_is_mean_over_days() {
        let rows: Vec<Instance> = (0..16u8)
            .flat_map(|b| [inst("A", "N", 0, b, b as f64), inst("A", "N", 1, b, b as f64 + 2.0)])
            .collect();
        let ds = Dataset::new(rows).unwrap();
        let p = build_profiles(&ds, "A", &[Feature::DTm, Feature::LTl, Feature::HHod]).unwrap();
        assert_eq!(p.len(), 1);
        let bins = &p[&Feature::DTm].bins;
        for b in 0..16 {
            assert_eq!(bins[b], Some(b as f64 + 1.0));
        }
        assert!(build_profiles(&ds, "B", &[Feature::DTm]).is_err());
    }

    #[test]
    fn missing_bins_are_flagged() {
        let ds = Dataset::new((0..8u8).map(|b| inst("A", "N", 0, b, 1.0)).collect()).unwrap();
        let p = build_profiles(&ds, "A", &[Feature::DTm]).unwrap();
        assert!(p[&Feature::DTm].bins[8..].iter().all(Option::is_none));
    }

    #[test]
    fn matching_finds_exact_copy() {
        let net = generate_network(6, 1, 12).unwrap();
        let vars = [Feature::DTm, Feature::OTm, Feature::GTm, Feature::DLm];
        for id in net.dataset.intersection_ids() {
            let target = net.dataset.intersection(&id);
            let m = match_intersections(&net.dataset, &target, &vars).unwrap();
            assert_eq!(m.chosen, id);
            assert!((m.ranked[0].score - 4.0).abs() < 1e-9);
            assert!(m.ranked.windows(2).all(|w| w[0].score >= w[1].score));
        }
    }

    #[test]
    fn matching_is_scale_invariant() {
        let net = generate_network(4, 1, 2).unwrap();
        let vars = [Feature::DTm, Feature::OTm];
        let scale = |d: &Dataset| {
            let rows = d
                .instances()
                .iter()
                .map(|i| {
                    let mut v = *i.features.values();
                    v[Feature::DTm.index()] *= 3.5;
                    Instance {
                        features: FeatureVector::new(v).unwrap(),
                        ..i.clone()
                    }
                })
                .collect();
            Dataset::new(rows).unwrap()
        };
        let scaled = scale(&net.dataset);
        let a = match_intersections(&net.dataset, &net.dataset.intersection("I001"), &vars).unwrap();
        let b = match_intersections(&scaled, &scaled.intersection("I001"), &vars).unwrap();
        for (x, y) in a.ranked.iter().zip(&b.ranked) {
            assert_eq!(x.intersection_id, y.intersection_id);
            assert!((x.score - y.score).abs() < 1e-12);
        }
    }

    #[test]
    fn single_source_is_chosen() {
        let net = generate_network(2, 1, 2).unwrap();
        let (a, b) = net.dataset.split_out("I001");
        let src = Dataset::new(a).unwrap();
        let tgt: Vec<&Instance> = b.iter().collect();
        assert_eq!(match_intersections(&src, &tgt, &[Feature::DTm]).unwrap().chosen, "I001");
    }

    #[test]
    fn substitution_matches_exhaustive_sort() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let src = Array2::from_shape_fn((20, 4), |_| rng.random_range(0.0..10.0));
        let tgt = Array2::from_shape_fn((7, 4), |_| rng.random_range(0.0..10.0));
        let sub = substitute_target(src.view(), tgt.view(), 0.10).unwrap();
        assert_eq!(sub.indices.len(), 2);
        let mut pairs: Vec<(f64, usize)> = sub.similarities.iter().copied().zip(0..).collect();
        pairs.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
        assert_eq!(sub.indices, vec![pairs[0].1, pairs[1].1]);
        assert_eq!(sub.threshold, pairs[1].0);
        let all = substitute_target(src.view(), tgt.view(), 1.0).unwrap();
        assert_eq!(all.indices.len(), 20);
        assert!(substitute_target(src.view(), tgt.view(), 0.0).is_err());
    }

    #[test]
    fn centroid_row_is_selected_first() {
        let tgt = ndarray::array![[1.0, 5.0], [3.0, 9.0]];
        let src = ndarray::array![[0.0, 0.0], [2.0, 7.0], [10.0, 1.0], [6.0, 20.0]];
        let sub = substitute_target(src.view(), tgt.view(), 0.25).unwrap();
        assert_eq!(sub.indices, vec![1]);
        assert!((sub.similarities[1] - 1.0).abs() < 1e-12);
    }

    fn quick_config(seed: u64) -> PipelineConfig {
        PipelineConfig {
            boosting: TwoStageConfig {
                steps: 3,
                folds: 3,
                boost: AdaBoostConfig {
                    iterations: 5,
                    tree: TreeParams::with_depth(3),
                    ..Default::default()
                },
                seed: 0,
            },
            seed,
            ..Default::default()
        }
    }

    #[test]
    fn pipeline_is_deterministic_and_nonnegative() {
        let net = generate_network(5, 1, 21).unwrap();
        let (tgt, src) = net.dataset.split_out("I005");
        let src = Dataset::new(src).unwrap();
        let tgt = Dataset::new(tgt).unwrap().unlabeled();
        let (_, a) = run_pipeline(&src, &tgt, &quick_config(4)).unwrap();
        let (_, b) = run_pipeline(&src, &tgt, &quick_config(4)).unwrap();
        assert_eq!(a.len(), 1);
        assert_eq!(
            serde_json::to_string(&a[0].plan).unwrap(),
            serde_json::to_string(&b[0].plan).unwrap()
        );
        let plan = &a[0].plan;
        let n_matched = src.intersection(&plan.match_result.chosen).len();
        assert_eq!(plan.substitute_indices.len(), substitution_size(0.1, n_matched));
        assert!(plan.substitute_indices.iter().all(|&i| i < n_matched));
        assert_eq!(a[0].predictions.len(), tgt.len());
        assert!(a[0]
            .predictions
            .iter()
            .all(|p| p.v_lm_hat >= 0.0 && p.v_tm_hat >= 0.0 && p.v_rm_hat >= 0.0));
    }

    #[test]
    fn pipeline_errors_name_the_stage() {
        let net = generate_network(2, 1, 21).unwrap();
        let (tgt, src) = net.dataset.split_out("I002");
        let src = Dataset::new(src).unwrap();
        let tgt = Dataset::new(tgt).unwrap().unlabeled();
        let selection = select_features(&src, &LassoConfig::default(), 0).unwrap();
        let rows: Vec<&Instance> = tgt.instances().iter().collect();
        let mut cfg = quick_config(0);
        cfg.boosting.boost.iterations = 0;
        let err = plan_target(&src, &selection, &rows, &cfg).unwrap_err();
        assert!(err.to_string().starts_with("training stage"), "{err}");
        assert!(run_pipeline(&src, &tgt, &cfg).is_err());
    }
}
