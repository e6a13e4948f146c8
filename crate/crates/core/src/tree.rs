//! Weighted CART regression tree.
//!
//! Splits minimize weighted squared error. Every feature and every midpoint
//! between consecutive distinct values is a candidate; equal gains resolve to
//! the lowest feature index, then the smallest threshold. Instances with zero
//! weight are dropped before fitting, so they never influence the structure.

use ndarray::ArrayView2;
use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    /// Minimum share of the total training weight in each leaf.
    pub min_weight_fraction_leaf: f64,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: 4,
            min_samples_leaf: 5,
            min_weight_fraction_leaf: 0.0,
        }
    }
}

impl TreeParams {
    pub fn with_depth(max_depth: usize) -> Self {
        TreeParams {
            max_depth,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_depth == 0 {
            return Err(Error::argument("max_depth must be positive"));
        }
        if self.min_samples_leaf == 0 {
            return Err(Error::argument("min_samples_leaf must be positive"));
        }
        if !(0.0..=0.5).contains(&self.min_weight_fraction_leaf) {
            return Err(Error::argument(format!(
                "min_weight_fraction_leaf {} outside [0, 0.5]",
                self.min_weight_fraction_leaf
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TreeNode {
    Leaf {
        value: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
}

impl TreeNode {
    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn n_leaves(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Split { left, right, .. } => left.n_leaves() + right.n_leaves(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub n_features: usize,
    pub root: TreeNode,
}

impl RegressionTree {
    pub fn constant(n_features: usize, value: f64) -> Self {
        RegressionTree {
            n_features,
            root: TreeNode::Leaf { value },
        }
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n_features {
            return Err(Error::argument(format!(
                "tree expects {} features, got {}",
                self.n_features,
                x.len()
            )));
        }
        Ok(self.predict_unchecked(x))
    }

    pub(crate) fn predict_unchecked(&self, x: &[f64]) -> f64 {
        let mut node = &self.root;
        loop {
            match node {
                TreeNode::Leaf { value } => return *value,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    node = if x[*feature] <= *threshold { left } else { right };
                }
            }
        }
    }

    /// Predictions for every row of `x`.
    pub fn predict_rows(&self, x: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
        if x.ncols() != self.n_features {
            return Err(Error::argument(format!(
                "tree expects {} features, got {}",
                self.n_features,
                x.ncols()
            )));
        }
        Ok(x.rows()
            .into_iter()
            .map(|row| match row.as_slice() {
                Some(s) => self.predict_unchecked(s),
                None => self.predict_unchecked(&row.to_vec()),
            })
            .collect())
    }

    pub fn depth(&self) -> usize {
        self.root.depth()
    }
}

/// Draws a random subset of candidate features at every node.
pub struct FeatureSampler<'r, R: Rng> {
    pub per_split: usize,
    pub rng: &'r mut R,
}

/// Per-column row orderings of a design matrix, reusable by every fit on
/// the same rows.
#[derive(Debug, Clone)]
pub struct SortedDesign {
    order: Vec<Vec<usize>>,
}

impl SortedDesign {
    pub fn new(x: ArrayView2<'_, f64>) -> Self {
        let n = x.nrows();
        let order = (0..x.ncols())
            .map(|j| {
                let mut idx: Vec<usize> = (0..n).collect();
                idx.sort_by(|&a, &b| x[[a, j]].total_cmp(&x[[b, j]]).then(a.cmp(&b)));
                idx
            })
            .collect();
        SortedDesign { order }
    }
}

pub fn fit_tree(
    x: ArrayView2<'_, f64>,
    y: &[f64],
    weights: &[f64],
    params: &TreeParams,
) -> Result<RegressionTree> {
    fit_tree_inner::<rand_chacha::ChaCha8Rng>(x, y, weights, params, None, None)
}

/// Like [`fit_tree`], reusing orderings computed by [`SortedDesign::new`]
/// on the same `x`.
pub fn fit_tree_presorted(
    x: ArrayView2<'_, f64>,
    y: &[f64],
    weights: &[f64],
    params: &TreeParams,
    sorted: &SortedDesign,
) -> Result<RegressionTree> {
    fit_tree_inner::<rand_chacha::ChaCha8Rng>(x, y, weights, params, None, Some(sorted))
}

/// Like [`fit_tree`], restricting each node's split search to a random
/// feature subset. `sorted`, when given, must come from the same `x`.
pub fn fit_tree_sampled<R: Rng>(
    x: ArrayView2<'_, f64>,
    y: &[f64],
    weights: &[f64],
    params: &TreeParams,
    sampler: FeatureSampler<'_, R>,
    sorted: Option<&SortedDesign>,
) -> Result<RegressionTree> {
    fit_tree_inner(x, y, weights, params, Some(sampler), sorted)
}

fn fit_tree_inner<R: Rng>(
    x: ArrayView2<'_, f64>,
    y: &[f64],
    weights: &[f64],
    params: &TreeParams,
    sampler: Option<FeatureSampler<'_, R>>,
    presorted: Option<&SortedDesign>,
) -> Result<RegressionTree> {
    params.validate()?;
    let (n, p) = x.dim();
    if y.len() != n || weights.len() != n {
        return Err(Error::argument(format!(
            "dimension mismatch: {n} rows, {} targets, {} weights",
            y.len(),
            weights.len()
        )));
    }
    if n == 0 {
        return Err(Error::argument("cannot fit a tree on zero rows"));
    }
    if x.iter().any(|v| v.is_nan()) {
        return Err(Error::numeric("NaN in tree inputs"));
    }
    ensure_finite(y, "tree targets")?;
    ensure_finite(weights, "tree weights")?;
    if weights.iter().any(|&w| w < 0.0) {
        return Err(Error::argument("negative sample weight"));
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(Error::argument("sample weights sum to zero"));
    }

    let active: Vec<usize> = (0..n).filter(|&i| weights[i] > 0.0).collect();
    let sorted: Vec<Vec<usize>> = match presorted {
        Some(d) if d.order.len() == p && d.order.first().is_none_or(|o| o.len() == n) => d
            .order
            .iter()
            .map(|o| o.iter().copied().filter(|&i| weights[i] > 0.0).collect())
            .collect(),
        Some(_) => return Err(Error::argument("presorted design does not match x")),
        None => (0..p)
            .map(|j| {
                let mut idx = active.clone();
                idx.sort_by(|&a, &b| x[[a, j]].total_cmp(&x[[b, j]]).then(a.cmp(&b)));
                idx
            })
            .collect(),
    };

    let cols: Vec<Vec<f64>> = (0..p).map(|j| x.column(j).to_vec()).collect();
    let mut builder = Builder {
        x,
        cols,
        centered: vec![0.0; n],
        y,
        w: weights,
        params,
        min_leaf_weight: params.min_weight_fraction_leaf * total,
        mask: vec![false; n],
        sampler,
        n_features: p,
    };
    let root = builder.build(&active, sorted, 0);
    Ok(RegressionTree {
        n_features: p,
        root,
    })
}

struct Builder<'a, 'r, R: Rng> {
    x: ArrayView2<'a, f64>,
    /// Column-major copy of `x` for the split scans.
    cols: Vec<Vec<f64>>,
    /// Scratch: `w * (y - node mean)` for the current node's rows.
    centered: Vec<f64>,
    y: &'a [f64],
    w: &'a [f64],
    params: &'a TreeParams,
    min_leaf_weight: f64,
    mask: Vec<bool>,
    sampler: Option<FeatureSampler<'r, R>>,
    n_features: usize,
}

struct Candidate {
    feature: usize,
    threshold: f64,
    gain: f64,
}

impl<R: Rng> Builder<'_, '_, R> {
    /// `members` lists the node's rows in a fixed order (the order used for
    /// all sums); `sorted[j]` lists the same rows ordered by feature `j`.
    fn build(&mut self, members: &[usize], sorted: Vec<Vec<usize>>, depth: usize) -> TreeNode {
        let weight: f64 = members.iter().map(|&i| self.w[i]).sum();
        let weighted_sum: f64 = members.iter().map(|&i| self.w[i] * self.y[i]).sum();
        let mean = weighted_sum / weight;
        let leaf = TreeNode::Leaf { value: mean };

        let first = self.y[members[0]];
        let constant = members.iter().all(|&i| self.y[i] == first);
        if constant
            || self.n_features == 0
            || depth >= self.params.max_depth
            || members.len() < 2 * self.params.min_samples_leaf
        {
            return leaf;
        }

        let Some(best) = self.best_split(&sorted, mean, weight) else {
            return leaf;
        };

        for &i in members {
            self.mask[i] = self.x[[i, best.feature]] <= best.threshold;
        }
        let (left_members, right_members): (Vec<usize>, Vec<usize>) =
            members.iter().partition(|&&i| self.mask[i]);
        let mut left_sorted = Vec::with_capacity(sorted.len());
        let mut right_sorted = Vec::with_capacity(sorted.len());
        let (nl, nr) = (left_members.len(), right_members.len());
        for order in sorted {
            let mut l = Vec::with_capacity(nl);
            let mut r = Vec::with_capacity(nr);
            for i in order {
                if self.mask[i] {
                    l.push(i);
                } else {
                    r.push(i);
                }
            }
            left_sorted.push(l);
            right_sorted.push(r);
        }
        let left = self.build(&left_members, left_sorted, depth + 1);
        let right = self.build(&right_members, right_sorted, depth + 1);
        TreeNode::Split {
            feature: best.feature,
            threshold: best.threshold,
            left: Box::new(left),
            right: Box::new(right),
        }
    }

    fn candidate_features(&mut self) -> Vec<usize> {
        match self.sampler.as_mut() {
            Some(s) if s.per_split < self.n_features => {
                let mut picked = index::sample(s.rng, self.n_features, s.per_split.max(1)).into_vec();
                picked.sort_unstable();
                picked
            }
            _ => (0..self.n_features).collect(),
        }
    }

    fn best_split(&mut self, sorted: &[Vec<usize>], mean: f64, weight: f64) -> Option<Candidate> {
        let min_leaf = self.params.min_samples_leaf;
        // Gains are computed on targets centred at the node mean:
        // gain = SL^2/WL + SR^2/WR with SL + SR = 0.
        let node_sse: f64 = sorted[0]
            .iter()
            .map(|&i| self.w[i] * (self.y[i] - mean).powi(2))
            .sum();
        let tie_eps = 1e-12 * node_sse;
        let mut best: Option<Candidate> = None;
        for &i in &sorted[0] {
            self.centered[i] = self.w[i] * (self.y[i] - mean);
        }

        for j in self.candidate_features() {
            let order = &sorted[j];
            let n = order.len();
            let col = &self.cols[j];
            let centered = &self.centered;
            let total_centered: f64 = order.iter().map(|&i| centered[i]).sum();
            let mut wl = 0.0;
            let mut sl = 0.0;
            for k in 0..n - 1 {
                let i = order[k];
                wl += self.w[i];
                sl += centered[i];
                let left_count = k + 1;
                if left_count < min_leaf {
                    continue;
                }
                if n - left_count < min_leaf {
                    break;
                }
                let a = col[i];
                let b = col[order[k + 1]];
                if a == b {
                    continue;
                }
                let wr = weight - wl;
                if wl < self.min_leaf_weight || wr < self.min_leaf_weight || wl <= 0.0 || wr <= 0.0 {
                    continue;
                }
                let sr = total_centered - sl;
                let bar = best.as_ref().map_or(tie_eps, |c| c.gain + tie_eps);
                // Division-free screen with slack; the exact test follows.
                let (ww, cross) = (wl * wr, sl * sl * wr + sr * sr * wl);
                if cross < bar * ww * (1.0 - 1e-9) {
                    continue;
                }
                let gain = sl * sl / wl + sr * sr / wr;
                if gain > bar {
                    let mid = a + (b - a) / 2.0;
                    let threshold = if mid < b { mid } else { a };
                    best = Some(Candidate {
                        feature: j,
                        threshold,
                        gain,
                    });
                }
            }
        }
        best
    }
}
