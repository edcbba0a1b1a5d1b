//! Multiclass gradient-boosted decision trees with a softmax objective.
//!
//! Each boosting round fits one regression tree per class to the first- and
//! second-order gradients of the weighted softmax log-loss. Split search is
//! exact greedy over sorted feature values (no histograms), leaf values take
//! a Newton step with L2 smoothing (`reg_lambda`) and L1 shrinkage
//! (`reg_alpha`), and trees grow best-first so both depth-capped and
//! leaf-capped configurations come out of one implementation. Row and column
//! subsampling draw from per-(round, class) seeded generators, making fits
//! reproducible and independent of thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{softmax3, ClassWeights};
use crate::error::{Error, Result};
use crate::labels::N_CLASSES;
use crate::util::{derive_seed3, Matrix};

const HESSIAN_FLOOR: f64 = 1e-16;
const MIN_GAIN: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GbdtParams {
    pub learning_rate: f64,
    pub max_depth: usize,
    pub n_estimators: usize,
    /// Minimum hessian sum per child.
    pub min_child_weight: f64,
    /// Minimum row count per child.
    pub min_child_samples: usize,
    pub subsample: f64,
    pub colsample_bytree: f64,
    pub reg_alpha: f64,
    pub reg_lambda: f64,
    /// Best-first leaf cap; 0 means unlimited (depth-limited only).
    pub num_leaves: usize,
    pub seed: u64,
}

impl Default for GbdtParams {
    fn default() -> Self {
        GbdtParams {
            learning_rate: 0.01,
            max_depth: 3,
            n_estimators: 100,
            min_child_weight: 1.0,
            min_child_samples: 1,
            subsample: 1.0,
            colsample_bytree: 1.0,
            reg_alpha: 0.0,
            reg_lambda: 1.0,
            num_leaves: 0,
            seed: 42,
        }
    }
}

impl GbdtParams {
    fn validate(&self) -> Result<()> {
        if self.n_estimators == 0 {
            return Err(Error::Config(
                "n_estimators must be positive (use GbdtModel::null_model for a 0-round model)"
                    .into(),
            ));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if self.max_depth == 0 || self.max_depth > 32 {
            return Err(Error::Config("max_depth must lie in 1..=32".into()));
        }
        if !(0.0 < self.subsample && self.subsample <= 1.0) {
            return Err(Error::Config("subsample must lie in (0,1]".into()));
        }
        if !(0.0 < self.colsample_bytree && self.colsample_bytree <= 1.0) {
            return Err(Error::Config("colsample_bytree must lie in (0,1]".into()));
        }
        if self.reg_alpha < 0.0 || self.reg_lambda < 0.0 {
            return Err(Error::Config("regularization must be non-negative".into()));
        }
        if self.num_leaves == 1 {
            return Err(Error::Config("num_leaves must be 0 (unlimited) or >= 2".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TreeNode {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        gain: f64,
    },
    Leaf {
        value: f64,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<TreeNode>,
}

impl Tree {
    pub fn predict(&self, row: &[f64]) -> f64 {
        if self.nodes.is_empty() {
            return 0.0;
        }
        let mut idx = 0usize;
        loop {
            match &self.nodes[idx] {
                TreeNode::Leaf { value } => return *value,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    idx = if row[*feature] < *threshold { *left } else { *right };
                }
            }
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, TreeNode::Leaf { .. }))
            .count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbdtModel {
    pub columns: Vec<String>,
    pub params: GbdtParams,
    /// trees[class][round].
    pub trees: Vec<Vec<Tree>>,
    /// Weighted mean train log-loss after each round.
    pub train_loss_trace: Vec<f64>,
}

impl GbdtModel {
    /// Zero-round fallback: raw scores stay 0, so predictions are uniform.
    pub fn null_model(columns: &[String]) -> GbdtModel {
        GbdtModel {
            columns: columns.to_vec(),
            params: GbdtParams {
                n_estimators: 1, // params record only; no trees exist
                ..GbdtParams::default()
            },
            trees: vec![Vec::new(); N_CLASSES],
            train_loss_trace: Vec::new(),
        }
    }

    pub fn n_rounds(&self) -> usize {
        self.trees.first().map_or(0, |t| t.len())
    }

    fn raw_scores(&self, row: &[f64]) -> [f64; N_CLASSES] {
        let mut scores = [0.0; N_CLASSES];
        for c in 0..N_CLASSES {
            for tree in &self.trees[c] {
                scores[c] += tree.predict(row);
            }
        }
        scores
    }

    pub fn predict_proba(&self, x: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(x.n_rows(), N_CLASSES);
        for r in 0..x.n_rows() {
            let probs = softmax3(self.raw_scores(x.row(r)));
            for c in 0..N_CLASSES {
                out.set(r, c, probs[c]);
            }
        }
        out
    }
}

/// L1 shrinkage applied to the gradient sum before Newton steps.
fn threshold_l1(g: f64, alpha: f64) -> f64 {
    if g > alpha {
        g - alpha
    } else if g < -alpha {
        g + alpha
    } else {
        0.0
    }
}

fn node_score(g: f64, h: f64, alpha: f64, lambda: f64) -> f64 {
    let t = threshold_l1(g, alpha);
    t * t / (h + lambda)
}

fn leaf_weight(g: f64, h: f64, alpha: f64, lambda: f64) -> f64 {
    -threshold_l1(g, alpha) / (h + lambda)
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct SplitChoice {
    gain: f64,
    feature: usize,
    threshold: f64,
}

/// Exact greedy search over sorted feature values. Ties in gain resolve to
/// the lower feature index, then the lower threshold, so results do not
/// depend on evaluation order.
fn best_split(
    x: &Matrix,
    rows: &[usize],
    grad: &[f64],
    hess: &[f64],
    features: &[usize],
    params: &GbdtParams,
) -> Option<SplitChoice> {
    let g_total: f64 = rows.iter().map(|&i| grad[i]).sum();
    let h_total: f64 = rows.iter().map(|&i| hess[i]).sum();
    let parent = node_score(g_total, h_total, params.reg_alpha, params.reg_lambda);

    let candidates: Vec<Option<SplitChoice>> = features
        .par_iter()
        .map(|&f| {
            let mut vals: Vec<(f64, f64, f64)> =
                rows.iter().map(|&i| (x.get(i, f), grad[i], hess[i])).collect();
            vals.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite features"));
            let n = vals.len();
            let mut best: Option<SplitChoice> = None;
            let mut gl = 0.0;
            let mut hl = 0.0;
            for i in 0..n.saturating_sub(1) {
                gl += vals[i].1;
                hl += vals[i].2;
                if vals[i].0 == vals[i + 1].0 {
                    continue;
                }
                let count_left = i + 1;
                let count_right = n - count_left;
                if count_left < params.min_child_samples || count_right < params.min_child_samples
                {
                    continue;
                }
                let gr = g_total - gl;
                let hr = h_total - hl;
                if hl < params.min_child_weight || hr < params.min_child_weight {
                    continue;
                }
                let gain = 0.5
                    * (node_score(gl, hl, params.reg_alpha, params.reg_lambda)
                        + node_score(gr, hr, params.reg_alpha, params.reg_lambda)
                        - parent);
                if gain <= MIN_GAIN {
                    continue;
                }
                let threshold = 0.5 * (vals[i].0 + vals[i + 1].0);
                let better = match &best {
                    None => true,
                    Some(b) => gain > b.gain || (gain == b.gain && threshold < b.threshold),
                };
                if better {
                    best = Some(SplitChoice {
                        gain,
                        feature: f,
                        threshold,
                    });
                }
            }
            best
        })
        .collect();

    candidates.into_iter().flatten().fold(None, |acc, c| match acc {
        None => Some(c),
        Some(b) => {
            if c.gain > b.gain
                || (c.gain == b.gain
                    && (c.feature < b.feature
                        || (c.feature == b.feature && c.threshold < b.threshold)))
            {
                Some(c)
            } else {
                Some(b)
            }
        }
    })
}

/// A leaf eligible for splitting, ordered by gain (ties: creation order).
struct PendingSplit {
    order: usize,
    node: usize,
    depth: usize,
    rows: Vec<usize>,
    choice: SplitChoice,
}

impl PartialEq for PendingSplit {
    fn eq(&self, other: &Self) -> bool {
        self.choice.gain == other.choice.gain && self.order == other.order
    }
}
impl Eq for PendingSplit {}
impl PartialOrd for PendingSplit {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for PendingSplit {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.choice
            .gain
            .total_cmp(&other.choice.gain)
            .then(other.order.cmp(&self.order))
    }
}

/// Grows one tree best-first under depth, leaf-count, child-size and
/// child-weight constraints.
fn build_tree(
    x: &Matrix,
    rows: Vec<usize>,
    grad: &[f64],
    hess: &[f64],
    features: &[usize],
    params: &GbdtParams,
) -> Tree {
    let max_leaves = if params.num_leaves == 0 {
        usize::MAX
    } else {
        params.num_leaves
    };
    let leaf_value = |rs: &[usize]| -> f64 {
        let g: f64 = rs.iter().map(|&i| grad[i]).sum();
        let h: f64 = rs.iter().map(|&i| hess[i]).sum();
        params.learning_rate * leaf_weight(g, h, params.reg_alpha, params.reg_lambda)
    };

    let mut nodes = vec![TreeNode::Leaf {
        value: leaf_value(&rows),
    }];
    let mut heap: std::collections::BinaryHeap<PendingSplit> = std::collections::BinaryHeap::new();
    let mut order = 0usize;
    if params.max_depth > 0 {
        if let Some(choice) = best_split(x, &rows, grad, hess, features, params) {
            heap.push(PendingSplit {
                order,
                node: 0,
                depth: 0,
                rows,
                choice,
            });
            order += 1;
        }
    }

    let mut n_leaves = 1usize;
    while n_leaves < max_leaves {
        let Some(pending) = heap.pop() else { break };
        let (mut left_rows, mut right_rows) = (Vec::new(), Vec::new());
        for &i in &pending.rows {
            if x.get(i, pending.choice.feature) < pending.choice.threshold {
                left_rows.push(i);
            } else {
                right_rows.push(i);
            }
        }
        let left_idx = nodes.len();
        nodes.push(TreeNode::Leaf {
            value: leaf_value(&left_rows),
        });
        let right_idx = nodes.len();
        nodes.push(TreeNode::Leaf {
            value: leaf_value(&right_rows),
        });
        nodes[pending.node] = TreeNode::Split {
            feature: pending.choice.feature,
            threshold: pending.choice.threshold,
            left: left_idx,
            right: right_idx,
            gain: pending.choice.gain,
        };
        n_leaves += 1;

        let child_depth = pending.depth + 1;
        if child_depth < params.max_depth {
            for (slot, child_rows) in [(left_idx, left_rows), (right_idx, right_rows)] {
                if child_rows.len() >= 2 * params.min_child_samples.max(1) {
                    if let Some(choice) = best_split(x, &child_rows, grad, hess, features, params)
                    {
                        heap.push(PendingSplit {
                            order,
                            node: slot,
                            depth: child_depth,
                            rows: child_rows,
                            choice,
                        });
                        order += 1;
                    }
                }
            }
        }
    }
    Tree { nodes }
}

/// Deterministic size-k sample of 0..n (sorted), via partial Fisher-Yates.
fn sample_indices(n: usize, k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut pool: Vec<usize> = (0..n).collect();
    for i in 0..k.min(n) {
        let j = rng.random_range(i..n);
        pool.swap(i, j);
    }
    let mut out = pool[..k.min(n)].to_vec();
    out.sort_unstable();
    out
}

fn weighted_log_loss(probs: &Matrix, y: &[usize], weights: &[f64]) -> f64 {
    let mut loss = 0.0;
    let mut wsum = 0.0;
    for i in 0..y.len() {
        loss -= weights[i] * probs.get(i, y[i]).max(1e-300).ln();
        wsum += weights[i];
    }
    loss / wsum
}

/// Boosts `n_estimators` rounds of one tree per class on per-class
/// gradients/hessians of the weighted softmax log-loss.
pub fn fit_gbdt(
    x: &Matrix,
    y: &[usize],
    params: &GbdtParams,
    class_weights: &ClassWeights,
    columns: &[String],
) -> Result<GbdtModel> {
    params.validate()?;
    if x.n_rows() != y.len() {
        return Err(Error::Validation(format!(
            "{} rows vs {} labels",
            x.n_rows(),
            y.len()
        )));
    }
    if x.n_rows() == 0 {
        return Err(Error::Degenerate("cannot fit on zero rows".into()));
    }
    if x.n_cols() == 0 {
        return Err(Error::Validation("cannot fit with zero feature columns".into()));
    }
    if columns.len() != x.n_cols() {
        return Err(Error::Validation("column names do not match matrix width".into()));
    }
    if !x.all_finite() {
        return Err(Error::Validation("non-finite value in training matrix".into()));
    }
    if y.iter().any(|&c| c >= N_CLASSES) {
        return Err(Error::Validation("class index out of range".into()));
    }

    let n = x.n_rows();
    let p = x.n_cols();
    let weights = class_weights.per_row(y);
    let mut raw = Matrix::zeros(n, N_CLASSES);
    let mut trees: Vec<Vec<Tree>> = vec![Vec::with_capacity(params.n_estimators); N_CLASSES];
    let mut trace = Vec::with_capacity(params.n_estimators);

    let n_sub = ((n as f64 * params.subsample).round() as usize).clamp(1, n);
    let p_sub = ((p as f64 * params.colsample_bytree).round() as usize).clamp(1, p);

    for round in 0..params.n_estimators {
        let mut probs = Matrix::zeros(n, N_CLASSES);
        for i in 0..n {
            let row = raw.row(i);
            let pr = softmax3([row[0], row[1], row[2]]);
            for c in 0..N_CLASSES {
                probs.set(i, c, pr[c]);
            }
        }

        // One tree per class from the shared round-start probabilities;
        // built in parallel, applied in class order.
        let round_trees: Vec<Tree> = (0..N_CLASSES)
            .into_par_iter()
            .map(|c| {
                let mut grad = vec![0.0; n];
                let mut hess = vec![0.0; n];
                for i in 0..n {
                    let pc = probs.get(i, c);
                    let target = if y[i] == c { 1.0 } else { 0.0 };
                    grad[i] = weights[i] * (pc - target);
                    hess[i] = (weights[i] * pc * (1.0 - pc)).max(HESSIAN_FLOOR);
                }
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed3(
                    params.seed,
                    round as u64,
                    c as u64,
                ));
                let rows = if params.subsample < 1.0 {
                    sample_indices(n, n_sub, &mut rng)
                } else {
                    (0..n).collect()
                };
                let features = if params.colsample_bytree < 1.0 {
                    sample_indices(p, p_sub, &mut rng)
                } else {
                    (0..p).collect()
                };
                build_tree(x, rows, &grad, &hess, &features, params)
            })
            .collect();

        for (c, tree) in round_trees.into_iter().enumerate() {
            for i in 0..n {
                let update = tree.predict(x.row(i));
                raw.set(i, c, raw.get(i, c) + update);
            }
            trees[c].push(tree);
        }

        let mut new_probs = Matrix::zeros(n, N_CLASSES);
        for i in 0..n {
            let row = raw.row(i);
            let pr = softmax3([row[0], row[1], row[2]]);
            for c in 0..N_CLASSES {
                new_probs.set(i, c, pr[c]);
            }
        }
        trace.push(weighted_log_loss(&new_probs, y, &weights));
    }

    Ok(GbdtModel {
        columns: columns.to_vec(),
        params: *params,
        trees,
        train_loss_trace: trace,
    })
}

/// Total split-gain share per feature across all trees and classes,
/// normalized to sum 1 over the nonzero entries. Empty for a model with no
/// trees.
pub fn gain_importance(model: &GbdtModel) -> std::collections::BTreeMap<String, f64> {
    let mut gains: std::collections::BTreeMap<String, f64> = std::collections::BTreeMap::new();
    for class_trees in &model.trees {
        for tree in class_trees {
            for node in &tree.nodes {
                if let TreeNode::Split { feature, gain, .. } = node {
                    *gains.entry(model.columns[*feature].clone()).or_insert(0.0) += gain;
                }
            }
        }
    }
    let total: f64 = gains.values().sum();
    if total > 0.0 {
        for v in gains.values_mut() {
            *v /= total;
        }
    }
    gains
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn names(p: usize) -> Vec<String> {
        (0..p).map(|i| format!("f{i}")).collect()
    }

    /// Quadrant data that axis-aligned trees separate exactly.
    fn quadrant_data(n: usize, seed: u64) -> (Matrix, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for _ in 0..n {
            let a: f64 = rng.random();
            let b: f64 = rng.random();
            // Keep a separating margin around the boundaries.
            let a = if a < 0.5 { a * 0.8 } else { 0.6 + a * 0.4 };
            let b = if b < 0.5 { b * 0.8 } else { 0.6 + b * 0.4 };
            let class = ((a > 0.5) as usize + 2 * ((b > 0.5) as usize)) % 3;
            rows.push(vec![a, b]);
            y.push(class);
        }
        (Matrix::from_rows(&rows), y)
    }

    #[test]
    fn xor_style_data_fit_with_monotone_loss() {
        let (x, y) = quadrant_data(200, 3);
        let params = GbdtParams {
            learning_rate: 0.3,
            max_depth: 6,
            n_estimators: 50,
            ..GbdtParams::default()
        };
        let cw = ClassWeights::balanced(&y).unwrap();
        let model = fit_gbdt(&x, &y, &params, &cw, &names(2)).unwrap();
        for w in model.train_loss_trace.windows(2) {
            assert!(
                w[1] <= w[0] + 1e-12,
                "train log-loss increased: {} -> {}",
                w[0],
                w[1]
            );
        }
        let probs = model.predict_proba(&x);
        let hits = (0..y.len())
            .filter(|&i| {
                let pred = (0..3)
                    .max_by(|&a, &b| probs.get(i, a).partial_cmp(&probs.get(i, b)).unwrap())
                    .unwrap();
                pred == y[i]
            })
            .count();
        let acc = hits as f64 / y.len() as f64;
        assert!(acc >= 0.99, "train accuracy {acc}");
    }

    #[test]
    fn zero_round_model_is_uniform_and_fit_rejects_zero() {
        let (x, y) = quadrant_data(30, 1);
        let params = GbdtParams {
            n_estimators: 0,
            ..GbdtParams::default()
        };
        let cw = ClassWeights::balanced(&y).unwrap();
        assert!(fit_gbdt(&x, &y, &params, &cw, &names(2)).is_err());

        let null = GbdtModel::null_model(&names(2));
        let probs = null.predict_proba(&x);
        for i in 0..x.n_rows() {
            for c in 0..3 {
                assert!((probs.get(i, c) - 1.0 / 3.0).abs() < 1e-12);
            }
        }
        assert!(gain_importance(&null).is_empty());
    }

    #[test]
    fn first_split_matches_exhaustive_threshold_oracle() {
        // One feature, clean step in the labels.
        let x = Matrix::from_rows(&[
            vec![1.0],
            vec![2.0],
            vec![3.0],
            vec![4.0],
            vec![5.0],
            vec![6.0],
        ]);
        let y = vec![0, 0, 0, 2, 2, 2];
        let cw = ClassWeights::uniform();
        let params = GbdtParams {
            learning_rate: 0.1,
            max_depth: 1,
            n_estimators: 1,
            reg_lambda: 1.0,
            // Uniform-probability hessians are 2/9 per row; the default
            // min_child_weight of 1 would veto every split of 6 rows.
            min_child_weight: 0.0,
            ..GbdtParams::default()
        };
        let model = fit_gbdt(&x, &y, &params, &cw, &names(1)).unwrap();
        let TreeNode::Split { threshold, .. } = model.trees[0][0].nodes[0] else {
            panic!("expected a split at the root");
        };

        // Brute force every candidate midpoint with independent arithmetic.
        // Round-start probabilities are uniform, so for class 0:
        // grad_i = 1/3 - [y_i == 0], hess_i = 2/9.
        let vals = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let grad: Vec<f64> = y
            .iter()
            .map(|&c| if c == 0 { 1.0 / 3.0 - 1.0 } else { 1.0 / 3.0 })
            .collect();
        let hess = vec![2.0 / 9.0; 6];
        let score = |g: f64, h: f64| g * g / (h + 1.0);
        let g_tot: f64 = grad.iter().sum();
        let h_tot: f64 = hess.iter().sum();
        let mut best = (f64::MIN, 0.0);
        for i in 0..5 {
            let mid = (vals[i] + vals[i + 1]) / 2.0;
            let gl: f64 = grad[..=i].iter().sum();
            let hl: f64 = hess[..=i].iter().sum();
            let gain = 0.5 * (score(gl, hl) + score(g_tot - gl, h_tot - hl) - score(g_tot, h_tot));
            if gain > best.0 {
                best = (gain, mid);
            }
        }
        assert_eq!(threshold, best.1);
        assert_eq!(threshold, 3.5);
    }

    #[test]
    fn class_weights_equal_physical_duplication() {
        // Doubling class-2 weights must match physically duplicating the
        // class-2 rows (exact-split case, min_child_samples = 1).
        let x = Matrix::from_rows(&[
            vec![0.1, 1.0],
            vec![0.9, 2.0],
            vec![0.4, 0.5],
            vec![0.6, 3.0],
            vec![0.25, 2.5],
            vec![0.75, 0.2],
        ]);
        let y = vec![0, 1, 0, 2, 1, 2];
        let weighted = ClassWeights {
            weights: [1.0, 1.0, 2.0],
        };
        let params = GbdtParams {
            learning_rate: 0.5,
            max_depth: 3,
            n_estimators: 10,
            ..GbdtParams::default()
        };
        let model_w = fit_gbdt(&x, &y, &params, &weighted, &names(2)).unwrap();

        let mut dup_rows: Vec<Vec<f64>> = Vec::new();
        let mut dup_y = Vec::new();
        for i in 0..y.len() {
            dup_rows.push(x.row(i).to_vec());
            dup_y.push(y[i]);
            if y[i] == 2 {
                dup_rows.push(x.row(i).to_vec());
                dup_y.push(2);
            }
        }
        let model_d = fit_gbdt(
            &Matrix::from_rows(&dup_rows),
            &dup_y,
            &params,
            &ClassWeights::uniform(),
            &names(2),
        )
        .unwrap();

        let probe = Matrix::from_rows(&[vec![0.3, 1.7], vec![0.8, 0.4], vec![0.5, 2.9]]);
        let pw = model_w.predict_proba(&probe);
        let pd = model_d.predict_proba(&probe);
        for i in 0..probe.n_rows() {
            for c in 0..3 {
                assert!(
                    (pw.get(i, c) - pd.get(i, c)).abs() < 1e-9,
                    "row {i} class {c}: {} vs {}",
                    pw.get(i, c),
                    pd.get(i, c)
                );
            }
        }
    }

    #[test]
    fn deterministic_under_subsampling() {
        let (x, y) = quadrant_data(120, 9);
        let params = GbdtParams {
            learning_rate: 0.1,
            max_depth: 4,
            n_estimators: 20,
            subsample: 0.8,
            colsample_bytree: 0.5,
            seed: 1234,
            ..GbdtParams::default()
        };
        let cw = ClassWeights::balanced(&y).unwrap();
        let a = fit_gbdt(&x, &y, &params, &cw, &names(2)).unwrap();
        let b = fit_gbdt(&x, &y, &params, &cw, &names(2)).unwrap();
        assert_eq!(a, b);
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }

    #[test]
    fn num_leaves_caps_tree_size() {
        let (x, y) = quadrant_data(200, 5);
        let params = GbdtParams {
            learning_rate: 0.1,
            max_depth: 8,
            n_estimators: 3,
            num_leaves: 4,
            ..GbdtParams::default()
        };
        let cw = ClassWeights::balanced(&y).unwrap();
        let model = fit_gbdt(&x, &y, &params, &cw, &names(2)).unwrap();
        for class_trees in &model.trees {
            for tree in class_trees {
                assert!(tree.n_leaves() <= 4);
            }
        }
    }

    #[test]
    fn gain_importance_prefers_informative_feature() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for _ in 0..300 {
            let signal: f64 = rng.random();
            let noise: f64 = rng.random();
            let class = if signal < 0.33 {
                0
            } else if signal < 0.66 {
                1
            } else {
                2
            };
            rows.push(vec![signal, noise]);
            y.push(class);
        }
        let x = Matrix::from_rows(&rows);
        let cw = ClassWeights::balanced(&y).unwrap();
        let params = GbdtParams {
            learning_rate: 0.2,
            max_depth: 3,
            n_estimators: 20,
            ..GbdtParams::default()
        };
        let model = fit_gbdt(&x, &y, &params, &cw, &names(2)).unwrap();
        let imp = gain_importance(&model);
        let sum: f64 = imp.values().sum();
        assert!((sum - 1.0).abs() < 1e-9);
        let signal_share = imp.get("f0").copied().unwrap_or(0.0);
        let noise_share = imp.get("f1").copied().unwrap_or(0.0);
        assert!(signal_share > noise_share, "{signal_share} <= {noise_share}");
    }
}
