//! Weighted regression trees and the two ensembles built from them.
//!
//! Splits minimize weighted SSE over midpoint thresholds between distinct
//! sorted feature values; score ties go to the lower feature index, then
//! the lower threshold. Samples with zero weight are dropped before
//! fitting, so an ignored sample leaves the tree bit-identical.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

const PERSIST_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TreeConfig {
    pub max_depth: Option<usize>,
    pub max_leaf_nodes: Option<usize>,
    pub min_samples_leaf: usize,
}

impl Default for TreeConfig {
    fn default() -> Self {
        TreeConfig {
            max_depth: None,
            max_leaf_nodes: None,
            min_samples_leaf: 1,
        }
    }
}

impl TreeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_depth == Some(0) || self.max_leaf_nodes == Some(0) {
            return Err(CoreError::InvalidInput(
                "finite tree bounds must be positive".into(),
            ));
        }
        if self.min_samples_leaf == 0 {
            return Err(CoreError::InvalidInput(
                "min_samples_leaf must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "node")]
pub enum Node<T> {
    Split {
        feature: usize,
        threshold: T,
        left: usize,
        right: usize,
    },
    Leaf {
        value: T,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree<T> {
    pub nodes: Vec<Node<T>>,
}

impl<T: Scalar> Tree<T> {
    pub fn predict_one(&self, row: &[T]) -> T {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf { value } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if row[feature] <= threshold { left } else { right };
                }
            }
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }
}

fn weighted_mean<T: Scalar>(y: &[T], w: &[T], indices: &[usize]) -> T {
    let mut sw = T::zero();
    let mut swy = T::zero();
    for &i in indices {
        sw += w[i];
        swy += w[i] * y[i];
    }
    swy / sw
}

fn weighted_sse<T: Scalar>(y: &[T], w: &[T], indices: &[usize], mean: T) -> T {
    let mut acc = T::zero();
    for &i in indices {
        let d = y[i] - mean;
        acc += w[i] * d * d;
    }
    acc
}

struct SplitChoice<T> {
    feature: usize,
    threshold: T,
    left: Vec<usize>,
    right: Vec<usize>,
    children_sse: T,
}

/// Exhaustive scan over (feature, midpoint) pairs using prefix sums in
/// sorted order. `features` restricts the scan (random forest subsets).
fn best_split<T: Scalar>(
    x: &Matrix<T>,
    y: &[T],
    w: &[T],
    indices: &[usize],
    features: &[usize],
    min_samples_leaf: usize,
) -> Option<SplitChoice<T>> {
    let n = indices.len();
    if n < 2 * min_samples_leaf {
        return None;
    }
    let mut best: Option<SplitChoice<T>> = None;
    let mut sorted: Vec<usize> = Vec::with_capacity(n);
    for &feature in features {
        sorted.clear();
        sorted.extend_from_slice(indices);
        sorted.sort_by(|&a, &b| {
            x.get(a, feature)
                .partial_cmp(&x.get(b, feature))
                .unwrap()
                .then(a.cmp(&b))
        });
        // running sums from the left; totals let the right side come free
        let mut tw = T::zero();
        let mut twy = T::zero();
        let mut twyy = T::zero();
        for &i in &sorted {
            tw += w[i];
            twy += w[i] * y[i];
            twyy += w[i] * y[i] * y[i];
        }
        let mut lw = T::zero();
        let mut lwy = T::zero();
        let mut lwyy = T::zero();
        for boundary in 1..n {
            let prev = sorted[boundary - 1];
            lw += w[prev];
            lwy += w[prev] * y[prev];
            lwyy += w[prev] * y[prev] * y[prev];
            let a = x.get(prev, feature);
            let b = x.get(sorted[boundary], feature);
            if a == b {
                continue;
            }
            if boundary < min_samples_leaf || n - boundary < min_samples_leaf {
                continue;
            }
            let mut threshold = (a + b) / T::of(2.0);
            if !(threshold < b) {
                threshold = a;
            }
            let rw = tw - lw;
            let sse_l = lwyy - lwy * lwy / lw;
            let sse_r = (twyy - lwyy) - (twy - lwy) * (twy - lwy) / rw;
            let score = sse_l.max(T::zero()) + sse_r.max(T::zero());
            if best.as_ref().map_or(true, |cur| score < cur.children_sse) {
                best = Some(SplitChoice {
                    feature,
                    threshold,
                    left: sorted[..boundary].to_vec(),
                    right: sorted[boundary..].to_vec(),
                    children_sse: score,
                });
            }
        }
    }
    best
}

struct TreeBuilder<'a, T> {
    x: &'a Matrix<T>,
    y: &'a [T],
    w: &'a [T],
    cfg: TreeConfig,
    nodes: Vec<Node<T>>,
    rng: Option<(&'a mut ChaCha8Rng, usize)>,
}

impl<'a, T: Scalar> TreeBuilder<'a, T> {
    fn feature_pool(&mut self) -> Vec<usize> {
        match &mut self.rng {
            None => (0..self.x.cols()).collect(),
            Some((rng, n_sub)) => {
                let mut picked: Vec<usize> =
                    rand::seq::index::sample(rng, self.x.cols(), *n_sub).into_vec();
                picked.sort_unstable();
                picked
            }
        }
    }

    fn candidate(&mut self, indices: &[usize], depth: usize) -> Option<SplitChoice<T>> {
        if let Some(limit) = self.cfg.max_depth {
            if depth >= limit {
                return None;
            }
        }
        let mean = weighted_mean(self.y, self.w, indices);
        if weighted_sse(self.y, self.w, indices, mean) == T::zero() {
            return None;
        }
        let features = self.feature_pool();
        best_split(
            self.x,
            self.y,
            self.w,
            indices,
            &features,
            self.cfg.min_samples_leaf,
        )
    }

    /// Depth-first growth for unbounded leaf counts.
    fn grow(&mut self, indices: &[usize], depth: usize) -> usize {
        match self.candidate(indices, depth) {
            None => {
                self.nodes.push(Node::Leaf {
                    value: weighted_mean(self.y, self.w, indices),
                });
                self.nodes.len() - 1
            }
            Some(split) => {
                let slot = self.nodes.len();
                self.nodes.push(Node::Leaf { value: T::zero() }); // placeholder
                let left = self.grow(&split.left, depth + 1);
                let right = self.grow(&split.right, depth + 1);
                self.nodes[slot] = Node::Split {
                    feature: split.feature,
                    threshold: split.threshold,
                    left,
                    right,
                };
                slot
            }
        }
    }

    /// Best-first growth under a leaf budget: repeatedly expand the
    /// pending leaf with the largest SSE reduction (FIFO on ties).
    fn grow_best_first(&mut self, indices: Vec<usize>, max_leaves: usize) {
        struct Pending<T> {
            order: usize,
            slot: usize,
            depth: usize,
            reduction: T,
            split: SplitChoice<T>,
        }
        self.nodes.push(Node::Leaf {
            value: weighted_mean(self.y, self.w, &indices),
        });
        let mut queue: Vec<Pending<T>> = Vec::new();
        let mut order = 0usize;
        let push = |builder: &mut Self, queue: &mut Vec<Pending<T>>, slot: usize, idx: &[usize], depth: usize, order: &mut usize| {
            if let Some(split) = builder.candidate(idx, depth) {
                let mean = weighted_mean(builder.y, builder.w, idx);
                let parent = weighted_sse(builder.y, builder.w, idx, mean);
                queue.push(Pending {
                    order: *order,
                    slot,
                    depth,
                    reduction: parent - split.children_sse,
                    split,
                });
                *order += 1;
            }
        };
        push(self, &mut queue, 0, &indices, 0, &mut order);
        let mut leaves = 1usize;
        while leaves < max_leaves && !queue.is_empty() {
            // largest reduction wins; ties go to the oldest entry
            let mut pick = 0;
            for i in 1..queue.len() {
                let better = queue[i].reduction > queue[pick].reduction
                    || (queue[i].reduction == queue[pick].reduction
                        && queue[i].order < queue[pick].order);
                if better {
                    pick = i;
                }
            }
            let Pending {
                slot,
                depth,
                split,
                ..
            } = queue.swap_remove(pick);
            let left_slot = self.nodes.len();
            self.nodes.push(Node::Leaf {
                value: weighted_mean(self.y, self.w, &split.left),
            });
            let right_slot = self.nodes.len();
            self.nodes.push(Node::Leaf {
                value: weighted_mean(self.y, self.w, &split.right),
            });
            self.nodes[slot] = Node::Split {
                feature: split.feature,
                threshold: split.threshold,
                left: left_slot,
                right: right_slot,
            };
            leaves += 1;
            push(self, &mut queue, left_slot, &split.left, depth + 1, &mut order);
            push(self, &mut queue, right_slot, &split.right, depth + 1, &mut order);
        }
    }
}

fn fit_tree_with<T: Scalar>(
    x: &Matrix<T>,
    y: &[T],
    w: &[T],
    cfg: &TreeConfig,
    rng: Option<(&mut ChaCha8Rng, usize)>,
) -> Result<Tree<T>> {
    cfg.validate()?;
    let n = x.rows();
    if n == 0 {
        return Err(CoreError::InvalidInput("empty training data".into()));
    }
    if y.len() != n || w.len() != n {
        return Err(CoreError::DimensionMismatch(format!(
            "{n} rows vs {} labels and {} weights",
            y.len(),
            w.len()
        )));
    }
    if w.iter().any(|v| !v.is_finite() || *v < T::zero()) {
        return Err(CoreError::InvalidInput(
            "weights must be finite and nonnegative".into(),
        ));
    }
    let indices: Vec<usize> = (0..n).filter(|&i| w[i] > T::zero()).collect();
    if indices.is_empty() {
        return Err(CoreError::InvalidInput(
            "total sample weight must be positive".into(),
        ));
    }
    let mut builder = TreeBuilder {
        x,
        y,
        w,
        cfg: *cfg,
        nodes: Vec::new(),
        rng,
    };
    match cfg.max_leaf_nodes {
        Some(max_leaves) => builder.grow_best_first(indices, max_leaves),
        None => {
            builder.grow(&indices, 0);
        }
    }
    Ok(Tree {
        nodes: builder.nodes,
    })
}

pub fn fit_tree<T: Scalar>(x: &Matrix<T>, y: &[T], w: &[T], cfg: &TreeConfig) -> Result<Tree<T>> {
    fit_tree_with(x, y, w, cfg, None)
}

pub fn predict_tree<T: Scalar>(tree: &Tree<T>, x: &Matrix<T>) -> Vec<T> {
    (0..x.rows()).map(|i| tree.predict_one(x.row(i))).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnsembleMode {
    Gbr,
    Rf,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub n_estimators: usize,
    pub learning_rate: f64,
    pub mode: EnsembleMode,
    pub bootstrap_seed: u64,
    #[serde(default = "default_feature_subsample")]
    pub feature_subsample: f64,
    #[serde(default = "default_bootstrap")]
    pub bootstrap: bool,
}

fn default_feature_subsample() -> f64 {
    1.0 / 3.0
}

fn default_bootstrap() -> bool {
    true
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        EnsembleConfig {
            n_estimators: 100,
            learning_rate: 0.1,
            mode: EnsembleMode::Gbr,
            bootstrap_seed: 0,
            feature_subsample: default_feature_subsample(),
            bootstrap: default_bootstrap(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ensemble<T> {
    pub base_prediction: T,
    pub trees: Vec<Tree<T>>,
    pub learning_rate: T,
    pub mode: EnsembleMode,
}

/// Boosted trees on residuals: `F = base + lr * sum(trees)`.
pub fn fit_gbr<T: Scalar>(
    x: &Matrix<T>,
    y: &[T],
    w: &[T],
    cfg: &EnsembleConfig,
    tree_cfg: &TreeConfig,
) -> Result<Ensemble<T>> {
    if cfg.mode != EnsembleMode::Gbr {
        return Err(CoreError::InvalidInput("config mode is not gbr".into()));
    }
    if !(cfg.learning_rate > 0.0) {
        return Err(CoreError::InvalidInput(
            "gbr learning_rate must be > 0".into(),
        ));
    }
    let n = x.rows();
    if n == 0 || y.len() != n || w.len() != n {
        return Err(CoreError::InvalidInput(
            "empty or inconsistent training data".into(),
        ));
    }
    let active: Vec<usize> = (0..n).filter(|&i| w[i] > T::zero()).collect();
    if active.is_empty() {
        return Err(CoreError::InvalidInput(
            "total sample weight must be positive".into(),
        ));
    }
    let base = weighted_mean(y, w, &active);
    let lr = T::of(cfg.learning_rate);
    let mut current: Vec<T> = vec![base; n];
    let mut trees = Vec::with_capacity(cfg.n_estimators);
    for _ in 0..cfg.n_estimators {
        let residuals: Vec<T> = y.iter().zip(&current).map(|(&a, &b)| a - b).collect();
        let tree = fit_tree(x, &residuals, w, tree_cfg)?;
        for (i, f) in current.iter_mut().enumerate() {
            *f += lr * tree.predict_one(x.row(i));
        }
        trees.push(tree);
    }
    Ok(Ensemble {
        base_prediction: base,
        trees,
        learning_rate: lr,
        mode: EnsembleMode::Gbr,
    })
}

/// Random forest on weighted bootstrap resamples (draw probability
/// proportional to weight); each split sees a seeded random subset of
/// features. Resample counts act as integer weights, so disabling
/// bootstrap reduces a 1-tree forest to a single weighted tree.
pub fn fit_rf<T: Scalar>(
    x: &Matrix<T>,
    y: &[T],
    w: &[T],
    cfg: &EnsembleConfig,
    tree_cfg: &TreeConfig,
) -> Result<Ensemble<T>> {
    if cfg.mode != EnsembleMode::Rf {
        return Err(CoreError::InvalidInput("config mode is not rf".into()));
    }
    if cfg.n_estimators == 0 {
        return Err(CoreError::InvalidInput(
            "random forest needs at least one tree".into(),
        ));
    }
    if !(cfg.feature_subsample > 0.0 && cfg.feature_subsample <= 1.0) {
        return Err(CoreError::InvalidInput(
            "feature_subsample must lie in (0, 1]".into(),
        ));
    }
    let n = x.rows();
    if n == 0 || y.len() != n || w.len() != n {
        return Err(CoreError::InvalidInput(
            "empty or inconsistent training data".into(),
        ));
    }
    let p = x.cols();
    let n_sub = ((p as f64 * cfg.feature_subsample).ceil() as usize).clamp(1, p);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.bootstrap_seed);
    let cumulative: Vec<T> = {
        let mut acc = T::zero();
        w.iter()
            .map(|&v| {
                acc += v;
                acc
            })
            .collect()
    };
    let total = *cumulative.last().unwrap();
    if !(total > T::zero()) {
        return Err(CoreError::InvalidInput(
            "total sample weight must be positive".into(),
        ));
    }
    let mut trees = Vec::with_capacity(cfg.n_estimators);
    for _ in 0..cfg.n_estimators {
        let weights: Vec<T> = if cfg.bootstrap {
            let mut counts = vec![T::zero(); n];
            for _ in 0..n {
                let u = T::of(rand::Rng::random_range(&mut rng, 0.0..1.0)) * total;
                let at = cumulative.partition_point(|&c| c <= u).min(n - 1);
                counts[at] += T::one();
            }
            counts
        } else {
            w.to_vec()
        };
        trees.push(fit_tree_with(x, y, &weights, tree_cfg, Some((&mut rng, n_sub)))?);
    }
    Ok(Ensemble {
        base_prediction: T::zero(),
        trees,
        learning_rate: T::one(),
        mode: EnsembleMode::Rf,
    })
}

pub fn predict_ensemble<T: Scalar>(ensemble: &Ensemble<T>, x: &Matrix<T>) -> Vec<T> {
    match ensemble.mode {
        EnsembleMode::Gbr => (0..x.rows())
            .map(|i| {
                let row = x.row(i);
                let boost: T = ensemble.trees.iter().map(|t| t.predict_one(row)).sum();
                ensemble.base_prediction + ensemble.learning_rate * boost
            })
            .collect(),
        EnsembleMode::Rf => {
            let count = T::of(ensemble.trees.len() as f64);
            (0..x.rows())
                .map(|i| {
                    let row = x.row(i);
                    let sum: T = ensemble.trees.iter().map(|t| t.predict_one(row)).sum();
                    sum / count
                })
                .collect()
        }
    }
}

#[derive(Serialize, Deserialize)]
struct EnsembleDoc<T> {
    version: u32,
    ensemble: Ensemble<T>,
}

pub fn save_ensemble<T: Scalar>(ensemble: &Ensemble<T>, path: &Path) -> Result<()> {
    let doc = EnsembleDoc {
        version: PERSIST_VERSION,
        ensemble: ensemble.clone(),
    };
    let json = serde_json::to_string(&doc)
        .map_err(|e| CoreError::InvalidInput(format!("ensemble serialization: {e}")))?;
    std::fs::write(path, json).map_err(|e| CoreError::io(path, e))
}

pub fn load_ensemble<T: Scalar + DeserializeOwned>(path: &Path) -> Result<Ensemble<T>> {
    let raw = std::fs::read_to_string(path).map_err(|e| CoreError::io(path, e))?;
    let doc: EnsembleDoc<T> = serde_json::from_str(&raw).map_err(|e| CoreError::Parse {
        path: path.display().to_string(),
        line: 0,
        message: format!("ensemble: {e}"),
    })?;
    if doc.version != PERSIST_VERSION {
        return Err(CoreError::SchemaMismatch {
            path: path.display().to_string(),
            message: format!("ensemble version {} unsupported", doc.version),
        });
    }
    Ok(doc.ensemble)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix_1d(values: &[f64]) -> Matrix<f64> {
        Matrix::from_rows(&values.iter().map(|&v| vec![v]).collect::<Vec<_>>())
    }

    #[test]
    fn constant_labels_make_single_leaf() {
        let x = matrix_1d(&[1.0, 2.0, 3.0]);
        let tree = fit_tree(&x, &[4.0; 3], &[1.0; 3], &TreeConfig::default()).unwrap();
        assert_eq!(tree.nodes.len(), 1);
        assert_eq!(tree.predict_one(&[9.0]), 4.0);
    }

    #[test]
    fn step_function_splits_at_midpoint() {
        let x = matrix_1d(&[1.0, 2.0, 3.0, 4.0]);
        let y = [0.0, 0.0, 1.0, 1.0];
        let cfg = TreeConfig {
            max_depth: Some(1),
            ..TreeConfig::default()
        };
        let tree = fit_tree(&x, &y, &[1.0; 4], &cfg).unwrap();
        match tree.nodes[0] {
            Node::Split {
                feature, threshold, ..
            } => {
                assert_eq!(feature, 0);
                assert_eq!(threshold, 2.5);
            }
            _ => panic!("expected a root split"),
        }
        assert_eq!(tree.predict_one(&[2.4]), 0.0);
        assert_eq!(tree.predict_one(&[2.5]), 0.0); // at threshold: left
        assert_eq!(tree.predict_one(&[2.6]), 1.0);
    }

    #[test]
    fn zero_weight_sample_is_invisible() {
        let x = matrix_1d(&[1.0, 2.0, 3.0, 4.0, 5.0]);
        let y = [0.0, 0.1, 5.0, 1.0, 1.2];
        let with_zero = fit_tree(&x, &y, &[1.0, 1.0, 0.0, 1.0, 1.0], &TreeConfig::default()).unwrap();
        let x_without = matrix_1d(&[1.0, 2.0, 4.0, 5.0]);
        let y_without = [0.0, 0.1, 1.0, 1.2];
        let without = fit_tree(&x_without, &y_without, &[1.0; 4], &TreeConfig::default()).unwrap();
        for probe in [0.5, 1.5, 2.9, 3.5, 4.9] {
            assert_eq!(with_zero.predict_one(&[probe]), without.predict_one(&[probe]));
        }
    }

    #[test]
    fn weight_replication_equivalence() {
        let x = matrix_1d(&[0.0, 1.0, 2.0, 3.0]);
        let y = [0.0, 1.0, 4.0, 9.0];
        let weighted = fit_tree(&x, &y, &[1.0, 3.0, 1.0, 1.0], &TreeConfig::default()).unwrap();
        let x_dup = matrix_1d(&[0.0, 1.0, 1.0, 1.0, 2.0, 3.0]);
        let y_dup = [0.0, 1.0, 1.0, 1.0, 4.0, 9.0];
        let duplicated = fit_tree(&x_dup, &y_dup, &[1.0; 6], &TreeConfig::default()).unwrap();
        for probe in [-0.5, 0.5, 1.5, 2.5, 3.5] {
            assert_eq!(
                weighted.predict_one(&[probe]),
                duplicated.predict_one(&[probe])
            );
        }
    }

    #[test]
    fn leaf_budget_limits_tree() {
        let x = matrix_1d(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]);
        let y = [0.0, 0.2, 1.0, 1.1, 4.0, 4.2, 9.0, 9.3];
        let cfg = TreeConfig {
            max_leaf_nodes: Some(3),
            ..TreeConfig::default()
        };
        let tree = fit_tree(&x, &y, &[1.0; 8], &cfg).unwrap();
        assert_eq!(tree.n_leaves(), 3);
    }

    #[test]
    fn gbr_zero_rounds_is_weighted_mean() {
        let x = matrix_1d(&[1.0, 2.0, 3.0]);
        let y = [1.0, 2.0, 6.0];
        let w = [1.0, 1.0, 2.0];
        let cfg = EnsembleConfig {
            n_estimators: 0,
            ..EnsembleConfig::default()
        };
        let model = fit_gbr(&x, &y, &w, &cfg, &TreeConfig::default()).unwrap();
        let pred = predict_ensemble(&model, &x);
        // (1 + 2 + 12) / 4
        assert!(pred.iter().all(|&v| (v - 3.75).abs() < 1e-15));
    }

    #[test]
    fn gbr_combination_rule() {
        let base = Ensemble {
            base_prediction: 1.0,
            trees: vec![Tree {
                nodes: vec![Node::Leaf { value: 2.0 }],
            }],
            learning_rate: 0.5,
            mode: EnsembleMode::Gbr,
        };
        let x = matrix_1d(&[0.0]);
        assert_eq!(predict_ensemble(&base, &x), vec![2.0]);
    }

    #[test]
    fn gbr_interpolates_clean_data() {
        let x = matrix_1d(&(0..100).map(|i| i as f64).collect::<Vec<_>>());
        let y: Vec<f64> = (0..100).map(|i| ((i * 37) % 11) as f64).collect();
        let cfg = EnsembleConfig {
            n_estimators: 50,
            learning_rate: 1.0,
            ..EnsembleConfig::default()
        };
        let model = fit_gbr(&x, &y, &[1.0; 100], &cfg, &TreeConfig::default()).unwrap();
        let pred = predict_ensemble(&model, &x);
        let mse: f64 = y
            .iter()
            .zip(&pred)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            / 100.0;
        assert!(mse < 1e-6, "mse {mse}");
    }

    #[test]
    fn gbr_training_mse_non_increasing() {
        let x = matrix_1d(&(0..40).map(|i| (i as f64 * 0.7).sin()).collect::<Vec<_>>());
        let y: Vec<f64> = (0..40).map(|i| (i as f64 * 0.3).cos() * 2.0).collect();
        let tree_cfg = TreeConfig {
            max_depth: Some(2),
            ..TreeConfig::default()
        };
        let mut previous = f64::INFINITY;
        for rounds in [0, 1, 2, 4, 8, 16] {
            let cfg = EnsembleConfig {
                n_estimators: rounds,
                learning_rate: 0.5,
                ..EnsembleConfig::default()
            };
            let model = fit_gbr(&x, &y, &[1.0; 40], &cfg, &tree_cfg).unwrap();
            let pred = predict_ensemble(&model, &x);
            let mse: f64 = y
                .iter()
                .zip(&pred)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                / 40.0;
            assert!(mse <= previous + 1e-12);
            previous = mse;
        }
    }

    #[test]
    fn rf_is_seed_deterministic() {
        let x = matrix_1d(&(0..30).map(|i| i as f64).collect::<Vec<_>>());
        let y: Vec<f64> = (0..30).map(|i| (i % 7) as f64).collect();
        let cfg = EnsembleConfig {
            n_estimators: 5,
            mode: EnsembleMode::Rf,
            bootstrap_seed: 11,
            feature_subsample: 1.0,
            ..EnsembleConfig::default()
        };
        let a = fit_rf(&x, &y, &[1.0; 30], &cfg, &TreeConfig::default()).unwrap();
        let b = fit_rf(&x, &y, &[1.0; 30], &cfg, &TreeConfig::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn degenerate_forest_equals_single_tree() {
        let x = matrix_1d(&[1.0, 2.0, 5.0, 6.0, 9.0]);
        let y = [0.0, 0.5, 3.0, 3.5, 8.0];
        let cfg = EnsembleConfig {
            n_estimators: 1,
            mode: EnsembleMode::Rf,
            bootstrap: false,
            feature_subsample: 1.0,
            ..EnsembleConfig::default()
        };
        let forest = fit_rf(&x, &y, &[1.0; 5], &cfg, &TreeConfig::default()).unwrap();
        let plain = fit_tree(&x, &y, &[1.0; 5], &TreeConfig::default()).unwrap();
        assert_eq!(forest.trees[0], plain);
        for probe in [0.0, 1.5, 5.5, 10.0] {
            assert_eq!(
                predict_ensemble(&forest, &matrix_1d(&[probe]))[0],
                plain.predict_one(&[probe])
            );
        }
    }

    #[test]
    fn rf_of_identical_trees_predicts_that_tree() {
        let leaf = Tree {
            nodes: vec![Node::Leaf { value: 2.5 }],
        };
        let forest = Ensemble {
            base_prediction: 0.0,
            trees: vec![leaf.clone(), leaf.clone(), leaf],
            learning_rate: 1.0,
            mode: EnsembleMode::Rf,
        };
        assert_eq!(predict_ensemble(&forest, &matrix_1d(&[1.0])), vec![2.5]);
    }

    #[test]
    fn ensemble_persistence_roundtrip() {
        let x = matrix_1d(&[1.0, 2.0, 3.0, 4.0]);
        let y = [0.0, 1.0, 1.0, 2.0];
        let cfg = EnsembleConfig {
            n_estimators: 3,
            ..EnsembleConfig::default()
        };
        let model = fit_gbr(&x, &y, &[1.0; 4], &cfg, &TreeConfig::default()).unwrap();
        let dir = std::env::temp_dir().join("ldf-core-tree-persist");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("ensemble.json");
        save_ensemble(&model, &path).unwrap();
        let loaded = load_ensemble::<f64>(&path).unwrap();
        assert_eq!(model, loaded);
        std::fs::remove_file(&path).ok();
    }

    #[test]
    fn empty_data_is_rejected() {
        let x = Matrix::<f64>::zeros(0, 1);
        assert!(fit_tree(&x, &[], &[], &TreeConfig::default()).is_err());
    }

    #[test]
    fn all_zero_weights_rejected() {
        let x = matrix_1d(&[1.0, 2.0]);
        assert!(fit_tree(&x, &[1.0, 2.0], &[0.0, 0.0], &TreeConfig::default()).is_err());
    }
}
