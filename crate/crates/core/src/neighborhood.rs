//! Neighborhood clouds and the weighted, label-voided input tensor.
//!
//! Each objective sample gets the k most similar pool samples (Euclidean
//! distance over all normalized features, restricted to a day window).
//! Neighbor rows are inverse-distance weighted per feature and stacked
//! under the objective row; the objective's label cell is zeroed so the
//! model must reconstruct it from context.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{CoreError, Result};
use crate::matrix::{squared_distance, Matrix};
use crate::scalar::Scalar;

/// Inverse-distance regularizer keeping weights finite at zero distance.
pub const WEIGHT_EPSILON: f64 = 1e-6;
/// Neighborhood size used when nothing else is configured.
pub const DEFAULT_K: usize = 12;
/// Same-day matching unless widened.
pub const DEFAULT_DAY_WINDOW: i64 = 0;

/// Combined candidate pool. Global indices run over source rows first
/// (0..m), then target rows (m..m+n).
#[derive(Debug, Clone, Copy)]
pub struct Pool<'a, T> {
    pub source: &'a Dataset<T>,
    pub target: &'a Dataset<T>,
}

impl<'a, T: Scalar> Pool<'a, T> {
    pub fn new(source: &'a Dataset<T>, target: &'a Dataset<T>) -> Result<Self> {
        if source.feature_count() != target.feature_count() {
            return Err(CoreError::DimensionMismatch(format!(
                "pool halves disagree: {} vs {} features",
                source.feature_count(),
                target.feature_count()
            )));
        }
        Ok(Pool { source, target })
    }

    pub fn len(&self) -> usize {
        self.source.len() + self.target.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn feature_count(&self) -> usize {
        self.source.feature_count()
    }

    pub fn features(&self, index: usize) -> &[T] {
        let m = self.source.len();
        if index < m {
            self.source.features(index)
        } else {
            self.target.features(index - m)
        }
    }

    pub fn label(&self, index: usize) -> T {
        let m = self.source.len();
        if index < m {
            self.source.labels[index]
        } else {
            self.target.labels[index - m]
        }
    }

    pub fn day(&self, index: usize) -> i64 {
        let m = self.source.len();
        if index < m {
            self.source.day_index[index]
        } else {
            self.target.day_index[index - m]
        }
    }
}

/// The sample a cloud is built around. `pool_index` is its global pool
/// index when the sample is itself part of the pool (so it can be
/// excluded from its own neighbors), `None` for held-out samples.
#[derive(Debug, Clone, Copy)]
pub struct ObjectiveSample<'a, T> {
    pub features: &'a [T],
    pub day: i64,
    pub label: T,
    pub aux: Option<T>,
    pub pool_index: Option<usize>,
}

impl<'a, T: Scalar> ObjectiveSample<'a, T> {
    pub fn from_row(dataset: &'a Dataset<T>, row: usize, pool_index: Option<usize>) -> Self {
        ObjectiveSample {
            features: datasets_row(dataset, row),
            day: dataset.day_index[row],
            label: dataset.labels[row],
            aux: dataset.aux_labels.as_ref().map(|a| a[row]),
            pool_index,
        }
    }
}

fn datasets_row<T: Scalar>(dataset: &Dataset<T>, row: usize) -> &[T] {
    dataset.features(row)
}

/// The k nearest pool samples for one objective, nearest first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborhoodCloud<T> {
    pub objective_index: Option<usize>,
    pub neighbor_indices: Vec<usize>,
    pub distances: Vec<T>,
}

/// Input tensor for the latent-factor model: row 0 is the objective with
/// its label cell voided to 0, rows 1..k are weighted neighbors with
/// their true labels. The objective's label rides outside the tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdfInput<T> {
    pub tensor: Matrix<T>,
    pub target_label: T,
    pub aux_label: Option<T>,
}

/// Pick the k nearest pool samples to the objective among candidates
/// whose day lies within `day_window` of the objective's, excluding the
/// objective itself. Ties break toward the lower pool index.
pub fn build_cloud<T: Scalar>(
    pool: &Pool<'_, T>,
    objective: &ObjectiveSample<'_, T>,
    k: usize,
    day_window: i64,
) -> Result<NeighborhoodCloud<T>> {
    if k == 0 {
        return Err(CoreError::InvalidInput("k must be positive".into()));
    }
    if objective.features.len() != pool.feature_count() {
        return Err(CoreError::DimensionMismatch(format!(
            "objective has {} features, pool has {}",
            objective.features.len(),
            pool.feature_count()
        )));
    }
    let mut candidates: Vec<(T, usize)> = Vec::new();
    for index in 0..pool.len() {
        if objective.pool_index == Some(index) {
            continue;
        }
        if (pool.day(index) - objective.day).abs() > day_window {
            continue;
        }
        candidates.push((squared_distance(objective.features, pool.features(index)), index));
    }
    if candidates.len() < k {
        return Err(CoreError::InvalidInput(format!(
            "day {}: only {} candidates within day window {day_window}, need {k}",
            objective.day,
            candidates.len()
        )));
    }
    candidates.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    candidates.truncate(k);
    Ok(NeighborhoodCloud {
        objective_index: objective.pool_index,
        neighbor_indices: candidates.iter().map(|&(_, i)| i).collect(),
        distances: candidates.iter().map(|&(d, _)| d.sqrt()).collect(),
    })
}

/// Per-feature inverse-distance weights between the objective and each
/// neighbor, `1 / (|delta| + 1e-6)`, rescaled so every feature column's
/// maximum is 1.
pub fn feature_weights<T: Scalar>(objective: &[T], neighbors: &[&[T]]) -> Result<Matrix<T>> {
    let p = objective.len();
    if neighbors.is_empty() {
        return Err(CoreError::InvalidInput("no neighbors to weight".into()));
    }
    for row in neighbors {
        if row.len() != p {
            return Err(CoreError::DimensionMismatch(format!(
                "neighbor has {} features, objective has {p}",
                row.len()
            )));
        }
    }
    let eps = T::of(WEIGHT_EPSILON);
    let mut weights = Matrix::zeros(neighbors.len(), p);
    for (j, row) in neighbors.iter().enumerate() {
        for f in 0..p {
            let w = T::one() / ((objective[f] - row[f]).abs() + eps);
            weights.set(j, f, w);
        }
    }
    for f in 0..p {
        let mut max = T::zero();
        for j in 0..neighbors.len() {
            if weights.get(j, f) > max {
                max = weights.get(j, f);
            }
        }
        for j in 0..neighbors.len() {
            let v = weights.get(j, f) / max;
            weights.set(j, f, v);
        }
    }
    Ok(weights)
}

/// Stack the objective over its weighted neighbors into a
/// `(k+1) x (p+1)` tensor. Row 0 keeps the raw objective features and a
/// voided label cell; neighbor rows carry weighted features and their
/// own labels.
pub fn assemble_ldf_input<T: Scalar>(
    objective: &ObjectiveSample<'_, T>,
    cloud: &NeighborhoodCloud<T>,
    pool: &Pool<'_, T>,
    weights: &Matrix<T>,
) -> Result<LdfInput<T>> {
    let k = cloud.neighbor_indices.len();
    let p = pool.feature_count();
    if weights.rows() != k || weights.cols() != p {
        return Err(CoreError::DimensionMismatch(format!(
            "weight matrix {}x{} does not match cloud {}x{}",
            weights.rows(),
            weights.cols(),
            k,
            p
        )));
    }
    let mut tensor = Matrix::zeros(k + 1, p + 1);
    for f in 0..p {
        tensor.set(0, f, objective.features[f]);
    }
    // tensor[0][p] stays 0: the label the model must infer
    for (j, &index) in cloud.neighbor_indices.iter().enumerate() {
        let features = pool.features(index);
        for f in 0..p {
            tensor.set(j + 1, f, weights.get(j, f) * features[f]);
        }
        tensor.set(j + 1, p, pool.label(index));
    }
    if !tensor.all_finite() {
        return Err(CoreError::InvalidInput(
            "assembled tensor contains a non-finite value".into(),
        ));
    }
    Ok(LdfInput {
        tensor,
        target_label: objective.label,
        aux_label: objective.aux,
    })
}

/// Cloud + weights + assembly for one objective.
pub fn ldf_input_for<T: Scalar>(
    pool: &Pool<'_, T>,
    objective: &ObjectiveSample<'_, T>,
    k: usize,
    day_window: i64,
) -> Result<LdfInput<T>> {
    let cloud = build_cloud(pool, objective, k, day_window)?;
    let neighbor_rows: Vec<&[T]> = cloud
        .neighbor_indices
        .iter()
        .map(|&i| pool.features(i))
        .collect();
    let weights = feature_weights(objective.features, &neighbor_rows)?;
    assemble_ldf_input(objective, &cloud, pool, &weights)
}

/// Inputs for every row of `dataset`. When the dataset is one of the two
/// pool halves, `pool_offset` gives its first global index so each row is
/// excluded from its own cloud; held-out datasets pass `None`.
pub fn ldf_inputs_for_dataset<T: Scalar>(
    pool: &Pool<'_, T>,
    dataset: &Dataset<T>,
    pool_offset: Option<usize>,
    k: usize,
    day_window: i64,
) -> Result<Vec<LdfInput<T>>> {
    (0..dataset.len())
        .map(|row| {
            let objective =
                ObjectiveSample::from_row(dataset, row, pool_offset.map(|off| off + row));
            ldf_input_for(pool, &objective, k, day_window)
        })
        .collect()
}

/// Clouds only, for inspection dumps.
pub fn clouds_for_dataset<T: Scalar>(
    pool: &Pool<'_, T>,
    dataset: &Dataset<T>,
    pool_offset: Option<usize>,
    k: usize,
    day_window: i64,
) -> Result<Vec<NeighborhoodCloud<T>>> {
    (0..dataset.len())
        .map(|row| {
            let objective =
                ObjectiveSample::from_row(dataset, row, pool_offset.map(|off| off + row));
            build_cloud(pool, &objective, k, day_window)
        })
        .collect()
}
