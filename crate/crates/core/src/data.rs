//! Dataset representation, CSV ingestion, normalization, and sensor splits.

use std::collections::BTreeSet;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

/// Reserved CSV column holding the sensor identifier.
pub const SENSOR_ID_COLUMN: &str = "sensor_id";
/// Reserved CSV column holding the day-of-year index.
pub const DAY_COLUMN: &str = "doy";

/// Which domain a dataset belongs to in a transfer experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DomainTag {
    Source,
    Target,
}

/// Column layout of a dataset CSV: feature names, which two features are
/// the planar coordinates, and the label column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub feature_names: Vec<String>,
    pub coordinate_indices: (usize, usize),
    pub label_name: String,
    pub aux_label_name: Option<String>,
}

impl FeatureSchema {
    pub fn new(
        feature_names: Vec<String>,
        coordinate_indices: (usize, usize),
        label_name: String,
        aux_label_name: Option<String>,
    ) -> Result<Self> {
        let p = feature_names.len();
        let unique: BTreeSet<&String> = feature_names.iter().collect();
        if unique.len() != p {
            return Err(CoreError::InvalidInput(
                "feature names must be unique".into(),
            ));
        }
        let (cx, cy) = coordinate_indices;
        if cx == cy || cx >= p || cy >= p {
            return Err(CoreError::InvalidInput(format!(
                "coordinate indices ({cx}, {cy}) must be distinct and < {p}"
            )));
        }
        if feature_names.contains(&label_name) {
            return Err(CoreError::InvalidInput(format!(
                "label '{label_name}' collides with a feature name"
            )));
        }
        if let Some(aux) = &aux_label_name {
            if feature_names.contains(aux) || *aux == label_name {
                return Err(CoreError::InvalidInput(format!(
                    "aux label '{aux}' collides with another column"
                )));
            }
        }
        Ok(FeatureSchema {
            feature_names,
            coordinate_indices,
            label_name,
            aux_label_name,
        })
    }

    pub fn feature_count(&self) -> usize {
        self.feature_names.len()
    }
}

/// A table of samples: feature matrix, labels, and per-sample metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset<T> {
    pub feature_names: Vec<String>,
    pub coordinate_indices: (usize, usize),
    pub samples: Matrix<T>,
    pub labels: Vec<T>,
    pub aux_labels: Option<Vec<T>>,
    pub sensor_ids: Vec<i64>,
    pub day_index: Vec<i64>,
    pub domain: DomainTag,
}

impl<T: Scalar> Dataset<T> {
    /// Validating constructor: parallel lengths must agree and every value
    /// must be finite.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        feature_names: Vec<String>,
        coordinate_indices: (usize, usize),
        samples: Matrix<T>,
        labels: Vec<T>,
        aux_labels: Option<Vec<T>>,
        sensor_ids: Vec<i64>,
        day_index: Vec<i64>,
        domain: DomainTag,
    ) -> Result<Self> {
        let n = samples.rows();
        if samples.cols() != feature_names.len() {
            return Err(CoreError::DimensionMismatch(format!(
                "{} feature names but {} columns",
                feature_names.len(),
                samples.cols()
            )));
        }
        if labels.len() != n || sensor_ids.len() != n || day_index.len() != n {
            return Err(CoreError::DimensionMismatch(
                "labels, sensor_ids and day_index must match the row count".into(),
            ));
        }
        if let Some(aux) = &aux_labels {
            if aux.len() != n {
                return Err(CoreError::DimensionMismatch(
                    "aux labels must match the row count".into(),
                ));
            }
            if !aux.iter().all(|v| v.is_finite()) {
                return Err(CoreError::InvalidInput("non-finite aux label".into()));
            }
        }
        if !samples.all_finite() || !labels.iter().all(|v| v.is_finite()) {
            return Err(CoreError::InvalidInput(
                "dataset contains a non-finite value".into(),
            ));
        }
        Ok(Dataset {
            feature_names,
            coordinate_indices,
            samples,
            labels,
            aux_labels,
            sensor_ids,
            day_index,
            domain,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn feature_count(&self) -> usize {
        self.samples.cols()
    }

    pub fn features(&self, i: usize) -> &[T] {
        self.samples.row(i)
    }

    /// Planar coordinates of row `i` in schema order (x-like, y-like).
    pub fn coordinates(&self, i: usize) -> (T, T) {
        let row = self.samples.row(i);
        (row[self.coordinate_indices.0], row[self.coordinate_indices.1])
    }

    /// Distinct sensor ids in ascending order.
    pub fn distinct_sensors(&self) -> Vec<i64> {
        let set: BTreeSet<i64> = self.sensor_ids.iter().copied().collect();
        set.into_iter().collect()
    }

    /// New dataset holding the given rows (in the given order).
    pub fn subset(&self, indices: &[usize]) -> Dataset<T> {
        let rows: Vec<Vec<T>> = indices.iter().map(|&i| self.samples.row(i).to_vec()).collect();
        Dataset {
            feature_names: self.feature_names.clone(),
            coordinate_indices: self.coordinate_indices,
            samples: if rows.is_empty() {
                Matrix::zeros(0, self.feature_count())
            } else {
                Matrix::from_rows(&rows)
            },
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            aux_labels: self
                .aux_labels
                .as_ref()
                .map(|aux| indices.iter().map(|&i| aux[i]).collect()),
            sensor_ids: indices.iter().map(|&i| self.sensor_ids[i]).collect(),
            day_index: indices.iter().map(|&i| self.day_index[i]).collect(),
            domain: self.domain,
        }
    }

    /// Same rows with one extra feature column appended.
    pub fn with_column(&self, name: &str, values: Vec<T>) -> Result<Dataset<T>> {
        if values.len() != self.len() {
            return Err(CoreError::DimensionMismatch(format!(
                "column '{name}' has {} values for {} rows",
                values.len(),
                self.len()
            )));
        }
        if self.feature_names.iter().any(|n| n == name) {
            return Err(CoreError::InvalidInput(format!(
                "column '{name}' already exists"
            )));
        }
        let mut names = self.feature_names.clone();
        names.push(name.to_string());
        Ok(Dataset {
            feature_names: names,
            coordinate_indices: self.coordinate_indices,
            samples: self.samples.push_column(&values),
            labels: self.labels.clone(),
            aux_labels: self.aux_labels.clone(),
            sensor_ids: self.sensor_ids.clone(),
            day_index: self.day_index.clone(),
            domain: self.domain,
        })
    }
}

/// Per-feature normalization statistics (population standard deviation;
/// zero-variance columns get deviation 1 so they map to 0).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats<T> {
    pub mean: Vec<T>,
    pub std: Vec<T>,
}

/// Evaluation metrics in label units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics<T> {
    pub r_squared: T,
    pub rmse: T,
}

/// Read a dataset from CSV. The header must contain exactly the schema
/// columns plus `sensor_id` and `doy`; cells must be finite numbers.
pub fn load_csv<T: Scalar>(
    path: &Path,
    schema: &FeatureSchema,
    domain: DomainTag,
) -> Result<Dataset<T>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => CoreError::Io {
                path: path.display().to_string(),
                source: std::io::Error::other(e.to_string()),
            },
            _ => CoreError::SchemaMismatch {
                path: path.display().to_string(),
                message: e.to_string(),
            },
        })?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| CoreError::SchemaMismatch {
            path: path.display().to_string(),
            message: e.to_string(),
        })?
        .iter()
        .map(str::to_string)
        .collect();

    let mut expected: Vec<&str> = vec![SENSOR_ID_COLUMN, DAY_COLUMN];
    expected.extend(schema.feature_names.iter().map(String::as_str));
    expected.push(&schema.label_name);
    if let Some(aux) = &schema.aux_label_name {
        expected.push(aux);
    }
    for col in &headers {
        if !expected.contains(&col.as_str()) {
            return Err(CoreError::SchemaMismatch {
                path: path.display().to_string(),
                message: format!("unknown column '{col}'"),
            });
        }
    }
    let index_of = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CoreError::SchemaMismatch {
                path: path.display().to_string(),
                message: format!("missing column '{name}'"),
            })
    };
    let sensor_col = index_of(SENSOR_ID_COLUMN)?;
    let day_col = index_of(DAY_COLUMN)?;
    let feature_cols: Vec<usize> = schema
        .feature_names
        .iter()
        .map(|n| index_of(n))
        .collect::<Result<_>>()?;
    let label_col = index_of(&schema.label_name)?;
    let aux_col = match &schema.aux_label_name {
        Some(name) => Some(index_of(name)?),
        None => None,
    };

    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut aux_labels = Vec::new();
    let mut sensor_ids = Vec::new();
    let mut day_index = Vec::new();
    for (record_idx, record) in reader.records().enumerate() {
        // header is line 1, first record line 2
        let line = record_idx + 2;
        let record = record.map_err(|e| CoreError::Parse {
            path: path.display().to_string(),
            line,
            message: e.to_string(),
        })?;
        let cell = |col: usize, what: &str| -> Result<&str> {
            let raw = record.get(col).unwrap_or("");
            if raw.trim().is_empty() {
                return Err(CoreError::Parse {
                    path: path.display().to_string(),
                    line,
                    message: format!("empty {what} cell in column {}", headers[col]),
                });
            }
            Ok(raw.trim())
        };
        let numeric = |col: usize, what: &str| -> Result<T> {
            let raw = cell(col, what)?;
            let v: f64 = raw.parse().map_err(|_| CoreError::Parse {
                path: path.display().to_string(),
                line,
                message: format!("non-numeric {what} cell '{raw}' in column {}", headers[col]),
            })?;
            if !v.is_finite() {
                return Err(CoreError::Parse {
                    path: path.display().to_string(),
                    line,
                    message: format!("non-finite {what} cell in column {}", headers[col]),
                });
            }
            Ok(T::of(v))
        };
        sensor_ids.push(cell(sensor_col, "sensor id")?.parse::<i64>().map_err(|_| {
            CoreError::Parse {
                path: path.display().to_string(),
                line,
                message: "non-integer sensor_id".into(),
            }
        })?);
        day_index.push(cell(day_col, "day")?.parse::<i64>().map_err(|_| CoreError::Parse {
            path: path.display().to_string(),
            line,
            message: "non-integer doy".into(),
        })?);
        let mut row = Vec::with_capacity(feature_cols.len());
        for &col in &feature_cols {
            row.push(numeric(col, "feature")?);
        }
        rows.push(row);
        labels.push(numeric(label_col, "label")?);
        if let Some(col) = aux_col {
            aux_labels.push(numeric(col, "aux label")?);
        }
    }

    let p = schema.feature_count();
    let samples = if rows.is_empty() {
        Matrix::zeros(0, p)
    } else {
        Matrix::from_rows(&rows)
    };
    Dataset::new(
        schema.feature_names.clone(),
        schema.coordinate_indices,
        samples,
        labels,
        aux_col.map(|_| aux_labels),
        sensor_ids,
        day_index,
        domain,
    )
}

/// Write a dataset as CSV in the canonical column order
/// (`sensor_id`, `doy`, features, label, aux label).
pub fn save_csv<T: Scalar>(dataset: &Dataset<T>, label_name: &str, aux_name: Option<&str>, path: &Path) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| CoreError::Io {
        path: path.display().to_string(),
        source: std::io::Error::other(e.to_string()),
    })?;
    let mut header: Vec<String> = vec![SENSOR_ID_COLUMN.into(), DAY_COLUMN.into()];
    header.extend(dataset.feature_names.iter().cloned());
    header.push(label_name.to_string());
    if dataset.aux_labels.is_some() {
        header.push(aux_name.unwrap_or("aux").to_string());
    }
    let io_err = |e: csv::Error| CoreError::Io {
        path: path.display().to_string(),
        source: std::io::Error::other(e.to_string()),
    };
    writer.write_record(&header).map_err(io_err)?;
    for i in 0..dataset.len() {
        let mut record: Vec<String> = vec![
            dataset.sensor_ids[i].to_string(),
            dataset.day_index[i].to_string(),
        ];
        record.extend(dataset.features(i).iter().map(|v| format!("{}", v.as_f64())));
        record.push(format!("{}", dataset.labels[i].as_f64()));
        if let Some(aux) = &dataset.aux_labels {
            record.push(format!("{}", aux[i].as_f64()));
        }
        writer.write_record(&record).map_err(io_err)?;
    }
    writer.flush().map_err(|e| CoreError::io(path, e))?;
    Ok(())
}

/// Per-feature mean and population standard deviation over the
/// concatenation of all provided datasets.
pub fn fit_normalizer<T: Scalar>(datasets: &[&Dataset<T>]) -> Result<NormStats<T>> {
    let p = datasets
        .first()
        .ok_or_else(|| CoreError::InvalidInput("no datasets given".into()))?
        .feature_count();
    let total: usize = datasets.iter().map(|d| d.len()).sum();
    if total == 0 {
        return Err(CoreError::InvalidInput(
            "cannot fit a normalizer on zero samples".into(),
        ));
    }
    for d in datasets {
        if d.feature_count() != p {
            return Err(CoreError::DimensionMismatch(
                "datasets disagree on feature count".into(),
            ));
        }
    }
    let n = T::of(total as f64);
    let mut mean = vec![T::zero(); p];
    for d in datasets {
        for row in d.samples.iter_rows().take(d.len()) {
            for (m, &v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
    }
    for m in &mut mean {
        *m = *m / n;
    }
    let mut var = vec![T::zero(); p];
    for d in datasets {
        for row in d.samples.iter_rows().take(d.len()) {
            for ((s, &v), &m) in var.iter_mut().zip(row).zip(&mean) {
                let dev = v - m;
                *s += dev * dev;
            }
        }
    }
    let std = var
        .iter()
        .map(|&s| {
            let v = s / n;
            if v == T::zero() {
                T::one()
            } else {
                v.sqrt()
            }
        })
        .collect();
    Ok(NormStats { mean, std })
}

/// Map each feature column through `(x - mean) / std`; labels untouched.
pub fn apply_normalizer<T: Scalar>(dataset: &Dataset<T>, stats: &NormStats<T>) -> Result<Dataset<T>> {
    let p = dataset.feature_count();
    if stats.mean.len() != p || stats.std.len() != p {
        return Err(CoreError::DimensionMismatch(format!(
            "normalizer has {} features, dataset has {p}",
            stats.mean.len()
        )));
    }
    let mut out = dataset.clone();
    for i in 0..out.len() {
        let row = out.samples.row_mut(i);
        for j in 0..p {
            row[j] = (row[j] - stats.mean[j]) / stats.std[j];
        }
    }
    Ok(out)
}

/// Draw `n_train_sensors` sensors without replacement, keep up to
/// `samples_per_sensor` random rows from each, and put every row of the
/// remaining sensors in the test set. Deterministic given `seed`.
pub fn split_by_sensor<T: Scalar>(
    dataset: &Dataset<T>,
    n_train_sensors: usize,
    samples_per_sensor: usize,
    seed: u64,
) -> Result<(Dataset<T>, Dataset<T>)> {
    let sensors = dataset.distinct_sensors();
    if sensors.len() < n_train_sensors {
        return Err(CoreError::InvalidInput(format!(
            "need {n_train_sensors} sensors, dataset has {}",
            sensors.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen: Vec<i64> = rand::seq::index::sample(&mut rng, sensors.len(), n_train_sensors)
        .into_iter()
        .map(|i| sensors[i])
        .collect();
    chosen.sort_unstable();

    let mut train_rows = Vec::new();
    for &sensor in &chosen {
        let rows: Vec<usize> = (0..dataset.len())
            .filter(|&i| dataset.sensor_ids[i] == sensor)
            .collect();
        if rows.len() <= samples_per_sensor {
            train_rows.extend(rows);
        } else {
            let picked = rand::seq::index::sample(&mut rng, rows.len(), samples_per_sensor);
            train_rows.extend(picked.into_iter().map(|i| rows[i]));
        }
    }
    train_rows.sort_unstable();
    let chosen_set: BTreeSet<i64> = chosen.into_iter().collect();
    let test_rows: Vec<usize> = (0..dataset.len())
        .filter(|&i| !chosen_set.contains(&dataset.sensor_ids[i]))
        .collect();
    Ok((dataset.subset(&train_rows), dataset.subset(&test_rows)))
}
