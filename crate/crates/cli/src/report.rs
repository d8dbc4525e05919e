//! Result aggregation and the files a run leaves behind: the long-format
//! results table, the run manifest, and the feature-correlation report.

use std::collections::BTreeMap;
use std::path::Path;

use ldf_core::{pearson, CoreError, Dataset, Metrics, Result, Scalar};
use serde::Serialize;

use crate::config::{ModelKind, RosterEntry, Variant};

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub model: ModelKind,
    pub variant: Variant,
    pub sensor_count: usize,
    pub mean_r2: f64,
    pub std_r2: f64,
    pub mean_rmse: f64,
    pub std_rmse: f64,
    /// 1 = best mean R² within this sensor_count (the "bold" row),
    /// 2 = second best (the "underline" row).
    pub rank_r2: usize,
    pub rank_rmse: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
}

/// Population mean/std; repeats are the whole population of interest and
/// a single repeat must still produce a finite std.
fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

impl ResultTable {
    pub fn from_cells(acc: &BTreeMap<(RosterEntry, usize), Vec<Metrics<f64>>>) -> ResultTable {
        let mut rows: Vec<ResultRow> = acc
            .iter()
            .map(|(&(entry, sensor_count), metrics)| {
                let r2: Vec<f64> = metrics.iter().map(|m| m.r_squared).collect();
                let rmse: Vec<f64> = metrics.iter().map(|m| m.rmse).collect();
                let (mean_r2, std_r2) = mean_std(&r2);
                let (mean_rmse, std_rmse) = mean_std(&rmse);
                ResultRow {
                    model: entry.model,
                    variant: entry.variant,
                    sensor_count,
                    mean_r2,
                    std_r2,
                    mean_rmse,
                    std_rmse,
                    rank_r2: 0,
                    rank_rmse: 0,
                }
            })
            .collect();
        rows.sort_by(|a, b| {
            (a.sensor_count, a.model, a.variant).cmp(&(b.sensor_count, b.model, b.variant))
        });
        let mut table = ResultTable { rows };
        table.assign_ranks();
        table
    }

    /// Ranks within each sensor_count: mean R² descending, mean RMSE
    /// ascending. Ties keep row order, so ranks stay deterministic.
    fn assign_ranks(&mut self) {
        let counts: Vec<usize> = {
            let mut c: Vec<usize> = self.rows.iter().map(|r| r.sensor_count).collect();
            c.dedup();
            c
        };
        for sc in counts {
            let idx: Vec<usize> = (0..self.rows.len())
                .filter(|&i| self.rows[i].sensor_count == sc)
                .collect();
            let mut by_r2 = idx.clone();
            by_r2.sort_by(|&a, &b| self.rows[b].mean_r2.total_cmp(&self.rows[a].mean_r2));
            for (rank, &i) in by_r2.iter().enumerate() {
                self.rows[i].rank_r2 = rank + 1;
            }
            let mut by_rmse = idx;
            by_rmse.sort_by(|&a, &b| self.rows[a].mean_rmse.total_cmp(&self.rows[b].mean_rmse));
            for (rank, &i) in by_rmse.iter().enumerate() {
                self.rows[i].rank_rmse = rank + 1;
            }
        }
    }

    pub fn row(&self, model: ModelKind, variant: Variant, sensor_count: usize) -> Option<&ResultRow> {
        self.rows
            .iter()
            .find(|r| r.model == model && r.variant == variant && r.sensor_count == sensor_count)
    }

    /// Float cells use the shortest round-trip form, so two runs that
    /// computed identical numbers emit identical bytes.
    pub fn to_csv_string(&self, k_column: Option<usize>) -> String {
        let mut out = String::new();
        if k_column.is_some() {
            out.push_str("k,");
        }
        out.push_str("model,variant,sensor_count,mean_r2,std_r2,mean_rmse,std_rmse,rank_r2,rank_rmse\n");
        for r in &self.rows {
            if let Some(k) = k_column {
                out.push_str(&format!("{k},"));
            }
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                r.model,
                r.variant,
                r.sensor_count,
                r.mean_r2,
                r.std_r2,
                r.mean_rmse,
                r.std_rmse,
                r.rank_r2,
                r.rank_rmse
            ));
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv_string(None)).map_err(|e| CoreError::Io {
            path: path.display().to_string(),
            source: e,
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CellRecord {
    pub repeat: usize,
    pub sensor_count: usize,
    pub split_seed: u64,
    pub m_source: usize,
    pub n_target_train: usize,
    pub n_target_test: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct CorrSummary {
    pub mean_abs: f64,
    pub min_abs: f64,
    pub max_abs: f64,
    pub cells: usize,
}

impl CorrSummary {
    pub fn from_values(values: &[f64]) -> Option<CorrSummary> {
        if values.is_empty() {
            return None;
        }
        let abs: Vec<f64> = values.iter().map(|v| v.abs()).collect();
        let mean_abs = abs.iter().sum::<f64>() / abs.len() as f64;
        let min_abs = abs.iter().copied().fold(f64::INFINITY, f64::min);
        let max_abs = abs.iter().copied().fold(0.0f64, f64::max);
        Some(CorrSummary {
            mean_abs,
            min_abs,
            max_abs,
            cells: values.len(),
        })
    }
}

/// Everything needed to reproduce or audit a run, minus the table itself:
/// seeds, package versions, per-cell split bookkeeping, the held-out
/// latent-column correlation, and wall-clock timings. Timings live here
/// rather than in the table so repeated runs stay byte-identical.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub master_seed: u64,
    pub synth_seed: Option<u64>,
    pub versions: BTreeMap<String, String>,
    pub cells: Vec<CellRecord>,
    pub ldf_label_correlation: Option<CorrSummary>,
    pub timings_secs: BTreeMap<String, f64>,
}

impl RunManifest {
    pub fn write_json(&self, path: &Path) -> Result<()> {
        crate::config::write_json(self, path)
    }
}

/// Pearson correlation of every feature column with the label, sorted by
/// falling |r|. Constant columns (either side) report 0.
pub fn correlation_report<T: Scalar>(dataset: &Dataset<T>) -> Vec<(String, T)> {
    let mut rows: Vec<(String, T)> = dataset
        .feature_names
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let col = dataset.samples.column(j);
            let r = pearson(&col, &dataset.labels).unwrap_or_else(|_| T::zero());
            (name.clone(), r)
        })
        .collect();
    rows.sort_by(|a, b| b.1.as_f64().abs().total_cmp(&a.1.as_f64().abs()));
    rows
}

pub fn write_correlation_csv<T: Scalar>(rows: &[(String, T)], path: &Path) -> Result<()> {
    let mut out = String::from("feature,correlation\n");
    for (name, r) in rows {
        out.push_str(&format!("{},{}\n", name, r.as_f64()));
    }
    std::fs::write(path, out).map_err(|e| CoreError::Io {
        path: path.display().to_string(),
        source: e,
    })
}
