//! Declarative experiment description. One JSON document drives `bench`
//! and `ablate-k`; the utility subcommands reuse its sub-sections.

use std::fmt;
use std::path::{Path, PathBuf};

use ldf_core::{ArchConfig, CoreError, FeatureSchema, KernelKind, Result, SynthConfig};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Rf,
    Gbr,
    Nnw,
    Kliep,
    Kmm,
    Fnn,
}

impl ModelKind {
    pub fn is_transfer(self) -> bool {
        matches!(self, ModelKind::Nnw | ModelKind::Kliep | ModelKind::Kmm)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ModelKind::Rf => "RF",
            ModelKind::Gbr => "GBR",
            ModelKind::Nnw => "NNW",
            ModelKind::Kliep => "KLIEP",
            ModelKind::Kmm => "KMM",
            ModelKind::Fnn => "FNN",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Plain,
    Ldf,
    LdfA,
}

impl Variant {
    /// Estimator heads the autoencoder needs for this variant, if any.
    pub fn estimator_outputs(self) -> Option<usize> {
        match self {
            Variant::Plain => None,
            Variant::Ldf => Some(1),
            Variant::LdfA => Some(2),
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Variant::Plain => "plain",
            Variant::Ldf => "ldf",
            Variant::LdfA => "ldf-a",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RosterEntry {
    pub model: ModelKind,
    pub variant: Variant,
}

impl fmt::Display for RosterEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.variant {
            Variant::Plain => write!(f, "{}", self.model),
            Variant::Ldf => write!(f, "{} [LDF]", self.model),
            Variant::LdfA => write!(f, "{} [LDF-A]", self.model),
        }
    }
}

/// Where the experiment's source/target pair comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataSpec {
    Synth {
        #[serde(default)]
        config: SynthConfig,
        #[serde(default)]
        seed: Option<u64>,
    },
    Csv {
        source_path: PathBuf,
        target_path: PathBuf,
        schema: FeatureSchema,
    },
}

impl Default for DataSpec {
    fn default() -> Self {
        DataSpec::Synth {
            config: SynthConfig::default(),
            seed: None,
        }
    }
}

/// Autoencoder settings shared by every LDF variant; the pipeline fills
/// in per-cell seeds and the per-variant estimator head count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AeSection {
    pub arch: ArchConfig,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
}

impl Default for AeSection {
    fn default() -> Self {
        AeSection {
            arch: ArchConfig::default(),
            epochs: 30,
            batch_size: 16,
            learning_rate: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FnnSection {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
}

impl Default for FnnSection {
    fn default() -> Self {
        FnnSection {
            epochs: 40,
            batch_size: 32,
            learning_rate: 1e-3,
        }
    }
}

/// Hyperparameter grids searched per roster entry. `None` entries in the
/// depth/leaf lists mean unbounded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSection {
    pub ensemble_n_estimators: Vec<usize>,
    pub ensemble_max_depth: Vec<Option<usize>>,
    pub ensemble_max_leaf_nodes: Vec<Option<usize>>,
    pub gbr_learning_rates: Vec<f64>,
    pub tree_max_depth: Vec<Option<usize>>,
    pub nnw_n_neighbors: Vec<usize>,
    pub kernels: Vec<KernelKind>,
    pub gammas: Vec<f64>,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection {
            ensemble_n_estimators: vec![100, 400, 1000],
            ensemble_max_depth: vec![Some(4), Some(8), None],
            ensemble_max_leaf_nodes: vec![Some(4), Some(8), None],
            gbr_learning_rates: vec![0.1, 0.5, 1.0],
            tree_max_depth: vec![Some(6), Some(8), None],
            nnw_n_neighbors: vec![6, 8, 10],
            kernels: vec![KernelKind::Rbf, KernelKind::Poly],
            gammas: vec![0.1, 0.5, 1.0],
        }
    }
}

/// Solver settings that are not grid-searched.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReweightSection {
    pub poly_degree: u32,
    pub kliep_n_centers: usize,
    pub kliep_max_iter: usize,
    pub kliep_tol: f64,
    pub kmm_b_bound: f64,
    pub kmm_eps: Option<f64>,
    pub kmm_max_iter: usize,
    pub kmm_tol: f64,
}

impl Default for ReweightSection {
    fn default() -> Self {
        ReweightSection {
            poly_degree: 2,
            kliep_n_centers: 100,
            kliep_max_iter: 300,
            kliep_tol: 1e-6,
            kmm_b_bound: 1000.0,
            kmm_eps: None,
            kmm_max_iter: 300,
            kmm_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub data: DataSpec,
    pub roster: Vec<RosterEntry>,
    pub sensor_counts: Vec<usize>,
    pub cv_repeats: usize,
    pub samples_per_sensor: usize,
    pub k_neighbors: usize,
    pub day_window: i64,
    pub autoencoder: AeSection,
    pub fnn: FnnSection,
    pub grids: GridSection,
    pub reweight: ReweightSection,
    pub master_seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            data: DataSpec::default(),
            roster: vec![
                RosterEntry {
                    model: ModelKind::Nnw,
                    variant: Variant::Plain,
                },
                RosterEntry {
                    model: ModelKind::Nnw,
                    variant: Variant::Ldf,
                },
            ],
            sensor_counts: vec![5, 7, 9, 11],
            cv_repeats: 20,
            samples_per_sensor: 20,
            k_neighbors: 12,
            day_window: 0,
            autoencoder: AeSection::default(),
            fnn: FnnSection::default(),
            grids: GridSection::default(),
            reweight: ReweightSection::default(),
            master_seed: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.cv_repeats == 0 {
            return Err(CoreError::InvalidInput("cv_repeats must be >= 1".into()));
        }
        if self.sensor_counts.is_empty() {
            return Err(CoreError::InvalidInput(
                "sensor_counts must be nonempty".into(),
            ));
        }
        if self.roster.is_empty() {
            return Err(CoreError::InvalidInput("roster must be nonempty".into()));
        }
        let mut seen = self.roster.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.roster.len() {
            return Err(CoreError::InvalidInput(
                "roster entries must be distinct".into(),
            ));
        }
        if self.k_neighbors == 0 {
            return Err(CoreError::InvalidInput("k_neighbors must be >= 1".into()));
        }
        if self.samples_per_sensor == 0 {
            return Err(CoreError::InvalidInput(
                "samples_per_sensor must be >= 1".into(),
            ));
        }
        if self.autoencoder.arch.latent_dim != 1 {
            return Err(CoreError::InvalidInput(
                "the pipeline imputes a single latent column; latent_dim must be 1".into(),
            ));
        }
        let g = &self.grids;
        if g.tree_max_depth.is_empty()
            || g.ensemble_n_estimators.is_empty()
            || g.ensemble_max_depth.is_empty()
            || g.ensemble_max_leaf_nodes.is_empty()
            || g.gbr_learning_rates.is_empty()
            || g.nnw_n_neighbors.is_empty()
            || g.kernels.is_empty()
            || g.gammas.is_empty()
        {
            return Err(CoreError::InvalidInput(
                "every hyperparameter grid must be nonempty".into(),
            ));
        }
        Ok(())
    }
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let raw = std::fs::read_to_string(path).map_err(|e| CoreError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    serde_json::from_str(&raw).map_err(|e| CoreError::Parse {
        path: path.display().to_string(),
        line: e.line(),
        message: e.to_string(),
    })
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let json = serde_json::to_string_pretty(value)
        .map_err(|e| CoreError::InvalidInput(format!("serialization: {e}")))?;
    std::fs::write(path, json).map_err(|e| CoreError::Io {
        path: path.display().to_string(),
        source: e,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_document_fills_defaults() {
        let cfg: ExperimentConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(cfg.sensor_counts, vec![5, 7, 9, 11]);
        assert_eq!(cfg.cv_repeats, 20);
        assert_eq!(cfg.k_neighbors, 12);
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn roster_labels_read_like_table_rows() {
        let e = RosterEntry {
            model: ModelKind::Nnw,
            variant: Variant::LdfA,
        };
        assert_eq!(e.to_string(), "NNW [LDF-A]");
    }

    #[test]
    fn duplicate_roster_entries_are_rejected() {
        let mut cfg = ExperimentConfig::default();
        cfg.roster.push(cfg.roster[0]);
        assert!(cfg.validate().is_err());
    }
}
