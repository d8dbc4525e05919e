//! One-file persistence for standalone regressors, used by `train`,
//! `predict`, and `grid-predict`. The file records the feature names the
//! model was fit on so prediction can reject mismatched data instead of
//! silently permuting columns.

use std::path::Path;

use ldf_core::{
    fit_gbr, fit_rf, fit_tree, predict_ensemble, predict_fnn, predict_tree, train_fnn, CoreError,
    Dataset64, Ensemble, EnsembleConfig, EnsembleMode, FnnModel, Matrix64, Result, StageSchedule,
    TrainConfig, Tree, TreeConfig,
};
use serde::{Deserialize, Serialize};

use crate::config::FnnSection;

const REGRESSOR_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum RegressorKind {
    Tree,
    Rf,
    Gbr,
    Fnn,
}

/// Hyperparameters for `train`, all optional with the library defaults.
/// The ensemble mode comes from the subcommand flag, not the file.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainDoc {
    pub tree: TreeConfig,
    pub n_estimators: Option<usize>,
    pub learning_rate: Option<f64>,
    pub feature_subsample: Option<f64>,
    pub bootstrap: Option<bool>,
    pub fnn: FnnSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegressorFile {
    pub version: u32,
    pub kind: RegressorKind,
    pub feature_names: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tree: Option<Tree<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ensemble: Option<Ensemble<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fnn: Option<FnnModel<f64>>,
}

impl RegressorFile {
    pub fn fit(
        kind: RegressorKind,
        data: &Dataset64,
        weights: &[f64],
        doc: &TrainDoc,
        seed: u64,
    ) -> Result<RegressorFile> {
        let x = &data.samples;
        let y = &data.labels;
        let mut file = RegressorFile {
            version: REGRESSOR_VERSION,
            kind,
            feature_names: data.feature_names.clone(),
            tree: None,
            ensemble: None,
            fnn: None,
        };
        match kind {
            RegressorKind::Tree => {
                file.tree = Some(fit_tree(x, y, weights, &doc.tree)?);
            }
            RegressorKind::Rf | RegressorKind::Gbr => {
                let defaults = EnsembleConfig::default();
                let cfg = EnsembleConfig {
                    n_estimators: doc.n_estimators.unwrap_or(100),
                    learning_rate: doc.learning_rate.unwrap_or(0.1),
                    mode: if kind == RegressorKind::Rf {
                        EnsembleMode::Rf
                    } else {
                        EnsembleMode::Gbr
                    },
                    bootstrap_seed: seed,
                    feature_subsample: doc.feature_subsample.unwrap_or(if kind == RegressorKind::Rf {
                        defaults.feature_subsample
                    } else {
                        1.0
                    }),
                    bootstrap: doc.bootstrap.unwrap_or(kind == RegressorKind::Rf),
                };
                file.ensemble = Some(match cfg.mode {
                    EnsembleMode::Rf => fit_rf(x, y, weights, &cfg, &doc.tree)?,
                    EnsembleMode::Gbr => fit_gbr(x, y, weights, &cfg, &doc.tree)?,
                });
            }
            RegressorKind::Fnn => {
                let tcfg = TrainConfig {
                    epochs: doc.fnn.epochs,
                    batch_size: doc.fnn.batch_size,
                    learning_rate: doc.fnn.learning_rate,
                    seed,
                    schedule: StageSchedule::EvenOdd,
                };
                file.fnn = Some(train_fnn(x, y, Some(weights), &tcfg)?);
            }
        }
        Ok(file)
    }

    /// Feature-name agreement is the schema contract: order and spelling
    /// must match what the model saw at fit time.
    pub fn check_features(&self, data: &Dataset64, path_label: &str) -> Result<()> {
        if self.feature_names != data.feature_names {
            return Err(CoreError::SchemaMismatch {
                path: path_label.to_string(),
                message: format!(
                    "model was fit on features [{}] but data has [{}]",
                    self.feature_names.join(", "),
                    data.feature_names.join(", ")
                ),
            });
        }
        Ok(())
    }

    pub fn predict(&self, x: &Matrix64) -> Result<Vec<f64>> {
        match (self.kind, &self.tree, &self.ensemble, &self.fnn) {
            (RegressorKind::Tree, Some(t), _, _) => Ok(predict_tree(t, x)),
            (RegressorKind::Rf | RegressorKind::Gbr, _, Some(e), _) => Ok(predict_ensemble(e, x)),
            (RegressorKind::Fnn, _, _, Some(m)) => predict_fnn(m, x),
            _ => Err(CoreError::InvalidInput(
                "regressor file is missing its model payload".into(),
            )),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::config::write_json(self, path)
    }

    pub fn load(path: &Path) -> Result<RegressorFile> {
        let file: RegressorFile = crate::config::read_json(path)?;
        if file.version != REGRESSOR_VERSION {
            return Err(CoreError::SchemaMismatch {
                path: path.display().to_string(),
                message: format!("regressor version {} unsupported", file.version),
            });
        }
        Ok(file)
    }
}
