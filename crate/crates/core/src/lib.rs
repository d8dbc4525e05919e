//! Spatial transfer learning for sensor networks.
//!
//! The crate covers the full pipeline: synthetic scenario generation,
//! neighborhood-cloud construction, a convolutional autoencoder that
//! distills each cloud into a single latent dependency factor, instance
//! reweighting for covariate shift, and weighted tree ensembles for the
//! final regression.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`);
//! the `*32` / `*64` aliases below pick a concrete precision.

pub mod autoencoder;
pub mod data;
pub mod error;
pub mod fnn;
pub mod matrix;
pub mod metrics;
pub mod neighborhood;
pub mod nn;
pub mod reweight;
pub mod scalar;
pub mod synth;
pub mod trees;

pub use autoencoder::{
    impute_ldf, load_model, save_model, train, ArchConfig, AutoencoderModel, EpochLoss, Stage,
    StageSchedule, TrainConfig, LDF_COLUMN,
};
pub use data::{
    apply_normalizer, fit_normalizer, load_csv, save_csv, split_by_sensor, Dataset, DomainTag,
    FeatureSchema, Metrics, NormStats, DAY_COLUMN, SENSOR_ID_COLUMN,
};
pub use error::{CoreError, Result};
pub use fnn::{predict_fnn, train_fnn, FnnModel};
pub use matrix::Matrix;
pub use metrics::{evaluate, pearson, r_squared, rmse};
pub use neighborhood::{
    assemble_ldf_input, build_cloud, clouds_for_dataset, feature_weights, ldf_input_for,
    ldf_inputs_for_dataset, LdfInput, NeighborhoodCloud, ObjectiveSample, Pool, DEFAULT_DAY_WINDOW,
    DEFAULT_K,
};
pub use reweight::{
    kernel_eval, kliep_weights, kmm_weights, nnw_weights, KernelConfig, KernelKind, MethodTag,
    WeightVector,
};
pub use scalar::Scalar;
pub use synth::{generate, morans_i, Box2, FourierField, GroundTruth, SynthConfig};
pub use trees::{
    fit_gbr, fit_rf, fit_tree, load_ensemble, predict_ensemble, predict_tree, save_ensemble,
    Ensemble, EnsembleConfig, EnsembleMode, Tree, TreeConfig,
};

/// Crate version, baked in so downstream tools can stamp run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub type Matrix32 = Matrix<f32>;
pub type Matrix64 = Matrix<f64>;
pub type Dataset32 = Dataset<f32>;
pub type Dataset64 = Dataset<f64>;
pub type AutoencoderModel32 = AutoencoderModel<f32>;
pub type AutoencoderModel64 = AutoencoderModel<f64>;
pub type WeightVector32 = WeightVector<f32>;
pub type WeightVector64 = WeightVector<f64>;
pub type Ensemble32 = Ensemble<f32>;
pub type Ensemble64 = Ensemble<f64>;
pub type Tree32 = Tree<f32>;
pub type Tree64 = Tree<f64>;
pub type FnnModel32 = FnnModel<f32>;
pub type FnnModel64 = FnnModel<f64>;
