//! Two-stage autoencoder over neighborhood tensors.
//!
//! The encoder compresses a (k+1)x(p+1) tensor to one latent scalar; the
//! decoder reconstructs the tensor; the estimator maps the latent to the
//! objective's label (and optionally an auxiliary label). Training
//! alternates between the reconstruction and estimation objectives, both
//! driving the shared encoder, so the latent becomes a single feature
//! that carries the neighborhood's information about the label.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{CoreError, Result};
use crate::matrix::Matrix;
use crate::neighborhood::{
    assemble_ldf_input, feature_weights, LdfInput, NeighborhoodCloud, ObjectiveSample, Pool,
};
use crate::nn::{
    conv_backward, conv_forward, dense_backward, dense_forward, glorot_uniform, Activation, Adam,
    ConvSpec, DenseSpec,
};
use crate::scalar::Scalar;

/// Name of the feature column appended by imputation.
pub const LDF_COLUMN: &str = "ldf";

const CHECKPOINT_VERSION: u32 = 1;
const REQUIRED_KERNELS: [usize; 3] = [1, 1, 3];
const DIVERGENCE_FACTOR: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArchConfig {
    pub conv_channels: [usize; 3],
    pub conv_kernels: [usize; 3],
    pub latent_dim: usize,
    pub activation: Activation,
    pub estimator_outputs: usize,
}

impl Default for ArchConfig {
    fn default() -> Self {
        ArchConfig {
            conv_channels: [32, 16, 8],
            conv_kernels: REQUIRED_KERNELS,
            latent_dim: 1,
            activation: Activation::leaky_default(),
            estimator_outputs: 1,
        }
    }
}

impl ArchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.conv_kernels != REQUIRED_KERNELS {
            return Err(CoreError::InvalidInput(format!(
                "kernel sizes must be {REQUIRED_KERNELS:?}, got {:?}",
                self.conv_kernels
            )));
        }
        if self.latent_dim != 1 {
            return Err(CoreError::InvalidInput(
                "latent dimension is fixed at 1".into(),
            ));
        }
        if self.conv_channels.iter().any(|&c| c == 0) {
            return Err(CoreError::InvalidInput(
                "conv channel counts must be positive".into(),
            ));
        }
        if !(self.estimator_outputs == 1 || self.estimator_outputs == 2) {
            return Err(CoreError::InvalidInput(
                "estimator_outputs must be 1 or 2".into(),
            ));
        }
        Ok(())
    }
}

/// Offsets of every layer inside the flat parameter vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Layout {
    pub enc_conv: [ConvSpec; 3],
    pub enc_dense: DenseSpec,
    pub dec_dense: DenseSpec,
    pub dec_conv: [ConvSpec; 3],
    pub est: DenseSpec,
    pub total: usize,
}

fn build_layout(arch: &ArchConfig, k: usize, p: usize) -> Layout {
    let rows = k + 1;
    let cols = p + 1;
    let [c1, c2, c3] = arch.conv_channels;
    let mut off = 0;
    let mut conv = |cin: usize, cout: usize, kernel: usize| -> ConvSpec {
        let spec = ConvSpec {
            cin,
            cout,
            kernel,
            pad: (kernel - 1) / 2,
            w_off: off,
            b_off: off + cout * cin * kernel,
        };
        off = spec.b_off + cout;
        spec
    };
    let enc_conv = [conv(cols, c1, 1), conv(c1, c2, 1), conv(c2, c3, 3)];
    let dec_conv_geom = [(c3, c2, 3usize), (c2, c1, 1), (c1, cols, 1)];
    let mut dense = |input: usize, output: usize| -> DenseSpec {
        let spec = DenseSpec {
            input,
            output,
            w_off: off,
            b_off: off + input * output,
        };
        off = spec.b_off + output;
        spec
    };
    let enc_dense = dense(rows * c3, 1);
    let dec_dense = dense(1, rows * c3);
    let mut conv = |cin: usize, cout: usize, kernel: usize| -> ConvSpec {
        let spec = ConvSpec {
            cin,
            cout,
            kernel,
            pad: (kernel - 1) / 2,
            w_off: off,
            b_off: off + cout * cin * kernel,
        };
        off = spec.b_off + cout;
        spec
    };
    let dec_conv = [
        conv(dec_conv_geom[0].0, dec_conv_geom[0].1, dec_conv_geom[0].2),
        conv(dec_conv_geom[1].0, dec_conv_geom[1].1, dec_conv_geom[1].2),
        conv(dec_conv_geom[2].0, dec_conv_geom[2].1, dec_conv_geom[2].2),
    ];
    let mut dense = |input: usize, output: usize| -> DenseSpec {
        let spec = DenseSpec {
            input,
            output,
            w_off: off,
            b_off: off + input * output,
        };
        off = spec.b_off + output;
        spec
    };
    let est = dense(1, arch.estimator_outputs);
    Layout {
        enc_conv,
        enc_dense,
        dec_dense,
        dec_conv,
        est,
        total: off,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AutoencoderModel<T> {
    pub arch: ArchConfig,
    pub k: usize,
    pub p: usize,
    pub params: Vec<T>,
}

struct EncCache<T> {
    pre: Vec<Matrix<T>>,
    act: Vec<Matrix<T>>,
    flat: Vec<T>,
    latent: T,
}

struct DecCache<T> {
    dense_pre: Vec<T>,
    entry: Matrix<T>,
    pre: Vec<Matrix<T>>,
    act: Vec<Matrix<T>>,
    recon: Matrix<T>,
}

impl<T: Scalar> AutoencoderModel<T> {
    /// Glorot-uniform weights, zero biases, deterministic per seed.
    pub fn init(arch: ArchConfig, k: usize, p: usize, seed: u64) -> Result<Self> {
        let mut model = Self::zeroed(arch, k, p)?;
        let layout = model.layout();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for spec in layout.enc_conv.iter() {
            glorot_uniform(
                &mut rng,
                spec.cin * spec.kernel,
                spec.cout * spec.kernel,
                &mut model.params[spec.w_off..spec.w_off + spec.weight_len()],
            );
        }
        for spec in [layout.enc_dense, layout.dec_dense] {
            glorot_uniform(
                &mut rng,
                spec.input,
                spec.output,
                &mut model.params[spec.w_off..spec.w_off + spec.weight_len()],
            );
        }
        for spec in layout.dec_conv.iter() {
            glorot_uniform(
                &mut rng,
                spec.cin * spec.kernel,
                spec.cout * spec.kernel,
                &mut model.params[spec.w_off..spec.w_off + spec.weight_len()],
            );
        }
        let est = layout.est;
        glorot_uniform(
            &mut rng,
            est.input,
            est.output,
            &mut model.params[est.w_off..est.w_off + est.weight_len()],
        );
        Ok(model)
    }

    /// All-zero parameters (test hook: encodes everything to 0).
    pub fn zeroed(arch: ArchConfig, k: usize, p: usize) -> Result<Self> {
        arch.validate()?;
        if k == 0 || p == 0 {
            return Err(CoreError::InvalidInput(
                "need at least one neighbor and one feature".into(),
            ));
        }
        let layout = build_layout(&arch, k, p);
        Ok(AutoencoderModel {
            arch,
            k,
            p,
            params: vec![T::zero(); layout.total],
        })
    }

    pub(crate) fn layout(&self) -> Layout {
        build_layout(&self.arch, self.k, self.p)
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    fn check_shape(&self, tensor: &Matrix<T>) -> Result<()> {
        if tensor.rows() != self.k + 1 || tensor.cols() != self.p + 1 {
            return Err(CoreError::DimensionMismatch(format!(
                "input tensor {}x{} does not match model {}x{}",
                tensor.rows(),
                tensor.cols(),
                self.k + 1,
                self.p + 1
            )));
        }
        Ok(())
    }

    fn encoder_forward(&self, x: &Matrix<T>) -> EncCache<T> {
        let layout = self.layout();
        let act = self.arch.activation;
        let mut pre = Vec::with_capacity(3);
        let mut post = Vec::with_capacity(3);
        let mut current = x.clone();
        for spec in layout.enc_conv.iter() {
            let z = conv_forward(&current, &self.params, spec);
            current = act.map(&z);
            pre.push(z);
            post.push(current.clone());
        }
        let flat = current.data().to_vec();
        let latent = dense_forward(&flat, &self.params, &layout.enc_dense)[0];
        EncCache {
            pre,
            act: post,
            flat,
            latent,
        }
    }

    fn decoder_forward(&self, latent: T) -> DecCache<T> {
        let layout = self.layout();
        let act = self.arch.activation;
        let rows = self.k + 1;
        let c3 = self.arch.conv_channels[2];
        let dense_pre = dense_forward(&[latent], &self.params, &layout.dec_dense);
        let entry = Matrix::from_vec(
            rows,
            c3,
            dense_pre.iter().map(|&z| act.apply(z)).collect(),
        );
        let mut pre = Vec::with_capacity(2);
        let mut post = Vec::with_capacity(2);
        let mut current = entry.clone();
        for spec in layout.dec_conv.iter().take(2) {
            let z = conv_forward(&current, &self.params, spec);
            current = act.map(&z);
            pre.push(z);
            post.push(current.clone());
        }
        let recon = conv_forward(&current, &self.params, &layout.dec_conv[2]);
        DecCache {
            dense_pre,
            entry,
            pre,
            act: post,
            recon,
        }
    }

    /// Propagate a latent gradient back through the encoder, accumulating
    /// parameter gradients.
    fn encoder_backward(&self, x: &Matrix<T>, cache: &EncCache<T>, dlatent: T, grads: &mut [T]) {
        let layout = self.layout();
        let act = self.arch.activation;
        let dflat = dense_backward(
            &cache.flat,
            &[dlatent],
            &self.params,
            grads,
            &layout.enc_dense,
        );
        let c3 = self.arch.conv_channels[2];
        let mut upstream = Matrix::from_vec(self.k + 1, c3, dflat);
        for i in (0..3).rev() {
            let dz = act.chain(&cache.pre[i], &upstream);
            let input: &Matrix<T> = if i == 0 { x } else { &cache.act[i - 1] };
            upstream = conv_backward(input, &dz, &self.params, grads, &layout.enc_conv[i]);
        }
    }

    /// Propagate a reconstruction gradient back through the decoder;
    /// returns the latent gradient.
    fn decoder_backward(
        &self,
        latent: T,
        cache: &DecCache<T>,
        drecon: &Matrix<T>,
        grads: &mut [T],
    ) -> T {
        let layout = self.layout();
        let act = self.arch.activation;
        let d_act1 = conv_backward(&cache.act[1], drecon, &self.params, grads, &layout.dec_conv[2]);
        let dz1 = act.chain(&cache.pre[1], &d_act1);
        let d_act0 = conv_backward(&cache.act[0], &dz1, &self.params, grads, &layout.dec_conv[1]);
        let dz0 = act.chain(&cache.pre[0], &d_act0);
        let d_entry = conv_backward(&cache.entry, &dz0, &self.params, grads, &layout.dec_conv[0]);
        let mut d_dense = d_entry.data().to_vec();
        for (g, &z) in d_dense.iter_mut().zip(&cache.dense_pre) {
            *g = *g * act.grad(z);
        }
        dense_backward(&[latent], &d_dense, &self.params, grads, &layout.dec_dense)[0]
    }

    pub fn encode_tensor(&self, tensor: &Matrix<T>) -> Result<T> {
        self.check_shape(tensor)?;
        Ok(self.encoder_forward(tensor).latent)
    }

    pub fn encode(&self, input: &LdfInput<T>) -> Result<T> {
        self.encode_tensor(&input.tensor)
    }

    pub fn decode(&self, latent: T) -> Matrix<T> {
        self.decoder_forward(latent).recon
    }

    /// `out[i] = w_i * latent + b_i`.
    pub fn estimate(&self, latent: T) -> Vec<T> {
        dense_forward(&[latent], &self.params, &self.layout().est)
    }

    fn estimation_targets(&self, input: &LdfInput<T>) -> Result<Vec<T>> {
        let mut targets = vec![input.target_label];
        if self.arch.estimator_outputs == 2 {
            match input.aux_label {
                Some(aux) => targets.push(aux),
                None => {
                    return Err(CoreError::InvalidInput(
                        "two-output estimator needs an aux label on every input".into(),
                    ))
                }
            }
        }
        Ok(targets)
    }

    /// Per-sample reconstruction loss (mean over tensor cells); gradients
    /// scaled by `scale` are added to `grads` when provided.
    fn reconstruction_pass(
        &self,
        input: &LdfInput<T>,
        grad_scale: Option<(T, &mut [T])>,
    ) -> T {
        let x = &input.tensor;
        let enc = self.encoder_forward(x);
        let dec = self.decoder_forward(enc.latent);
        let cells = T::of((x.rows() * x.cols()) as f64);
        let mut loss = T::zero();
        for (r, &xv) in dec.recon.data().iter().zip(x.data()) {
            let d = *r - xv;
            loss += d * d;
        }
        loss = loss / cells;
        if let Some((scale, grads)) = grad_scale {
            let two = T::of(2.0);
            let mut drecon = dec.recon.clone();
            for (g, &xv) in drecon.data_mut().iter_mut().zip(x.data()) {
                *g = scale * two * (*g - xv) / cells;
            }
            let dlatent = self.decoder_backward(enc.latent, &dec, &drecon, grads);
            self.encoder_backward(x, &enc, dlatent, grads);
        }
        loss
    }

    /// Per-sample estimation loss (mean over estimator outputs).
    fn estimation_pass(
        &self,
        input: &LdfInput<T>,
        targets: &[T],
        grad_scale: Option<(T, &mut [T])>,
    ) -> T {
        let layout = self.layout();
        let x = &input.tensor;
        let enc = self.encoder_forward(x);
        let est = dense_forward(&[enc.latent], &self.params, &layout.est);
        let outputs = T::of(est.len() as f64);
        let mut loss = T::zero();
        for (&e, &t) in est.iter().zip(targets) {
            let d = e - t;
            loss += d * d;
        }
        loss = loss / outputs;
        if let Some((scale, grads)) = grad_scale {
            let two = T::of(2.0);
            let dest: Vec<T> = est
                .iter()
                .zip(targets)
                .map(|(&e, &t)| scale * two * (e - t) / outputs)
                .collect();
            let dlatent = dense_backward(&[enc.latent], &dest, &self.params, grads, &layout.est)[0];
            self.encoder_backward(x, &enc, dlatent, grads);
        }
        loss
    }

    /// Max relative disagreement between backpropagated and central
    /// finite-difference gradients (h = 1e-4), over both training stages.
    /// `target` replaces the input's own label for the estimation stage.
    pub fn gradient_check(&self, input: &LdfInput<T>, target: T) -> Result<T> {
        self.check_shape(&input.tensor)?;
        let mut probe = input.clone();
        probe.target_label = target;
        let targets = self.estimation_targets(&probe)?;
        let h = T::of(1e-4);
        let floor = T::of(1e-8);
        let mut worst = T::zero();
        for stage in [Stage::Reconstruction, Stage::Estimation] {
            let mut analytic = vec![T::zero(); self.params.len()];
            match stage {
                Stage::Reconstruction => {
                    self.reconstruction_pass(&probe, Some((T::one(), &mut analytic)));
                }
                Stage::Estimation => {
                    self.estimation_pass(&probe, &targets, Some((T::one(), &mut analytic)));
                }
            }
            let mut scratch = self.clone();
            for i in 0..self.params.len() {
                let original = self.params[i];
                scratch.params[i] = original + h;
                let plus = match stage {
                    Stage::Reconstruction => scratch.reconstruction_pass(&probe, None),
                    Stage::Estimation => scratch.estimation_pass(&probe, &targets, None),
                };
                scratch.params[i] = original - h;
                let minus = match stage {
                    Stage::Reconstruction => scratch.reconstruction_pass(&probe, None),
                    Stage::Estimation => scratch.estimation_pass(&probe, &targets, None),
                };
                scratch.params[i] = original;
                let numeric = (plus - minus) / (T::of(2.0) * h);
                let denom = analytic[i].abs().max(numeric.abs()).max(floor);
                let rel = (analytic[i] - numeric).abs() / denom;
                if rel > worst {
                    worst = rel;
                }
            }
        }
        Ok(worst)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Reconstruction,
    Estimation,
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Stage::Reconstruction => write!(f, "reconstruction"),
            Stage::Estimation => write!(f, "estimation"),
        }
    }
}

/// Which stage runs in which epoch. The default alternates strictly:
/// even epochs reconstruct, odd epochs estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageSchedule {
    EvenOdd,
    /// Repeats the given pattern across epochs.
    Pattern(Vec<Stage>),
}

impl StageSchedule {
    pub fn stage_for(&self, epoch: usize) -> Stage {
        match self {
            StageSchedule::EvenOdd => {
                if epoch % 2 == 0 {
                    Stage::Reconstruction
                } else {
                    Stage::Estimation
                }
            }
            StageSchedule::Pattern(stages) => stages[epoch % stages.len()],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    #[serde(default = "default_schedule")]
    pub schedule: StageSchedule,
}

fn default_schedule() -> StageSchedule {
    StageSchedule::EvenOdd
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 30,
            batch_size: 16,
            learning_rate: 1e-3,
            seed: 0,
            schedule: StageSchedule::EvenOdd,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(CoreError::InvalidInput("batch_size must be positive".into()));
        }
        if !self.learning_rate.is_finite() || self.learning_rate < 0.0 {
            return Err(CoreError::InvalidInput(
                "learning_rate must be finite and >= 0".into(),
            ));
        }
        if let StageSchedule::Pattern(p) = &self.schedule {
            if p.is_empty() {
                return Err(CoreError::InvalidInput("empty stage pattern".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss<T> {
    pub epoch: usize,
    pub stage: Stage,
    pub loss: T,
}

/// Minibatch training with one shared Adam state across both stages.
/// Returns the trained model and a per-epoch loss history.
pub fn train<T: Scalar>(
    mut model: AutoencoderModel<T>,
    inputs: &[LdfInput<T>],
    cfg: &TrainConfig,
) -> Result<(AutoencoderModel<T>, Vec<EpochLoss<T>>)> {
    if inputs.is_empty() {
        return Err(CoreError::InvalidInput("no training inputs".into()));
    }
    if cfg.epochs < 2 {
        return Err(CoreError::InvalidInput(
            "need at least 2 epochs so both stages run".into(),
        ));
    }
    cfg.validate()?;
    let mut targets = Vec::with_capacity(inputs.len());
    for input in inputs {
        model.check_shape(&input.tensor)?;
        targets.push(model.estimation_targets(input)?);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut optimizer = Adam::new(cfg.learning_rate, model.params.len());
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut initial: [Option<T>; 2] = [None, None];
    let mut order: Vec<usize> = (0..inputs.len()).collect();
    for epoch in 0..cfg.epochs {
        let stage = cfg.schedule.stage_for(epoch);
        order.shuffle(&mut rng);
        let mut epoch_loss = T::zero();
        let mut batches = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let scale = T::of(1.0 / chunk.len() as f64);
            let mut grads = vec![T::zero(); model.params.len()];
            let mut batch_loss = T::zero();
            for &i in chunk {
                let sample_loss = match stage {
                    Stage::Reconstruction => {
                        model.reconstruction_pass(&inputs[i], Some((scale, &mut grads)))
                    }
                    Stage::Estimation => {
                        model.estimation_pass(&inputs[i], &targets[i], Some((scale, &mut grads)))
                    }
                };
                batch_loss += sample_loss;
            }
            batch_loss = batch_loss * scale;
            let slot = match stage {
                Stage::Reconstruction => 0,
                Stage::Estimation => 1,
            };
            let reference = *initial[slot].get_or_insert(batch_loss);
            let ceiling = reference.max(T::of(1e-12)) * T::of(DIVERGENCE_FACTOR);
            if !batch_loss.is_finite() || batch_loss > ceiling {
                return Err(CoreError::Divergence(format!(
                    "{stage} loss {batch_loss} at epoch {epoch} (initial {reference})"
                )));
            }
            optimizer.step(&mut model.params, &grads);
            epoch_loss += batch_loss;
            batches += 1;
        }
        history.push(EpochLoss {
            epoch,
            stage,
            loss: epoch_loss / T::of(batches as f64),
        });
    }
    Ok((model, history))
}

/// Append the encoded latent of every sample as a new feature column.
/// Original columns are copied bit-for-bit.
pub fn impute_ldf<T: Scalar>(
    model: &AutoencoderModel<T>,
    dataset: &Dataset<T>,
    pool: &Pool<'_, T>,
    clouds: &[NeighborhoodCloud<T>],
) -> Result<Dataset<T>> {
    if clouds.len() != dataset.len() {
        return Err(CoreError::DimensionMismatch(format!(
            "{} clouds for {} samples",
            clouds.len(),
            dataset.len()
        )));
    }
    let mut column = Vec::with_capacity(dataset.len());
    for (row, cloud) in clouds.iter().enumerate() {
        let objective = ObjectiveSample::from_row(dataset, row, cloud.objective_index);
        let neighbors: Vec<&[T]> = cloud
            .neighbor_indices
            .iter()
            .map(|&i| pool.features(i))
            .collect();
        let weights = feature_weights(objective.features, &neighbors)?;
        let input = assemble_ldf_input(&objective, cloud, pool, &weights)?;
        column.push(model.encode(&input)?);
    }
    dataset.with_column(LDF_COLUMN, column)
}

#[derive(Serialize, Deserialize)]
struct CheckpointDoc<T> {
    version: u32,
    arch: ArchConfig,
    k: usize,
    p: usize,
    params: Vec<T>,
}

pub fn save_model<T: Scalar>(model: &AutoencoderModel<T>, path: &Path) -> Result<()> {
    let doc = CheckpointDoc {
        version: CHECKPOINT_VERSION,
        arch: model.arch,
        k: model.k,
        p: model.p,
        params: model.params.clone(),
    };
    let json = serde_json::to_string(&doc)
        .map_err(|e| CoreError::InvalidInput(format!("checkpoint serialization: {e}")))?;
    std::fs::write(path, json).map_err(|e| CoreError::io(path, e))
}

pub fn load_model<T: Scalar + DeserializeOwned>(path: &Path) -> Result<AutoencoderModel<T>> {
    let raw = std::fs::read_to_string(path).map_err(|e| CoreError::io(path, e))?;
    let doc: CheckpointDoc<T> = serde_json::from_str(&raw).map_err(|e| CoreError::Parse {
        path: path.display().to_string(),
        line: 0,
        message: format!("checkpoint: {e}"),
    })?;
    if doc.version != CHECKPOINT_VERSION {
        return Err(CoreError::SchemaMismatch {
            path: path.display().to_string(),
            message: format!("checkpoint version {} unsupported", doc.version),
        });
    }
    let model = AutoencoderModel {
        arch: doc.arch,
        k: doc.k,
        p: doc.p,
        params: doc.params,
    };
    model.arch.validate()?;
    let expected = model.layout().total;
    if model.params.len() != expected {
        return Err(CoreError::SchemaMismatch {
            path: path.display().to_string(),
            message: format!(
                "checkpoint has {} parameters, architecture needs {expected}",
                model.params.len()
            ),
        });
    }
    Ok(model)
}
