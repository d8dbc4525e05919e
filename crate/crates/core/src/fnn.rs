//! Feedforward baseline: three 128-unit rectified layers and a linear
//! output, trained on (optionally instance-weighted) squared error with
//! the same optimizer as the autoencoder.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autoencoder::TrainConfig;
use crate::error::{CoreError, Result};
use crate::matrix::Matrix;
use crate::nn::{dense_backward, dense_forward, glorot_uniform, Activation, Adam, DenseSpec};
use crate::scalar::Scalar;

const HIDDEN: usize = 128;
const DIVERGENCE_FACTOR: f64 = 1e6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FnnModel<T> {
    pub input_dim: usize,
    pub params: Vec<T>,
    layers: [DenseSpec; 4],
}

impl<T: Scalar> FnnModel<T> {
    pub fn init(input_dim: usize, seed: u64) -> Result<Self> {
        if input_dim == 0 {
            return Err(CoreError::InvalidInput("input_dim must be positive".into()));
        }
        let mut off = 0;
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
        let layers = [
            dense(input_dim, HIDDEN),
            dense(HIDDEN, HIDDEN),
            dense(HIDDEN, HIDDEN),
            dense(HIDDEN, 1),
        ];
        let mut params = vec![T::zero(); off];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for spec in &layers {
            glorot_uniform(
                &mut rng,
                spec.input,
                spec.output,
                &mut params[spec.w_off..spec.w_off + spec.weight_len()],
            );
        }
        Ok(FnnModel {
            input_dim,
            params,
            layers,
        })
    }

    fn forward(&self, x: &[T]) -> (Vec<Vec<T>>, T) {
        let act = Activation::Relu;
        let mut pre = Vec::with_capacity(4);
        let mut current = x.to_vec();
        for (i, spec) in self.layers.iter().enumerate() {
            let z = dense_forward(&current, &self.params, spec);
            current = if i < 3 {
                z.iter().map(|&v| act.apply(v)).collect()
            } else {
                z.clone()
            };
            pre.push(z);
        }
        let out = current[0];
        (pre, out)
    }

    /// Squared-error gradients for one sample, scaled by `scale`.
    fn backward(&self, x: &[T], pre: &[Vec<T>], dout: T, grads: &mut [T]) {
        let act = Activation::Relu;
        let activations: Vec<Vec<T>> = (0..3)
            .map(|i| pre[i].iter().map(|&z| act.apply(z)).collect())
            .collect();
        let mut upstream = vec![dout];
        for i in (0..4).rev() {
            let input: &[T] = if i == 0 { x } else { &activations[i - 1] };
            let mut dx = dense_backward(input, &upstream, &self.params, grads, &self.layers[i]);
            if i > 0 {
                for (g, &z) in dx.iter_mut().zip(&pre[i - 1]) {
                    *g = *g * act.grad(z);
                }
            }
            upstream = dx;
        }
    }

    pub fn predict_one(&self, x: &[T]) -> Result<T> {
        if x.len() != self.input_dim {
            return Err(CoreError::DimensionMismatch(format!(
                "{} inputs for a {}-input network",
                x.len(),
                self.input_dim
            )));
        }
        Ok(self.forward(x).1)
    }
}

/// Train on rows of `x` against `y` with per-sample weights (uniform when
/// absent). Loss per batch is `mean_i w_i (pred_i - y_i)^2`, so zero
/// weights contribute zero gradient.
pub fn train_fnn<T: Scalar>(
    x: &Matrix<T>,
    y: &[T],
    weights: Option<&[T]>,
    cfg: &TrainConfig,
) -> Result<FnnModel<T>> {
    let n = x.rows();
    if n == 0 {
        return Err(CoreError::InvalidInput("no training samples".into()));
    }
    if y.len() != n {
        return Err(CoreError::DimensionMismatch(format!(
            "{n} rows vs {} labels",
            y.len()
        )));
    }
    if let Some(w) = weights {
        if w.len() != n {
            return Err(CoreError::DimensionMismatch(format!(
                "{n} rows vs {} weights",
                w.len()
            )));
        }
    }
    if cfg.batch_size == 0 {
        return Err(CoreError::InvalidInput("batch_size must be positive".into()));
    }
    let mut model = FnnModel::init(x.cols(), cfg.seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut optimizer = Adam::new(cfg.learning_rate, model.params.len());
    let mut order: Vec<usize> = (0..n).collect();
    let mut initial: Option<T> = None;
    let two = T::of(2.0);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size) {
            let scale = T::of(1.0 / chunk.len() as f64);
            let mut grads = vec![T::zero(); model.params.len()];
            let mut batch_loss = T::zero();
            for &i in chunk {
                let w = weights.map_or(T::one(), |w| w[i]);
                let (pre, out) = model.forward(x.row(i));
                let err = out - y[i];
                batch_loss += w * err * err;
                model.backward(x.row(i), &pre, scale * two * w * err, &mut grads);
            }
            batch_loss = batch_loss * scale;
            let reference = *initial.get_or_insert(batch_loss);
            let ceiling = reference.max(T::of(1e-12)) * T::of(DIVERGENCE_FACTOR);
            if !batch_loss.is_finite() || batch_loss > ceiling {
                return Err(CoreError::Divergence(format!(
                    "loss {batch_loss} at epoch {epoch} (initial {reference})"
                )));
            }
            optimizer.step(&mut model.params, &grads);
        }
    }
    Ok(model)
}

pub fn predict_fnn<T: Scalar>(model: &FnnModel<T>, x: &Matrix<T>) -> Result<Vec<T>> {
    (0..x.rows()).map(|i| model.predict_one(x.row(i))).collect()
}
