//! Hand-rolled neural network primitives: one-dimensional convolutions,
//! dense layers, activations, Glorot initialization, and Adam.
//!
//! All layer parameters live in one flat vector per model; specs carry
//! offsets into it. Feature maps are row-major matrices with rows as the
//! sequence axis and columns as channels.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::matrix::Matrix;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Activation {
    LeakyRelu { slope: f64 },
    Relu,
    Linear,
}

impl Activation {
    pub fn leaky_default() -> Self {
        Activation::LeakyRelu { slope: 0.01 }
    }

    pub fn apply<T: Scalar>(&self, z: T) -> T {
        match *self {
            Activation::LeakyRelu { slope } => {
                if z > T::zero() {
                    z
                } else {
                    T::of(slope) * z
                }
            }
            Activation::Relu => {
                if z > T::zero() {
                    z
                } else {
                    T::zero()
                }
            }
            Activation::Linear => z,
        }
    }

    /// Derivative as a function of the pre-activation.
    pub fn grad<T: Scalar>(&self, z: T) -> T {
        match *self {
            Activation::LeakyRelu { slope } => {
                if z > T::zero() {
                    T::one()
                } else {
                    T::of(slope)
                }
            }
            Activation::Relu => {
                if z > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Activation::Linear => T::one(),
        }
    }

    pub fn map<T: Scalar>(&self, m: &Matrix<T>) -> Matrix<T> {
        let mut out = m.clone();
        for v in out.data_mut() {
            *v = self.apply(*v);
        }
        out
    }

    /// Element-wise `upstream * act'(pre)`.
    pub fn chain<T: Scalar>(&self, pre: &Matrix<T>, upstream: &Matrix<T>) -> Matrix<T> {
        let mut out = upstream.clone();
        for (o, &z) in out.data_mut().iter_mut().zip(pre.data()) {
            *o = *o * self.grad(z);
        }
        out
    }
}

/// A stride-1 convolution layer's geometry plus its offsets into the flat
/// parameter vector. `pad` zero-pads both ends so output length equals
/// input length when `pad = (kernel - 1) / 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvSpec {
    pub cin: usize,
    pub cout: usize,
    pub kernel: usize,
    pub pad: usize,
    pub w_off: usize,
    pub b_off: usize,
}

impl ConvSpec {
    pub fn weight_len(&self) -> usize {
        self.cout * self.cin * self.kernel
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DenseSpec {
    pub input: usize,
    pub output: usize,
    pub w_off: usize,
    pub b_off: usize,
}

impl DenseSpec {
    pub fn weight_len(&self) -> usize {
        self.input * self.output
    }
}

#[inline]
fn conv_w_index(spec: &ConvSpec, o: usize, c: usize, t: usize) -> usize {
    spec.w_off + (o * spec.cin + c) * spec.kernel + t
}

/// `out[l][o] = b[o] + sum_{c,t} w[o][c][t] * x[l + t - pad][c]`.
pub fn conv_forward<T: Scalar>(x: &Matrix<T>, params: &[T], spec: &ConvSpec) -> Matrix<T> {
    debug_assert_eq!(x.cols(), spec.cin);
    let len = x.rows();
    let mut out = Matrix::zeros(len, spec.cout);
    for l in 0..len {
        for o in 0..spec.cout {
            let mut acc = params[spec.b_off + o];
            for t in 0..spec.kernel {
                let src = l + t;
                if src < spec.pad || src - spec.pad >= len {
                    continue;
                }
                let row = x.row(src - spec.pad);
                for (c, &xv) in row.iter().enumerate() {
                    acc += params[conv_w_index(spec, o, c, t)] * xv;
                }
            }
            out.set(l, o, acc);
        }
    }
    out
}

/// Accumulates weight/bias gradients into `grads` and returns the input
/// gradient.
pub fn conv_backward<T: Scalar>(
    x: &Matrix<T>,
    dout: &Matrix<T>,
    params: &[T],
    grads: &mut [T],
    spec: &ConvSpec,
) -> Matrix<T> {
    let len = x.rows();
    let mut dx = Matrix::zeros(len, spec.cin);
    for l in 0..len {
        for o in 0..spec.cout {
            let g = dout.get(l, o);
            if g == T::zero() {
                continue;
            }
            grads[spec.b_off + o] += g;
            for t in 0..spec.kernel {
                let src = l + t;
                if src < spec.pad || src - spec.pad >= len {
                    continue;
                }
                let src = src - spec.pad;
                for c in 0..spec.cin {
                    grads[conv_w_index(spec, o, c, t)] += g * x.get(src, c);
                    let dv = dx.get(src, c) + g * params[conv_w_index(spec, o, c, t)];
                    dx.set(src, c, dv);
                }
            }
        }
    }
    dx
}

pub fn dense_forward<T: Scalar>(x: &[T], params: &[T], spec: &DenseSpec) -> Vec<T> {
    debug_assert_eq!(x.len(), spec.input);
    let mut out = Vec::with_capacity(spec.output);
    for o in 0..spec.output {
        let mut acc = params[spec.b_off + o];
        let row = spec.w_off + o * spec.input;
        for (i, &xv) in x.iter().enumerate() {
            acc += params[row + i] * xv;
        }
        out.push(acc);
    }
    out
}

pub fn dense_backward<T: Scalar>(
    x: &[T],
    dout: &[T],
    params: &[T],
    grads: &mut [T],
    spec: &DenseSpec,
) -> Vec<T> {
    let mut dx = vec![T::zero(); spec.input];
    for o in 0..spec.output {
        let g = dout[o];
        if g == T::zero() {
            continue;
        }
        grads[spec.b_off + o] += g;
        let row = spec.w_off + o * spec.input;
        for i in 0..spec.input {
            grads[row + i] += g * x[i];
            dx[i] += g * params[row + i];
        }
    }
    dx
}

/// Fill `out` with draws from uniform(-a, a), a = sqrt(6 / (fan_in + fan_out)).
pub fn glorot_uniform<T: Scalar>(rng: &mut ChaCha8Rng, fan_in: usize, fan_out: usize, out: &mut [T]) {
    let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
    for v in out {
        *v = T::of(rng.random_range(-a..a));
    }
}

/// Adam with bias correction; one state entry per flat parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam<T> {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step_count: u32,
    m: Vec<T>,
    v: Vec<T>,
}

impl<T: Scalar> Adam<T> {
    pub fn new(learning_rate: f64, n_params: usize) -> Self {
        Adam {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step_count: 0,
            m: vec![T::zero(); n_params],
            v: vec![T::zero(); n_params],
        }
    }

    pub fn step(&mut self, params: &mut [T], grads: &[T]) {
        debug_assert_eq!(params.len(), self.m.len());
        debug_assert_eq!(params.len(), grads.len());
        self.step_count += 1;
        let b1 = T::of(self.beta1);
        let b2 = T::of(self.beta2);
        let lr = T::of(self.learning_rate);
        let eps = T::of(self.epsilon);
        let c1 = T::of(1.0 - self.beta1.powi(self.step_count as i32));
        let c2 = T::of(1.0 - self.beta2.powi(self.step_count as i32));
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = b1 * self.m[i] + (T::one() - b1) * g;
            self.v[i] = b2 * self.v[i] + (T::one() - b2) * g * g;
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
}
