//! Importance weights for source samples under covariate shift: nearest
//! neighbor counting, KLIEP density-ratio fitting, and kernel mean
//! matching. Every method returns nonnegative weights with mean close to
//! one so the effective sample size stays comparable across methods.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{CoreError, Result};
use crate::matrix::{dot, squared_distance, Matrix};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    Rbf,
    Poly,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelConfig {
    pub kind: KernelKind,
    pub gamma: f64,
    #[serde(default = "default_degree")]
    pub degree: u32,
}

fn default_degree() -> u32 {
    2
}

impl Default for KernelConfig {
    fn default() -> Self {
        KernelConfig {
            kind: KernelKind::Rbf,
            gamma: 0.5,
            degree: 2,
        }
    }
}

impl KernelConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0) {
            return Err(CoreError::InvalidInput(format!(
                "kernel gamma must be > 0, got {}",
                self.gamma
            )));
        }
        Ok(())
    }
}

/// rbf: `exp(-gamma * ||x - y||^2)`; poly: `(gamma * <x, y> + 1)^degree`.
pub fn kernel_eval<T: Scalar>(x: &[T], y: &[T], cfg: &KernelConfig) -> Result<T> {
    cfg.validate()?;
    if x.len() != y.len() {
        return Err(CoreError::DimensionMismatch(format!(
            "kernel inputs of length {} and {}",
            x.len(),
            y.len()
        )));
    }
    let gamma = T::of(cfg.gamma);
    Ok(match cfg.kind {
        KernelKind::Rbf => (-gamma * squared_distance(x, y)).exp(),
        KernelKind::Poly => (gamma * dot(x, y) + T::one()).powi(cfg.degree as i32),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodTag {
    Nnw,
    Kliep,
    Kmm,
    Uniform,
}

/// Per-source-sample importance weights, aligned to source row order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector<T> {
    pub weights: Vec<T>,
    pub method: MethodTag,
}

impl<T: Scalar> WeightVector<T> {
    pub fn uniform(m: usize) -> Self {
        WeightVector {
            weights: vec![T::one(); m],
            method: MethodTag::Uniform,
        }
    }

    pub fn mean(&self) -> T {
        self.weights.iter().copied().sum::<T>() / T::of(self.weights.len() as f64)
    }

    fn checked(self) -> Result<Self> {
        if self
            .weights
            .iter()
            .any(|w| !w.is_finite() || *w < T::zero())
        {
            return Err(CoreError::Divergence(
                "weight vector contains a negative or non-finite entry".into(),
            ));
        }
        Ok(self)
    }
}

/// Each target sample votes for its `n_neighbors` nearest source samples
/// (ties to the lower row index); counts are rescaled to mean 1:
/// `w_i = count_i * m / (n * n_neighbors)`. `n_neighbors = 1` is plain
/// Voronoi-cell counting.
pub fn nnw_weights<T: Scalar>(
    source: &Dataset<T>,
    target: &Dataset<T>,
    n_neighbors: usize,
) -> Result<WeightVector<T>> {
    let m = source.len();
    let n = target.len();
    if n_neighbors == 0 {
        return Err(CoreError::InvalidInput("n_neighbors must be >= 1".into()));
    }
    if m < n_neighbors {
        return Err(CoreError::InvalidInput(format!(
            "{m} source samples but n_neighbors = {n_neighbors}"
        )));
    }
    if n == 0 {
        return Err(CoreError::InvalidInput("empty target dataset".into()));
    }
    if source.feature_count() != target.feature_count() {
        return Err(CoreError::DimensionMismatch(
            "source and target disagree on feature count".into(),
        ));
    }
    let mut counts = vec![0u64; m];
    let mut ranked: Vec<(T, usize)> = Vec::with_capacity(m);
    for t in 0..n {
        ranked.clear();
        let tf = target.features(t);
        for i in 0..m {
            ranked.push((squared_distance(tf, source.features(i)), i));
        }
        ranked.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        for &(_, i) in ranked.iter().take(n_neighbors) {
            counts[i] += 1;
        }
    }
    let scale = T::of(m as f64) / T::of((n * n_neighbors) as f64);
    let weights = counts.iter().map(|&c| T::of(c as f64) * scale).collect();
    WeightVector {
        weights,
        method: MethodTag::Nnw,
    }
    .checked()
}

struct KliepFit<T> {
    alpha: Vec<T>,
    /// Objective value at the start plus after every accepted step.
    /// Read by the ascent test only.
    #[allow(dead_code)]
    history: Vec<T>,
}

/// Projected gradient ascent on `sum_t log(<alpha, a[t]>)` subject to
/// `alpha >= 0` and `<alpha, b> = 1` (enforced exactly by rescaling).
/// Only improving steps are accepted, so `history` is increasing.
fn kliep_fit<T: Scalar>(a: &Matrix<T>, b: &[T], max_iter: usize, tol: f64) -> Result<KliepFit<T>> {
    let n = a.rows();
    let c = a.cols();
    let project = |alpha: &mut Vec<T>| -> Result<()> {
        for v in alpha.iter_mut() {
            if *v < T::zero() {
                *v = T::zero();
            }
        }
        let s: T = alpha.iter().zip(b).map(|(&x, &y)| x * y).sum();
        if !(s > T::zero()) || !s.is_finite() {
            return Err(CoreError::Divergence(
                "projection collapsed the coefficient vector".into(),
            ));
        }
        for v in alpha.iter_mut() {
            *v = *v / s;
        }
        Ok(())
    };
    let objective = |alpha: &[T]| -> Result<T> {
        let mut total = T::zero();
        for t in 0..n {
            let s: T = alpha.iter().zip(a.row(t)).map(|(&x, &y)| x * y).sum();
            let term = s.ln();
            if !term.is_finite() {
                return Err(CoreError::Divergence(format!(
                    "log-likelihood term for target sample {t} is not finite"
                )));
            }
            total += term;
        }
        Ok(total)
    };

    let mut alpha = vec![T::one(); c];
    project(&mut alpha)?;
    let mut best = objective(&alpha)?;
    let mut history = vec![best];
    let mut step = 1.0f64;
    let tol_t = T::of(tol);
    for _ in 0..max_iter {
        let mut grad = vec![T::zero(); c];
        for t in 0..n {
            let row = a.row(t);
            let s: T = alpha.iter().zip(row).map(|(&x, &y)| x * y).sum();
            for (g, &av) in grad.iter_mut().zip(row) {
                *g += av / s;
            }
        }
        // backtracking: shrink until the projected step improves
        let mut improved = false;
        for _ in 0..40 {
            let mut candidate: Vec<T> = alpha
                .iter()
                .zip(&grad)
                .map(|(&x, &g)| x + T::of(step) * g)
                .collect();
            project(&mut candidate)?;
            let value = objective(&candidate)?;
            if value > best {
                let gain = value - best;
                alpha = candidate;
                best = value;
                history.push(value);
                step *= 1.2;
                improved = gain > tol_t;
                break;
            }
            step *= 0.5;
        }
        if !improved {
            break;
        }
    }
    Ok(KliepFit { alpha, history })
}

/// Density-ratio weights: fit nonnegative mixture coefficients over
/// kernel centers (the first `n_centers` target samples) by projected
/// gradient ascent on the target log-likelihood, holding the source
/// kernel mean at 1; weights are the fitted ratio at each source sample.
pub fn kliep_weights<T: Scalar>(
    source: &Dataset<T>,
    target: &Dataset<T>,
    cfg: &KernelConfig,
    n_centers: usize,
    max_iter: usize,
    tol: f64,
) -> Result<WeightVector<T>> {
    let m = source.len();
    let n = target.len();
    if m == 0 || n == 0 {
        return Err(CoreError::InvalidInput("empty dataset".into()));
    }
    if n_centers == 0 {
        return Err(CoreError::InvalidInput("n_centers must be >= 1".into()));
    }
    cfg.validate()?;
    let c = n_centers.min(n);

    // kernel of target samples (rows) against centers (cols)
    let mut a = Matrix::zeros(n, c);
    for t in 0..n {
        for j in 0..c {
            a.set(t, j, kernel_eval(target.features(t), target.features(j), cfg)?);
        }
    }
    // per-center source kernel means: the equality constraint is <alpha, b> = 1
    let mut b = vec![T::zero(); c];
    for i in 0..m {
        for (j, bj) in b.iter_mut().enumerate() {
            *bj += kernel_eval(source.features(i), target.features(j), cfg)?;
        }
    }
    for bj in &mut b {
        *bj = *bj / T::of(m as f64);
    }

    let fit = kliep_fit(&a, &b, max_iter, tol)?;
    let alpha = fit.alpha;

    let mut weights = vec![T::zero(); m];
    for (i, w) in weights.iter_mut().enumerate() {
        let mut acc = T::zero();
        for (j, &aj) in alpha.iter().enumerate() {
            acc += aj * kernel_eval(source.features(i), target.features(j), cfg)?;
        }
        *w = acc;
    }
    WeightVector {
        weights,
        method: MethodTag::Kliep,
    }
    .checked()
}

/// Kernel mean matching: minimize `0.5 w'Kw - kappa'w` over the box
/// `[0, b_bound]` intersected with the sum band `|sum(w) - m| <= m*eps`,
/// by projected gradient descent with step `1/L` (Gershgorin bound on K).
/// `eps` defaults to `(sqrt(m)-1)/sqrt(m)`. Returns the best iterate, so
/// the final objective never exceeds the initial (uniform) one.
pub fn kmm_weights<T: Scalar>(
    source: &Dataset<T>,
    target: &Dataset<T>,
    cfg: &KernelConfig,
    b_bound: f64,
    eps: Option<f64>,
    max_iter: usize,
    tol: f64,
) -> Result<WeightVector<T>> {
    let m = source.len();
    let n = target.len();
    if m == 0 || n == 0 {
        return Err(CoreError::InvalidInput("empty dataset".into()));
    }
    if !(b_bound > 0.0) {
        return Err(CoreError::InvalidInput("b_bound must be > 0".into()));
    }
    cfg.validate()?;
    let eps = eps.unwrap_or(((m as f64).sqrt() - 1.0) / (m as f64).sqrt());
    if !(0.0..1.0).contains(&eps) && eps != 0.0 {
        return Err(CoreError::InvalidInput(format!(
            "eps must lie in [0, 1), got {eps}"
        )));
    }

    let mut k = Matrix::zeros(m, m);
    for i in 0..m {
        for j in i..m {
            let v = kernel_eval(source.features(i), source.features(j), cfg)?;
            k.set(i, j, v);
            k.set(j, i, v);
        }
    }
    let mut kappa = vec![T::zero(); m];
    let ratio = T::of(m as f64 / n as f64);
    for (i, kv) in kappa.iter_mut().enumerate() {
        let mut acc = T::zero();
        for j in 0..n {
            acc += kernel_eval(source.features(i), target.features(j), cfg)?;
        }
        *kv = ratio * acc;
    }

    let lipschitz = (0..m)
        .map(|i| k.row(i).iter().map(|v| v.abs()).sum::<T>())
        .fold(T::zero(), |acc, v| acc.max(v))
        .max(T::of(1e-12));
    let step = T::one() / lipschitz;

    let total = T::of(m as f64);
    let lo = total * T::of(1.0 - eps);
    let hi = total * T::of(1.0 + eps);
    let box_hi = T::of(b_bound);
    let project = |w: &mut Vec<T>| {
        for _ in 0..16 {
            for v in w.iter_mut() {
                *v = (*v).max(T::zero()).min(box_hi);
            }
            let s: T = w.iter().copied().sum();
            if s >= lo && s <= hi {
                return;
            }
            if s == T::zero() {
                let fill = lo / T::of(w.len() as f64);
                for v in w.iter_mut() {
                    *v = fill;
                }
                return;
            }
            let want = s.max(lo).min(hi);
            let scale = want / s;
            for v in w.iter_mut() {
                *v = *v * scale;
            }
        }
    };
    let objective = |w: &[T]| -> Result<T> {
        let mut quad = T::zero();
        for i in 0..m {
            let row = k.row(i);
            let mut acc = T::zero();
            for (j, &kv) in row.iter().enumerate() {
                acc += kv * w[j];
            }
            quad += w[i] * acc;
        }
        let value = T::of(0.5) * quad - dot(&kappa, w);
        if !value.is_finite() {
            return Err(CoreError::Divergence("objective is not finite".into()));
        }
        Ok(value)
    };

    let mut w = vec![T::one(); m];
    project(&mut w);
    let mut best_w = w.clone();
    let mut best_value = objective(&w)?;
    let tol_t = T::of(tol);
    for _ in 0..max_iter {
        let mut next = vec![T::zero(); m];
        for i in 0..m {
            let row = k.row(i);
            let mut g = -kappa[i];
            for (j, &kv) in row.iter().enumerate() {
                g += kv * w[j];
            }
            next[i] = w[i] - step * g;
        }
        project(&mut next);
        let moved = next
            .iter()
            .zip(&w)
            .map(|(&a, &b)| (a - b).abs())
            .fold(T::zero(), |acc, v| acc.max(v));
        w = next;
        let value = objective(&w)?;
        if value < best_value {
            best_value = value;
            best_w = w.clone();
        }
        if moved < tol_t {
            break;
        }
    }
    WeightVector {
        weights: best_w,
        method: MethodTag::Kmm,
    }
    .checked()
}
