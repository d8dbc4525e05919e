//! Synthetic spatial dataset generator with known ground truth.
//!
//! Sensors are placed uniformly inside per-domain rectangles. Non-coordinate
//! features are smooth Gaussian random fields (truncated random Fourier sums)
//! of the sensor position plus per-sample noise; the label combines a linear
//! part, two fixed nonlinear terms, a dedicated label field, and noise. The
//! structural draw (fields, coefficients) comes from `label_fn_seed`, the
//! sampling draw (positions, noise) from the generate seed, so ground truth
//! is reproducible independently of the sampled datasets.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, DomainTag};
use crate::error::{CoreError, Result};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

const FOURIER_TERMS: usize = 64;

/// Axis-aligned rectangle in planar coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Box2 {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

impl Box2 {
    pub fn new(min: [f64; 2], max: [f64; 2]) -> Self {
        Box2 { min, max }
    }

    fn validate(&self) -> Result<()> {
        if self.min[0] >= self.max[0] || self.min[1] >= self.max[1] {
            return Err(CoreError::InvalidInput(format!(
                "degenerate region box {:?}..{:?}",
                self.min, self.max
            )));
        }
        Ok(())
    }

    fn union(a: &Box2, b: &Box2) -> Box2 {
        Box2 {
            min: [a.min[0].min(b.min[0]), a.min[1].min(b.min[1])],
            max: [a.max[0].max(b.max[0]), a.max[1].max(b.max[1])],
        }
    }
}

/// Generator settings. `shift_vector` (one offset per non-coordinate
/// feature) is added to target-domain features before the label is
/// computed, so the shift moves the inputs but not the input→label map.
/// Deserializes field by field with defaults, so partial JSON works.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_source_sensors: usize,
    pub n_target_sensors: usize,
    pub n_days: usize,
    pub region_boxes: (Box2, Box2),
    pub p_extra: usize,
    pub spatial_length_scale: f64,
    pub noise_std: f64,
    #[serde(default = "default_feature_noise")]
    pub feature_noise_std: f64,
    pub shift_vector: Vec<f64>,
    pub label_fn_seed: u64,
    pub aux_coupling: f64,
    /// Linear label coefficients over all `2 + p_extra` features; drawn
    /// from `label_fn_seed` when absent (coordinates get weight 0).
    #[serde(default)]
    pub coefficients: Option<Vec<f64>>,
    #[serde(default = "default_unit")]
    pub label_nonlinear_scale: f64,
    #[serde(default = "default_unit")]
    pub label_field_scale: f64,
    #[serde(default = "default_grid_resolution")]
    pub grid_resolution: usize,
}

fn default_feature_noise() -> f64 {
    0.1
}

fn default_unit() -> f64 {
    1.0
}

fn default_grid_resolution() -> usize {
    50
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_source_sensors: 40,
            n_target_sensors: 15,
            n_days: 25,
            region_boxes: (
                Box2::new([0.0, 0.0], [10.0, 10.0]),
                Box2::new([0.0, 0.0], [10.0, 10.0]),
            ),
            p_extra: 4,
            // Length scale ~0.4x the box side keeps per-sensor mean labels
            // clearly autocorrelated (Moran's I >= 0.25 across seeds).
            spatial_length_scale: 4.0,
            noise_std: 0.5,
            feature_noise_std: default_feature_noise(),
            shift_vector: vec![0.0; 4],
            label_fn_seed: 7,
            aux_coupling: 0.7,
            coefficients: None,
            label_nonlinear_scale: 1.0,
            label_field_scale: 1.0,
            grid_resolution: default_grid_resolution(),
        }
    }
}

impl SynthConfig {
    pub fn feature_count(&self) -> usize {
        2 + self.p_extra
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_source_sensors == 0 || self.n_target_sensors == 0 || self.n_days == 0 {
            return Err(CoreError::InvalidInput(
                "sensor and day counts must be positive".into(),
            ));
        }
        if self.p_extra == 0 {
            return Err(CoreError::InvalidInput(
                "need at least one non-coordinate feature".into(),
            ));
        }
        self.region_boxes.0.validate()?;
        self.region_boxes.1.validate()?;
        if !(self.spatial_length_scale > 0.0) {
            return Err(CoreError::InvalidInput(
                "spatial_length_scale must be > 0".into(),
            ));
        }
        if self.noise_std < 0.0 || self.feature_noise_std < 0.0 {
            return Err(CoreError::InvalidInput("noise std must be >= 0".into()));
        }
        if !(0.0..=1.0).contains(&self.aux_coupling) {
            return Err(CoreError::InvalidInput(
                "aux_coupling must lie in [0, 1]".into(),
            ));
        }
        if self.shift_vector.len() != self.p_extra {
            return Err(CoreError::InvalidInput(format!(
                "shift_vector has {} entries for {} extra features",
                self.shift_vector.len(),
                self.p_extra
            )));
        }
        if let Some(c) = &self.coefficients {
            if c.len() != self.feature_count() {
                return Err(CoreError::InvalidInput(format!(
                    "{} coefficients for {} features",
                    c.len(),
                    self.feature_count()
                )));
            }
        }
        if self.grid_resolution < 2 {
            return Err(CoreError::InvalidInput(
                "grid_resolution must be at least 2".into(),
            ));
        }
        Ok(())
    }
}

/// Stationary Gaussian random field realized as a truncated random
/// Fourier sum: `g(x) = sqrt(2/D) * sum_j a_j cos(omega_j . x + b_j)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FourierField<T> {
    pub omega: Vec<[T; 2]>,
    pub phase: Vec<T>,
    pub amplitude: Vec<T>,
}

impl<T: Scalar> FourierField<T> {
    fn draw(rng: &mut ChaCha8Rng, length_scale: f64) -> Self {
        let mut omega = Vec::with_capacity(FOURIER_TERMS);
        let mut phase = Vec::with_capacity(FOURIER_TERMS);
        let mut amplitude = Vec::with_capacity(FOURIER_TERMS);
        for _ in 0..FOURIER_TERMS {
            let wx: f64 = rng.sample::<f64, _>(StandardNormal) / length_scale;
            let wy: f64 = rng.sample::<f64, _>(StandardNormal) / length_scale;
            omega.push([T::of(wx), T::of(wy)]);
            phase.push(T::of(rng.random_range(0.0..std::f64::consts::TAU)));
            amplitude.push(T::of(rng.sample::<f64, _>(StandardNormal)));
        }
        FourierField {
            omega,
            phase,
            amplitude,
        }
    }

    pub fn eval(&self, x: T, y: T) -> T {
        let scale = T::of((2.0 / self.omega.len() as f64).sqrt());
        let mut acc = T::zero();
        for ((w, &b), &a) in self.omega.iter().zip(&self.phase).zip(&self.amplitude) {
            acc += a * (w[0] * x + w[1] * y + b).cos();
        }
        scale * acc
    }
}

/// Everything needed to recompute noiseless labels at arbitrary
/// coordinates; fully determined by `label_fn_seed` and the config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth<T> {
    pub latent_field_params: FieldParams<T>,
    pub coefficient_vector: Vec<T>,
    pub nonlinear_terms: String,
    pub shift_vector: Vec<T>,
    pub union_box: Box2,
    pub label_nonlinear_scale: T,
    pub label_field_scale: T,
}

/// Spectral coefficients of every field the generator draws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldParams<T> {
    pub feature_fields: Vec<FourierField<T>>,
    pub label_field: FourierField<T>,
    pub aux_field: FourierField<T>,
}

impl<T: Scalar> GroundTruth<T> {
    /// Noiseless feature vector at a position; `shifted` selects the
    /// target-domain covariate shift.
    pub fn true_features(&self, x: T, y: T, shifted: bool) -> Vec<T> {
        let mut out = vec![x, y];
        for (j, field) in self.latent_field_params.feature_fields.iter().enumerate() {
            let mut v = field.eval(x, y);
            if shifted {
                v += self.shift_vector[j];
            }
            out.push(v);
        }
        out
    }

    /// Noiseless label implied by a feature vector at a position.
    pub fn label_from_features(&self, features: &[T], x: T, y: T) -> T {
        let linear: T = self
            .coefficient_vector
            .iter()
            .zip(features)
            .map(|(&c, &f)| c * f)
            .sum();
        let product = if features.len() >= 4 {
            features[2] * features[3]
        } else {
            T::zero()
        };
        let span = T::of(self.union_box.max[0] - self.union_box.min[0]);
        let u = (x - T::of(self.union_box.min[0])) / span;
        linear + self.label_nonlinear_scale * (product + u * u)
            + self.label_field_scale * self.latent_field_params.label_field.eval(x, y)
    }

    /// Noiseless label at a position.
    pub fn true_label(&self, x: T, y: T, shifted: bool) -> T {
        let features = self.true_features(x, y, shifted);
        self.label_from_features(&features, x, y)
    }
}

fn feature_names(p_extra: usize) -> Vec<String> {
    let mut names = vec!["x".to_string(), "y".to_string()];
    names.extend((0..p_extra).map(|j| format!("f{j}")));
    names
}

fn standardize<T: Scalar>(values: &[T]) -> Vec<T> {
    let n = T::of(values.len() as f64);
    let mean = values.iter().copied().sum::<T>() / n;
    let var = values.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / n;
    let std = if var == T::zero() { T::one() } else { var.sqrt() };
    values.iter().map(|&v| (v - mean) / std).collect()
}

struct DomainDraw<T> {
    samples: Matrix<T>,
    labels: Vec<T>,
    aux_raw: Vec<T>,
    sensor_ids: Vec<i64>,
    day_index: Vec<i64>,
}

fn draw_domain<T: Scalar>(
    config: &SynthConfig,
    truth: &GroundTruth<T>,
    coords: &[(f64, f64)],
    shifted: bool,
    rng: &mut ChaCha8Rng,
) -> DomainDraw<T> {
    let p = config.feature_count();
    let n = coords.len() * config.n_days;
    let mut rows: Vec<Vec<T>> = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    let mut aux_raw = Vec::with_capacity(n);
    let mut sensor_ids = Vec::with_capacity(n);
    let mut day_index = Vec::with_capacity(n);
    for day in 0..config.n_days {
        for (sensor, &(cx, cy)) in coords.iter().enumerate() {
            let x = T::of(cx);
            let y = T::of(cy);
            let mut features = truth.true_features(x, y, shifted);
            for f in features.iter_mut().skip(2) {
                let noise: f64 = rng.sample::<f64, _>(StandardNormal);
                *f += T::of(noise * config.feature_noise_std);
            }
            let label_noise: f64 = rng.sample::<f64, _>(StandardNormal);
            let label =
                truth.label_from_features(&features, x, y) + T::of(label_noise * config.noise_std);
            debug_assert_eq!(features.len(), p);
            rows.push(features);
            labels.push(label);
            aux_raw.push(truth.latent_field_params.aux_field.eval(x, y));
            sensor_ids.push(sensor as i64);
            day_index.push(day as i64);
        }
    }
    DomainDraw {
        samples: Matrix::from_rows(&rows),
        labels,
        aux_raw,
        sensor_ids,
        day_index,
    }
}

fn finish_domain<T: Scalar>(
    config: &SynthConfig,
    draw: DomainDraw<T>,
    domain: DomainTag,
) -> Result<Dataset<T>> {
    let coupling = T::of(config.aux_coupling);
    let z_label = standardize(&draw.labels);
    let z_aux = standardize(&draw.aux_raw);
    let aux: Vec<T> = z_label
        .iter()
        .zip(&z_aux)
        .map(|(&l, &a)| coupling * l + (T::one() - coupling) * a)
        .collect();
    Dataset::new(
        feature_names(config.p_extra),
        (0, 1),
        draw.samples,
        draw.labels,
        Some(aux),
        draw.sensor_ids,
        draw.day_index,
        domain,
    )
}

/// Produce (source, target, grid, truth). Grid labels are 0 placeholders;
/// use the returned [`GroundTruth`] for noiseless grid labels.
pub fn generate<T: Scalar>(
    config: &SynthConfig,
    seed: u64,
) -> Result<(Dataset<T>, Dataset<T>, Dataset<T>, GroundTruth<T>)> {
    config.validate()?;
    let p = config.feature_count();

    // Structural draw: field spectra and coefficients, in a fixed order.
    let mut struct_rng = ChaCha8Rng::seed_from_u64(config.label_fn_seed);
    let feature_fields: Vec<FourierField<T>> = (0..config.p_extra)
        .map(|_| FourierField::draw(&mut struct_rng, config.spatial_length_scale))
        .collect();
    let label_field = FourierField::draw(&mut struct_rng, config.spatial_length_scale);
    let aux_field = FourierField::draw(&mut struct_rng, config.spatial_length_scale);
    let coefficient_vector: Vec<T> = match &config.coefficients {
        Some(c) => c.iter().map(|&v| T::of(v)).collect(),
        None => {
            // coordinates carry no linear weight by default
            let mut c = vec![T::zero(); 2];
            for _ in 0..config.p_extra {
                c.push(T::of(struct_rng.sample::<f64, _>(StandardNormal)));
            }
            c
        }
    };
    debug_assert_eq!(coefficient_vector.len(), p);
    let truth = GroundTruth {
        latent_field_params: FieldParams {
            feature_fields,
            label_field,
            aux_field,
        },
        coefficient_vector,
        nonlinear_terms: "product of first two non-coordinate features; squared x normalized to the union box".into(),
        shift_vector: config.shift_vector.iter().map(|&v| T::of(v)).collect(),
        union_box: Box2::union(&config.region_boxes.0, &config.region_boxes.1),
        label_nonlinear_scale: T::of(config.label_nonlinear_scale),
        label_field_scale: T::of(config.label_field_scale),
    };

    // Sampling draw: positions first, then day-major per-sample noise.
    let mut samp_rng = ChaCha8Rng::seed_from_u64(seed);
    let draw_coords = |rng: &mut ChaCha8Rng, b: &Box2, n: usize| -> Vec<(f64, f64)> {
        (0..n)
            .map(|_| {
                (
                    rng.random_range(b.min[0]..b.max[0]),
                    rng.random_range(b.min[1]..b.max[1]),
                )
            })
            .collect()
    };
    let source_coords = draw_coords(&mut samp_rng, &config.region_boxes.0, config.n_source_sensors);
    let target_coords = draw_coords(&mut samp_rng, &config.region_boxes.1, config.n_target_sensors);
    let source_draw = draw_domain(config, &truth, &source_coords, false, &mut samp_rng);
    let target_draw = draw_domain(config, &truth, &target_coords, true, &mut samp_rng);
    let source = finish_domain(config, source_draw, DomainTag::Source)?;
    let target = finish_domain(config, target_draw, DomainTag::Target)?;

    // Unlabeled lattice over the target box, noiseless shifted features.
    let res = config.grid_resolution;
    let b = &config.region_boxes.1;
    let mut rows = Vec::with_capacity(res * res);
    let mut sensor_ids = Vec::with_capacity(res * res);
    for iy in 0..res {
        for ix in 0..res {
            let fx = ix as f64 / (res - 1) as f64;
            let fy = iy as f64 / (res - 1) as f64;
            let x = T::of(b.min[0] + (b.max[0] - b.min[0]) * fx);
            let y = T::of(b.min[1] + (b.max[1] - b.min[1]) * fy);
            rows.push(truth.true_features(x, y, true));
            sensor_ids.push((iy * res + ix) as i64);
        }
    }
    let n_grid = rows.len();
    let grid = Dataset::new(
        feature_names(config.p_extra),
        (0, 1),
        Matrix::from_rows(&rows),
        vec![T::zero(); n_grid],
        None,
        sensor_ids,
        vec![0; n_grid],
        DomainTag::Target,
    )?;
    Ok((source, target, grid, truth))
}

/// Moran's I with inverse-distance weights and zero diagonal:
/// `(N / W) * sum_ij w_ij d_i d_j / sum_i d_i^2`.
pub fn morans_i<T: Scalar>(coords: &[(T, T)], values: &[T]) -> Result<T> {
    let n = coords.len();
    if n < 3 {
        return Err(CoreError::InvalidInput(format!(
            "need at least 3 points, got {n}"
        )));
    }
    if values.len() != n {
        return Err(CoreError::DimensionMismatch(format!(
            "{n} coordinates vs {} values",
            values.len()
        )));
    }
    let mean = values.iter().copied().sum::<T>() / T::of(n as f64);
    let dev: Vec<T> = values.iter().map(|&v| v - mean).collect();
    let ss: T = dev.iter().map(|&d| d * d).sum();
    if ss == T::zero() {
        return Err(CoreError::InvalidInput(
            "constant values make Moran's I undefined".into(),
        ));
    }
    let mut w_total = T::zero();
    let mut cross = T::zero();
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let dx = coords[i].0 - coords[j].0;
            let dy = coords[i].1 - coords[j].1;
            let dist = (dx * dx + dy * dy).sqrt();
            if dist == T::zero() {
                return Err(CoreError::InvalidInput(format!(
                    "points {i} and {j} coincide; inverse-distance weight undefined"
                )));
            }
            let w = T::one() / dist;
            w_total += w;
            cross += w * dev[i] * dev[j];
        }
    }
    Ok(T::of(n as f64) / w_total * cross / ss)
}
