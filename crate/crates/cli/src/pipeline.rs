//! Experiment orchestration: seeded sensor splits, latent-column
//! imputation, instance reweighting, grid-searched regressors, and
//! cross-validated aggregation into a result table.

use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use ldf_core::{
    apply_normalizer, clouds_for_dataset, evaluate, fit_gbr, fit_normalizer, fit_rf, fit_tree,
    generate, impute_ldf, kliep_weights, kmm_weights, ldf_inputs_for_dataset, load_csv,
    nnw_weights, pearson, predict_ensemble, predict_fnn, predict_tree, split_by_sensor, train,
    train_fnn, ArchConfig, AutoencoderModel, CoreError, Dataset64, DomainTag, Ensemble,
    EnsembleConfig, EnsembleMode, FnnModel, KernelConfig, KernelKind, Matrix64, Metrics, Pool,
    Result, StageSchedule, Tree, TrainConfig, TreeConfig, WeightVector, LDF_COLUMN,
};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{
    DataSpec, ExperimentConfig, ModelKind, ReweightSection, RosterEntry, Variant,
};
use crate::report::{CellRecord, CorrSummary, ResultTable, RunManifest};

// Purpose tags for per-cell seed derivation.
const SEED_SYNTH: u64 = 1;
const SEED_SPLIT: u64 = 2;
const SEED_AE: u64 = 3;
const SEED_GRID: u64 = 4;
const SEED_BOOT: u64 = 5;
const SEED_FNN: u64 = 6;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stable stream of independent seeds: one master seed plus a purpose tag
/// and cell coordinates, so no stage shares randomness with another and
/// results do not depend on roster order.
pub fn derive_seed(master: u64, parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(splitmix64(master), |acc, &p| splitmix64(acc ^ p))
}

pub struct ExperimentData {
    pub source: Dataset64,
    pub target: Dataset64,
    pub synth_seed: Option<u64>,
}

fn load_data(cfg: &ExperimentConfig) -> Result<ExperimentData> {
    match &cfg.data {
        DataSpec::Synth { config, seed } => {
            let s = seed.unwrap_or_else(|| derive_seed(cfg.master_seed, &[SEED_SYNTH]));
            let (source, target, _grid, _truth) = generate::<f64>(config, s)?;
            Ok(ExperimentData {
                source,
                target,
                synth_seed: Some(s),
            })
        }
        DataSpec::Csv {
            source_path,
            target_path,
            schema,
        } => Ok(ExperimentData {
            source: load_csv(source_path, schema, DomainTag::Source)?,
            target: load_csv(target_path, schema, DomainTag::Target)?,
            synth_seed: None,
        }),
    }
}

struct Triple {
    src: Dataset64,
    ttr: Dataset64,
    tte: Dataset64,
}

struct Cell {
    plain: Triple,
    /// Keyed by estimator head count (1 = label only, 2 = label + aux).
    augmented: BTreeMap<usize, Triple>,
    split_seed: u64,
    /// Held-out correlation of the imputed column with the label, per head
    /// count; feeds the manifest summary.
    ldf_corr: BTreeMap<usize, f64>,
}

/// Z-score the imputed latent column by its mean/std over the two training
/// partitions so kernel- and distance-based reweighting sees it on the
/// same footing as the other (already normalized) features. Constant
/// columns keep std 1, mirroring the normalizer's zero-variance rule.
fn standardize_latent(triple: &mut Triple) -> Result<()> {
    let col = triple
        .src
        .feature_names
        .iter()
        .position(|n| n == LDF_COLUMN)
        .ok_or_else(|| CoreError::InvalidInput("latent column missing after imputation".into()))?;
    let values: Vec<f64> = triple
        .src
        .samples
        .column(col)
        .into_iter()
        .chain(triple.ttr.samples.column(col))
        .collect();
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let std = if var > 0.0 { var.sqrt() } else { 1.0 };
    for ds in [&mut triple.src, &mut triple.ttr, &mut triple.tte] {
        for i in 0..ds.len() {
            let v = ds.samples.get(i, col);
            ds.samples.set(i, col, (v - mean) / std);
        }
    }
    Ok(())
}

fn impute_triple(
    cfg: &ExperimentConfig,
    src: &Dataset64,
    ttr: &Dataset64,
    tte: &Dataset64,
    outputs: usize,
    repeat: u64,
    sensor_count: usize,
) -> Result<Triple> {
    let pool = Pool::new(src, ttr)?;
    let (k, dw) = (cfg.k_neighbors, cfg.day_window);
    let mut inputs = ldf_inputs_for_dataset(&pool, src, Some(0), k, dw)?;
    inputs.extend(ldf_inputs_for_dataset(&pool, ttr, Some(src.len()), k, dw)?);

    let arch = ArchConfig {
        estimator_outputs: outputs,
        ..cfg.autoencoder.arch
    };
    let seed = derive_seed(
        cfg.master_seed,
        &[SEED_AE, repeat, sensor_count as u64, outputs as u64],
    );
    let model = AutoencoderModel::<f64>::init(arch, k, src.feature_count(), seed)?;
    let tcfg = TrainConfig {
        epochs: cfg.autoencoder.epochs,
        batch_size: cfg.autoencoder.batch_size,
        learning_rate: cfg.autoencoder.learning_rate,
        seed,
        schedule: StageSchedule::EvenOdd,
    };
    let (model, _history) = train(model, &inputs, &tcfg)?;

    // Test rows may be objectives but are never pool members.
    let src_clouds = clouds_for_dataset(&pool, src, Some(0), k, dw)?;
    let ttr_clouds = clouds_for_dataset(&pool, ttr, Some(src.len()), k, dw)?;
    let tte_clouds = clouds_for_dataset(&pool, tte, None, k, dw)?;
    let mut triple = Triple {
        src: impute_ldf(&model, src, &pool, &src_clouds)?,
        ttr: impute_ldf(&model, ttr, &pool, &ttr_clouds)?,
        tte: impute_ldf(&model, tte, &pool, &tte_clouds)?,
    };
    standardize_latent(&mut triple)?;
    Ok(triple)
}

fn prepare_cell(
    cfg: &ExperimentConfig,
    data: &ExperimentData,
    repeat: u64,
    sensor_count: usize,
) -> Result<Cell> {
    let split_seed = derive_seed(cfg.master_seed, &[SEED_SPLIT, repeat, sensor_count as u64]);
    let (ttr_raw, tte_raw) = split_by_sensor(
        &data.target,
        sensor_count,
        cfg.samples_per_sensor,
        split_seed,
    )?;

    let train_sensors: BTreeSet<i64> = ttr_raw.sensor_ids.iter().copied().collect();
    let test_sensors: BTreeSet<i64> = tte_raw.sensor_ids.iter().copied().collect();
    assert!(
        train_sensors.is_disjoint(&test_sensors),
        "leakage: a held-out sensor appears in the training split"
    );
    if tte_raw.len() == 0 {
        return Err(CoreError::InvalidInput(format!(
            "sensor_count {sensor_count} consumes every target sensor; nothing is held out"
        )));
    }
    if data.source.len() <= ttr_raw.len() {
        return Err(CoreError::InvalidInput(format!(
            "transfer protocol expects m > n, got {} source rows vs {} target training rows",
            data.source.len(),
            ttr_raw.len()
        )));
    }

    // Normalizer never sees held-out rows; its stats are reused for them.
    let stats = fit_normalizer(&[&data.source, &ttr_raw])?;
    let src = apply_normalizer(&data.source, &stats)?;
    let ttr = apply_normalizer(&ttr_raw, &stats)?;
    let tte = apply_normalizer(&tte_raw, &stats)?;

    let outputs_needed: BTreeSet<usize> = cfg
        .roster
        .iter()
        .filter_map(|e| e.variant.estimator_outputs())
        .collect();
    let mut augmented = BTreeMap::new();
    let mut ldf_corr = BTreeMap::new();
    for &outputs in &outputs_needed {
        let triple = impute_triple(cfg, &src, &ttr, &tte, outputs, repeat, sensor_count)?;
        let col = triple
            .tte
            .feature_names
            .iter()
            .position(|n| n == LDF_COLUMN)
            .expect("imputation appends the latent column");
        let corr = pearson(&triple.tte.samples.column(col), &triple.tte.labels).unwrap_or(0.0);
        ldf_corr.insert(outputs, corr);
        augmented.insert(outputs, triple);
    }

    Ok(Cell {
        plain: Triple { src, ttr, tte },
        augmented,
        split_seed,
        ldf_corr,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum RwChoice {
    Uniform,
    Neighbors(usize),
    Kliep(KernelKind, f64),
    Kmm(KernelKind, f64),
}

fn reweight_choices(cfg: &ExperimentConfig, model: ModelKind) -> Vec<RwChoice> {
    let g = &cfg.grids;
    match model {
        ModelKind::Nnw => g
            .nnw_n_neighbors
            .iter()
            .map(|&nn| RwChoice::Neighbors(nn))
            .collect(),
        ModelKind::Kliep => g
            .kernels
            .iter()
            .flat_map(|&k| g.gammas.iter().map(move |&gm| RwChoice::Kliep(k, gm)))
            .collect(),
        ModelKind::Kmm => g
            .kernels
            .iter()
            .flat_map(|&k| g.gammas.iter().map(move |&gm| RwChoice::Kmm(k, gm)))
            .collect(),
        _ => vec![RwChoice::Uniform],
    }
}

fn transfer_weights(
    choice: &RwChoice,
    src: &Dataset64,
    ttr: &Dataset64,
    rw: &ReweightSection,
) -> Result<Vec<f64>> {
    let wv: WeightVector<f64> = match *choice {
        RwChoice::Uniform => WeightVector::uniform(src.len()),
        RwChoice::Neighbors(nn) => nnw_weights(src, ttr, nn)?,
        RwChoice::Kliep(kind, gamma) => {
            let kc = KernelConfig {
                kind,
                gamma,
                degree: rw.poly_degree,
            };
            kliep_weights(src, ttr, &kc, rw.kliep_n_centers, rw.kliep_max_iter, rw.kliep_tol)?
        }
        RwChoice::Kmm(kind, gamma) => {
            let kc = KernelConfig {
                kind,
                gamma,
                degree: rw.poly_degree,
            };
            kmm_weights(
                src,
                ttr,
                &kc,
                rw.kmm_b_bound,
                rw.kmm_eps,
                rw.kmm_max_iter,
                rw.kmm_tol,
            )?
        }
    };
    Ok(wv.weights)
}

#[derive(Debug, Clone)]
enum RegCandidate {
    Tree(TreeConfig),
    Ens(EnsembleConfig, TreeConfig),
}

enum Fitted {
    Tree(Tree<f64>),
    Ens(Ensemble<f64>),
    Fnn(FnnModel<f64>),
}

impl Fitted {
    fn predict(&self, x: &Matrix64) -> Result<Vec<f64>> {
        Ok(match self {
            Fitted::Tree(t) => predict_tree(t, x),
            Fitted::Ens(e) => predict_ensemble(e, x),
            Fitted::Fnn(m) => predict_fnn(m, x)?,
        })
    }
}

fn fit_candidate(cand: &RegCandidate, x: &Matrix64, y: &[f64], w: &[f64]) -> Result<Fitted> {
    Ok(match cand {
        RegCandidate::Tree(tc) => Fitted::Tree(fit_tree(x, y, w, tc)?),
        RegCandidate::Ens(ec, tc) => Fitted::Ens(match ec.mode {
            EnsembleMode::Gbr => fit_gbr(x, y, w, ec, tc)?,
            EnsembleMode::Rf => fit_rf(x, y, w, ec, tc)?,
        }),
    })
}

fn tree_candidates(cfg: &ExperimentConfig) -> Vec<RegCandidate> {
    cfg.grids
        .tree_max_depth
        .iter()
        .map(|&md| {
            RegCandidate::Tree(TreeConfig {
                max_depth: md,
                max_leaf_nodes: None,
                min_samples_leaf: 1,
            })
        })
        .collect()
}

fn ensemble_candidates(
    cfg: &ExperimentConfig,
    model: ModelKind,
    bootstrap_seed: u64,
) -> Vec<RegCandidate> {
    let g = &cfg.grids;
    let mut out = Vec::new();
    for &n_estimators in &g.ensemble_n_estimators {
        for &max_depth in &g.ensemble_max_depth {
            for &max_leaf_nodes in &g.ensemble_max_leaf_nodes {
                let tree = TreeConfig {
                    max_depth,
                    max_leaf_nodes,
                    min_samples_leaf: 1,
                };
                match model {
                    ModelKind::Rf => out.push(RegCandidate::Ens(
                        EnsembleConfig {
                            n_estimators,
                            learning_rate: 0.1,
                            mode: EnsembleMode::Rf,
                            bootstrap_seed,
                            ..EnsembleConfig::default()
                        },
                        tree,
                    )),
                    ModelKind::Gbr => {
                        for &learning_rate in &g.gbr_learning_rates {
                            out.push(RegCandidate::Ens(
                                EnsembleConfig {
                                    n_estimators,
                                    learning_rate,
                                    mode: EnsembleMode::Gbr,
                                    bootstrap_seed,
                                    feature_subsample: 1.0,
                                    bootstrap: false,
                                },
                                tree,
                            ));
                        }
                    }
                    _ => unreachable!("only rf/gbr use ensemble grids"),
                }
            }
        }
    }
    out
}

fn vstack(a: &Matrix64, b: &Matrix64) -> Matrix64 {
    let mut data = Vec::with_capacity((a.rows() + b.rows()) * a.cols());
    data.extend_from_slice(a.data());
    data.extend_from_slice(b.data());
    Matrix64::from_vec(a.rows() + b.rows(), a.cols(), data)
}

fn subset_rows(x: &Matrix64, idx: &[usize]) -> Matrix64 {
    let mut data = Vec::with_capacity(idx.len() * x.cols());
    for &i in idx {
        data.extend_from_slice(x.row(i));
    }
    Matrix64::from_vec(idx.len(), x.cols(), data)
}

fn gather(v: &[f64], idx: &[usize]) -> Vec<f64> {
    idx.iter().map(|&i| v[i]).collect()
}

fn inner_split(len: usize, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..len).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    idx.shuffle(&mut rng);
    let n_tr = (((len as f64) * 0.8).floor() as usize).clamp(1, len - 1);
    (idx[..n_tr].to_vec(), idx[n_tr..].to_vec())
}

/// Importance-weighted validation risk; falls back to a plain mean when
/// every validation row landed weight zero.
fn weighted_mse(y: &[f64], yhat: &[f64], w: &[f64]) -> f64 {
    let sw: f64 = w.iter().sum();
    if sw > 0.0 {
        y.iter()
            .zip(yhat)
            .zip(w)
            .map(|((a, b), wi)| wi * (a - b).powi(2))
            .sum::<f64>()
            / sw
    } else {
        y.iter().zip(yhat).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / y.len() as f64
    }
}

/// Pick the (weighting, regressor) pair with the lowest weighted MSE on a
/// seeded 80/20 split of the training rows, then refit it on all of them.
/// Candidates are scanned in grid order and only a strictly lower score
/// displaces the incumbent, so selection is deterministic.
fn select_and_refit(
    x: &Matrix64,
    y: &[f64],
    weightings: &[(RwChoice, Vec<f64>)],
    cands: &[RegCandidate],
    grid_seed: u64,
) -> Result<Fitted> {
    if weightings.len() == 1 && cands.len() == 1 {
        return fit_candidate(&cands[0], x, y, &weightings[0].1);
    }
    let (tr_idx, val_idx) = inner_split(x.rows(), grid_seed);
    let x_tr = subset_rows(x, &tr_idx);
    let y_tr = gather(y, &tr_idx);
    let x_val = subset_rows(x, &val_idx);
    let y_val = gather(y, &val_idx);

    let mut best: Option<(f64, usize, usize)> = None;
    for (wi, (_, w)) in weightings.iter().enumerate() {
        let w_tr = gather(w, &tr_idx);
        let w_val = gather(w, &val_idx);
        for (ci, cand) in cands.iter().enumerate() {
            let fitted = fit_candidate(cand, &x_tr, &y_tr, &w_tr)?;
            let score = weighted_mse(&y_val, &fitted.predict(&x_val)?, &w_val);
            if best.map_or(true, |(s, _, _)| score < s) {
                best = Some((score, wi, ci));
            }
        }
    }
    let (_, wi, ci) = best.expect("at least one candidate was scored");
    fit_candidate(&cands[ci], x, y, &weightings[wi].1)
}

fn eval_entry(
    cfg: &ExperimentConfig,
    entry: RosterEntry,
    cell: &Cell,
    repeat: u64,
    sensor_count: usize,
) -> Result<Metrics<f64>> {
    let triple = match entry.variant.estimator_outputs() {
        None => &cell.plain,
        Some(outputs) => cell
            .augmented
            .get(&outputs)
            .expect("cell preparation covered every roster variant"),
    };
    let (m, n) = (triple.src.len(), triple.ttr.len());
    let x = vstack(&triple.src.samples, &triple.ttr.samples);
    debug_assert_eq!(x.rows(), m + n);
    let mut y = triple.src.labels.clone();
    y.extend_from_slice(&triple.ttr.labels);
    let sc = sensor_count as u64;
    let grid_seed = derive_seed(cfg.master_seed, &[SEED_GRID, repeat, sc]);

    let fitted = match entry.model {
        ModelKind::Fnn => {
            let tcfg = TrainConfig {
                epochs: cfg.fnn.epochs,
                batch_size: cfg.fnn.batch_size,
                learning_rate: cfg.fnn.learning_rate,
                seed: derive_seed(cfg.master_seed, &[SEED_FNN, repeat, sc]),
                schedule: StageSchedule::EvenOdd,
            };
            Fitted::Fnn(train_fnn(&x, &y, None, &tcfg)?)
        }
        ModelKind::Rf | ModelKind::Gbr => {
            let boot = derive_seed(cfg.master_seed, &[SEED_BOOT, repeat, sc]);
            let cands = ensemble_candidates(cfg, entry.model, boot);
            let uniform = (RwChoice::Uniform, vec![1.0; m + n]);
            select_and_refit(&x, &y, std::slice::from_ref(&uniform), &cands, grid_seed)?
        }
        ModelKind::Nnw | ModelKind::Kliep | ModelKind::Kmm => {
            let mut weightings = Vec::new();
            for choice in reweight_choices(cfg, entry.model) {
                let mut w = transfer_weights(&choice, &triple.src, &triple.ttr, &cfg.reweight)?;
                w.extend(std::iter::repeat(1.0).take(n));
                weightings.push((choice, w));
            }
            select_and_refit(&x, &y, &weightings, &tree_candidates(cfg), grid_seed)?
        }
    };

    let preds = fitted.predict(&triple.tte.samples)?;
    evaluate(&triple.tte.labels, &preds)
}

/// Re-wrap an error with cell coordinates while keeping its class (and
/// with it, the exit code) intact.
fn contextualize(e: CoreError, ctx: &str) -> CoreError {
    match e {
        CoreError::InvalidInput(m) => CoreError::InvalidInput(format!("{ctx}: {m}")),
        CoreError::DimensionMismatch(m) => CoreError::DimensionMismatch(format!("{ctx}: {m}")),
        CoreError::Divergence(m) => CoreError::Divergence(format!("{ctx}: {m}")),
        other => other,
    }
}

pub struct ExperimentOutcome {
    pub table: ResultTable,
    pub manifest: RunManifest,
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    let t_start = Instant::now();
    let data = load_data(cfg)?;
    if cfg.roster.iter().any(|e| e.variant == Variant::LdfA)
        && (data.source.aux_labels.is_none() || data.target.aux_labels.is_none())
    {
        return Err(CoreError::InvalidInput(
            "ldf-a roster entries need an auxiliary label column in both domains".into(),
        ));
    }

    let mut acc: BTreeMap<(RosterEntry, usize), Vec<Metrics<f64>>> = BTreeMap::new();
    let mut cells = Vec::new();
    let mut corr_values = Vec::new();
    let mut prep_secs = 0.0;
    let mut fit_secs = 0.0;
    for &sensor_count in &cfg.sensor_counts {
        for repeat in 0..cfg.cv_repeats {
            let t_cell = Instant::now();
            let cell = prepare_cell(cfg, &data, repeat as u64, sensor_count).map_err(|e| {
                contextualize(e, &format!("repeat {repeat}, {sensor_count} sensors"))
            })?;
            prep_secs += t_cell.elapsed().as_secs_f64();
            cells.push(CellRecord {
                repeat,
                sensor_count,
                split_seed: cell.split_seed,
                m_source: data.source.len(),
                n_target_train: cell.plain.ttr.len(),
                n_target_test: cell.plain.tte.len(),
            });
            corr_values.extend(cell.ldf_corr.values().copied());
            for entry in &cfg.roster {
                let t_fit = Instant::now();
                let metrics =
                    eval_entry(cfg, *entry, &cell, repeat as u64, sensor_count).map_err(|e| {
                        contextualize(e, &format!("{entry}, repeat {repeat}, {sensor_count} sensors"))
                    })?;
                fit_secs += t_fit.elapsed().as_secs_f64();
                acc.entry((*entry, sensor_count)).or_default().push(metrics);
            }
        }
    }

    let table = ResultTable::from_cells(&acc);
    let mut versions = BTreeMap::new();
    versions.insert("ldf-cli".to_string(), env!("CARGO_PKG_VERSION").to_string());
    versions.insert("ldf-core".to_string(), ldf_core::VERSION.to_string());
    let round3 = |v: f64| (v * 1000.0).round() / 1000.0;
    let mut timings_secs = BTreeMap::new();
    timings_secs.insert("total".to_string(), round3(t_start.elapsed().as_secs_f64()));
    timings_secs.insert("cell_preparation".to_string(), round3(prep_secs));
    timings_secs.insert("model_fitting".to_string(), round3(fit_secs));
    let manifest = RunManifest {
        master_seed: cfg.master_seed,
        synth_seed: data.synth_seed,
        versions,
        cells,
        ldf_label_correlation: CorrSummary::from_values(&corr_values),
        timings_secs,
    };
    Ok(ExperimentOutcome { table, manifest })
}

/// Neighborhood-size ablation: the experiment restricted to NNW [LDF],
/// run once per k.
pub fn ablate_k(cfg: &ExperimentConfig, k_values: &[usize]) -> Result<Vec<(usize, ExperimentOutcome)>> {
    if k_values.is_empty() {
        return Err(CoreError::InvalidInput("k_values must be nonempty".into()));
    }
    let mut out = Vec::with_capacity(k_values.len());
    for &k in k_values {
        let mut sub = cfg.clone();
        sub.roster = vec![RosterEntry {
            model: ModelKind::Nnw,
            variant: Variant::Ldf,
        }];
        sub.k_neighbors = k;
        out.push((k, run_experiment(&sub)?));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{AeSection, GridSection};
    use ldf_core::SynthConfig;

    #[test]
    fn derived_seeds_separate_purposes_and_cells() {
        let a = derive_seed(7, &[SEED_SPLIT, 0, 5]);
        let b = derive_seed(7, &[SEED_SPLIT, 1, 5]);
        let c = derive_seed(7, &[SEED_AE, 0, 5]);
        let d = derive_seed(8, &[SEED_SPLIT, 0, 5]);
        assert!(a != b && a != c && a != d && b != c);
        assert_eq!(a, derive_seed(7, &[SEED_SPLIT, 0, 5]));
    }

    #[test]
    fn inner_split_is_disjoint_and_seed_stable() {
        let (tr, val) = inner_split(10, 42);
        assert_eq!(tr.len(), 8);
        assert_eq!(val.len(), 2);
        let mut all: Vec<usize> = tr.iter().chain(&val).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        assert_eq!(inner_split(10, 42), (tr, val));
    }

    #[test]
    fn tiny_lengths_keep_both_sides_nonempty() {
        let (tr, val) = inner_split(2, 0);
        assert_eq!((tr.len(), val.len()), (1, 1));
    }

    #[test]
    fn zero_weight_validation_rows_fall_back_to_plain_mse() {
        let mse = weighted_mse(&[1.0, 2.0], &[0.0, 0.0], &[0.0, 0.0]);
        assert_eq!(mse, 2.5);
        let weighted = weighted_mse(&[1.0, 2.0], &[0.0, 0.0], &[3.0, 1.0]);
        assert_eq!(weighted, (3.0 + 4.0) / 4.0);
    }

    fn tiny_synth() -> SynthConfig {
        SynthConfig {
            n_source_sensors: 10,
            n_target_sensors: 6,
            n_days: 8,
            ..SynthConfig::default()
        }
    }

    /// With one grid point and uniform weights the harness must reduce to
    /// a plain fit-and-score on the cell's split, bit for bit.
    #[test]
    fn plain_gbr_cell_equals_a_direct_fit_on_the_same_split() {
        let synth = tiny_synth();
        let cfg = ExperimentConfig {
            data: DataSpec::Synth {
                config: synth.clone(),
                seed: Some(5),
            },
            roster: vec![RosterEntry {
                model: ModelKind::Gbr,
                variant: Variant::Plain,
            }],
            sensor_counts: vec![3],
            cv_repeats: 1,
            samples_per_sensor: 5,
            grids: GridSection {
                ensemble_n_estimators: vec![25],
                ensemble_max_depth: vec![Some(3)],
                ensemble_max_leaf_nodes: vec![None],
                gbr_learning_rates: vec![0.1],
                ..GridSection::default()
            },
            master_seed: 11,
            ..ExperimentConfig::default()
        };
        let out = run_experiment(&cfg).unwrap();
        let row = out.table.row(ModelKind::Gbr, Variant::Plain, 3).unwrap();

        let (source, target, _, _) = generate::<f64>(&synth, 5).unwrap();
        let (ttr_raw, tte_raw) =
            split_by_sensor(&target, 3, 5, derive_seed(11, &[SEED_SPLIT, 0, 3])).unwrap();
        let stats = fit_normalizer(&[&source, &ttr_raw]).unwrap();
        let src = apply_normalizer(&source, &stats).unwrap();
        let ttr = apply_normalizer(&ttr_raw, &stats).unwrap();
        let tte = apply_normalizer(&tte_raw, &stats).unwrap();
        let x = vstack(&src.samples, &ttr.samples);
        let mut y = src.labels.clone();
        y.extend_from_slice(&ttr.labels);
        let ens = fit_gbr(
            &x,
            &y,
            &vec![1.0; x.rows()],
            &EnsembleConfig {
                n_estimators: 25,
                learning_rate: 0.1,
                mode: EnsembleMode::Gbr,
                bootstrap_seed: derive_seed(11, &[SEED_BOOT, 0, 3]),
                feature_subsample: 1.0,
                bootstrap: false,
            },
            &TreeConfig {
                max_depth: Some(3),
                max_leaf_nodes: None,
                min_samples_leaf: 1,
            },
        )
        .unwrap();
        let direct = evaluate(&tte.labels, &predict_ensemble(&ens, &tte.samples)).unwrap();
        assert_eq!(row.mean_r2, direct.r_squared);
        assert_eq!(row.mean_rmse, direct.rmse);
    }

    #[test]
    fn single_k_ablation_is_the_same_experiment_at_that_k() {
        let cfg = ExperimentConfig {
            data: DataSpec::Synth {
                config: tiny_synth(),
                seed: Some(3),
            },
            sensor_counts: vec![3],
            cv_repeats: 1,
            samples_per_sensor: 5,
            autoencoder: AeSection {
                epochs: 4,
                ..AeSection::default()
            },
            grids: GridSection {
                tree_max_depth: vec![Some(4)],
                nnw_n_neighbors: vec![3],
                ..GridSection::default()
            },
            master_seed: 2,
            ..ExperimentConfig::default()
        };
        let ablation = ablate_k(&cfg, &[3]).unwrap();
        assert_eq!(ablation.len(), 1);
        assert_eq!(ablation[0].0, 3);

        let mut manual = cfg.clone();
        manual.roster = vec![RosterEntry {
            model: ModelKind::Nnw,
            variant: Variant::Ldf,
        }];
        manual.k_neighbors = 3;
        let direct = run_experiment(&manual).unwrap();
        assert_eq!(
            ablation[0].1.table.to_csv_string(None),
            direct.table.to_csv_string(None)
        );
    }
}
