//! Release gate. Each test prints one `criterion N PASS/FAIL` line so the
//! suite output doubles as a checklist:
//!
//! 1. autoencoder analytic gradients match finite differences
//! 2. reweighter constraint satisfaction on random data
//! 3. oracle equivalence for trees, NNW counts, and the KMM solver
//! 4. reweighters stay near uniform when source equals target
//! 5. benchmark gain of NNW [LDF] over NNW on the committed config
//! 6. latent-label correlation on held-out samples
//! 7. neighborhood-size ablation ordering
//! 8. bit-identical repeated benchmark runs
//! 9. hand-computed metric values
//!
//! The two long-running checks (5/6 and 7) invoke the real binary on the
//! configs committed under `configs/` and hold a process-wide lock so
//! their wall-clock budgets are measured without contention.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::{Mutex, OnceLock};
use std::time::Instant;

use ldf_core::nn::Activation;
use ldf_core::{
    fit_tree, kliep_weights, kmm_weights, nnw_weights, pearson, r_squared, rmse, ArchConfig,
    AutoencoderModel, Dataset, DomainTag, KernelConfig, KernelKind, LdfInput, Matrix, TreeConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tempfile::TempDir;

fn check(criterion: u32, ok: bool, detail: &str) {
    let verdict = if ok { "PASS" } else { "FAIL" };
    println!("criterion {criterion} {verdict}: {detail}");
    assert!(ok, "criterion {criterion} FAIL: {detail}");
}

// ---------- criterion 1: gradient correctness ----------

/// Seeds whose initialized nets keep every leaky-ReLU pre-activation at
/// least 5e-4 from zero on the fixture input, so the central difference
/// probes the gradient rather than the kink.
const KINK_CLEAR_SEEDS: [u64; 10] = [1, 6, 14, 16, 17, 18, 24, 27, 28, 34];

fn fixture_input(k: usize, p: usize, phase: f64) -> LdfInput<f64> {
    let mut tensor = Matrix::zeros(k + 1, p + 1);
    for r in 0..=k {
        for c in 0..=p {
            tensor.set(r, c, ((r * 31 + c * 17) as f64 * 0.37 + phase).sin());
        }
    }
    tensor.set(0, p, 0.0);
    LdfInput {
        tensor,
        target_label: (phase * 1.3).cos() * 2.0,
        aux_label: None,
    }
}

#[test]
fn criterion_1_gradients_match_finite_differences() {
    let started = Instant::now();
    let arch = ArchConfig {
        conv_channels: [4, 3, 2],
        estimator_outputs: 1,
        ..ArchConfig::default()
    };
    let mut worst: f64 = 0.0;
    for &seed in &KINK_CLEAR_SEEDS {
        let model = AutoencoderModel::<f64>::init(arch, 4, 3, seed).unwrap();
        let input = fixture_input(4, 3, seed as f64 * 0.61);
        let err = model.gradient_check(&input, input.target_label).unwrap();
        worst = worst.max(err);
    }
    let linear_arch = ArchConfig {
        activation: Activation::Linear,
        ..arch
    };
    let mut worst_linear: f64 = 0.0;
    for seed in 0..3u64 {
        let model = AutoencoderModel::<f64>::init(linear_arch, 4, 3, seed).unwrap();
        let input = fixture_input(4, 3, seed as f64 + 0.2);
        let err = model.gradient_check(&input, input.target_label).unwrap();
        worst_linear = worst_linear.max(err);
    }
    let secs = started.elapsed().as_secs_f64();
    check(
        1,
        worst < 1e-3 && worst_linear < 1e-6 && secs < 30.0,
        &format!(
            "max relative error {worst:.2e} over 10 seeds (both stages), \
             {worst_linear:.2e} with linear activations, {secs:.1}s"
        ),
    );
}

// ---------- criteria 2-4: reweighter behavior ----------

fn random_dataset(rng: &mut ChaCha8Rng, rows: usize, domain: DomainTag) -> Dataset<f64> {
    let p = 4;
    let data: Vec<Vec<f64>> = (0..rows)
        .map(|_| (0..p).map(|_| rng.random_range(-2.0..2.0)).collect())
        .collect();
    let labels = (0..rows).map(|_| rng.random_range(-1.0..1.0)).collect();
    Dataset::new(
        vec!["x".into(), "y".into(), "a".into(), "b".into()],
        (0, 1),
        Matrix::from_rows(&data),
        labels,
        None,
        (0..rows as i64).collect(),
        vec![0; rows],
        domain,
    )
    .unwrap()
}

fn rbf(gamma: f64) -> KernelConfig {
    KernelConfig {
        kind: KernelKind::Rbf,
        gamma,
        degree: 2,
    }
}

#[test]
fn criterion_2_reweighter_constraints_on_random_data() {
    let started = Instant::now();
    let (m, n) = (200, 50);
    let b_bound = 1000.0;
    let eps = ((m as f64).sqrt() - 1.0) / (m as f64).sqrt();
    let mut kliep_worst: f64 = 0.0;
    let mut kmm_sum_worst: f64 = 0.0;
    for seed in 0..5u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(900 + seed);
        let src = random_dataset(&mut rng, m, DomainTag::Source);
        let tgt = random_dataset(&mut rng, n, DomainTag::Target);

        let kliep = kliep_weights(&src, &tgt, &rbf(0.5), 100, 300, 1e-6).unwrap();
        kliep_worst = kliep_worst.max((kliep.mean() - 1.0).abs());

        let kmm = kmm_weights(&src, &tgt, &rbf(0.5), b_bound, None, 300, 1e-6).unwrap();
        assert!(
            kmm.weights.iter().all(|&w| (0.0..=b_bound).contains(&w)),
            "seed {seed}: KMM weight escaped [0, B]"
        );
        let sum: f64 = kmm.weights.iter().sum();
        kmm_sum_worst = kmm_sum_worst.max((sum - m as f64).abs());

        // m = n * n_neighbors makes the count rescale exact in floats
        let nnw = nnw_weights(&src, &tgt, 4).unwrap();
        assert_eq!(nnw.mean(), 1.0, "seed {seed}: NNW mean drifted from 1");
    }
    let secs = started.elapsed().as_secs_f64();
    check(
        2,
        kliep_worst < 1e-6 && kmm_sum_worst <= m as f64 * eps && secs < 60.0,
        &format!(
            "5 datasets (m={m}, n={n}): KLIEP |mean-1| <= {kliep_worst:.2e}, \
             KMM in [0,B] with |sum-m| <= {kmm_sum_worst:.3} (cap {:.3}), \
             NNW mean exactly 1, {secs:.1}s",
            m as f64 * eps
        ),
    );
}

// Independent recursive splitter: scores every (feature, midpoint) pair
// by direct weighted SSE and routes rows by `x <= threshold`.
mod oracle_tree {
    pub enum Node {
        Leaf(f64),
        Split {
            feature: usize,
            threshold: f64,
            left: Box<Node>,
            right: Box<Node>,
        },
    }

    impl Node {
        pub fn predict(&self, row: &[f64]) -> f64 {
            match self {
                Node::Leaf(v) => *v,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    if row[*feature] <= *threshold {
                        left.predict(row)
                    } else {
                        right.predict(row)
                    }
                }
            }
        }
    }

    fn wmean(idx: &[usize], y: &[f64], w: &[f64]) -> f64 {
        let sw: f64 = idx.iter().map(|&i| w[i]).sum();
        idx.iter().map(|&i| w[i] * y[i]).sum::<f64>() / sw
    }

    fn wsse(idx: &[usize], y: &[f64], w: &[f64]) -> f64 {
        let m = wmean(idx, y, w);
        idx.iter().map(|&i| w[i] * (y[i] - m) * (y[i] - m)).sum()
    }

    pub fn build(
        x: &[Vec<f64>],
        y: &[f64],
        w: &[f64],
        idx: &[usize],
        depth: usize,
        max_depth: Option<usize>,
    ) -> Node {
        let leaf = Node::Leaf(wmean(idx, y, w));
        if max_depth.is_some_and(|d| depth >= d) || wsse(idx, y, w) == 0.0 {
            return leaf;
        }
        let p = x[0].len();
        let mut best: Option<(f64, usize, f64)> = None;
        for f in 0..p {
            let mut vals: Vec<f64> = idx.iter().map(|&i| x[i][f]).collect();
            vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
            vals.dedup();
            for pair in vals.windows(2) {
                let thr = (pair[0] + pair[1]) / 2.0;
                let left: Vec<usize> = idx.iter().copied().filter(|&i| x[i][f] <= thr).collect();
                let right: Vec<usize> = idx.iter().copied().filter(|&i| x[i][f] > thr).collect();
                if left.is_empty() || right.is_empty() {
                    continue;
                }
                let score = wsse(&left, y, w) + wsse(&right, y, w);
                if best.is_none_or(|(s, _, _)| score < s) {
                    best = Some((score, f, thr));
                }
            }
        }
        match best {
            None => leaf,
            Some((_, f, thr)) => {
                let left: Vec<usize> = idx.iter().copied().filter(|&i| x[i][f] <= thr).collect();
                let right: Vec<usize> = idx.iter().copied().filter(|&i| x[i][f] > thr).collect();
                Node::Split {
                    feature: f,
                    threshold: thr,
                    left: Box::new(build(x, y, w, &left, depth + 1, max_depth)),
                    right: Box::new(build(x, y, w, &right, depth + 1, max_depth)),
                }
            }
        }
    }
}

#[test]
fn criterion_3_solvers_match_independent_oracles() {
    // (a) greedy CART against the exhaustive splitter
    let mut tree_worst: f64 = 0.0;
    for seed in 0..6u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(40 + seed);
        let n = rng.random_range(10..=50);
        let x: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..3).map(|_| rng.random_range(-20.0..20.0)).collect())
            .collect();
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-10.0..10.0)).collect();
        let w: Vec<f64> = if seed % 2 == 0 {
            vec![1.0; n]
        } else {
            (0..n).map(|_| rng.random_range(0.1..2.0)).collect()
        };
        let depth = Some(1 + (seed as usize % 3));
        let cfg = TreeConfig {
            max_depth: depth,
            ..TreeConfig::default()
        };
        let tree = fit_tree(&Matrix::from_rows(&x), &y, &w, &cfg).unwrap();
        let idx: Vec<usize> = (0..n).collect();
        let oracle = oracle_tree::build(&x, &y, &w, &idx, 0, depth);
        let sse = |pred: &dyn Fn(&[f64]) -> f64| -> f64 {
            (0..n).map(|i| w[i] * (y[i] - pred(&x[i])).powi(2)).sum()
        };
        let sse_tree = sse(&|row| tree.predict_one(row));
        let sse_oracle = sse(&|row| oracle.predict(row));
        tree_worst = tree_worst.max((sse_tree - sse_oracle).abs() / sse_oracle.max(1.0));
    }

    // (b) NNW against exhaustive nearest-assignment counting
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let (m, n, nn) = (30, 20, 3);
    let src = random_dataset(&mut rng, m, DomainTag::Source);
    let tgt = random_dataset(&mut rng, n, DomainTag::Target);
    let got = nnw_weights(&src, &tgt, nn).unwrap();
    let mut counts = vec![0u64; m];
    for t in 0..n {
        let mut order: Vec<usize> = (0..m).collect();
        let dist = |i: usize| -> f64 {
            src.features(i)
                .iter()
                .zip(tgt.features(t))
                .map(|(a, b)| (a - b) * (a - b))
                .sum()
        };
        order.sort_by(|&a, &b| dist(a).partial_cmp(&dist(b)).unwrap().then(a.cmp(&b)));
        for &i in order.iter().take(nn) {
            counts[i] += 1;
        }
    }
    let nnw_matches = got
        .weights
        .iter()
        .zip(&counts)
        .all(|(&w, &c)| w == c as f64 * m as f64 / (n * nn) as f64);

    // (c) two-sample KMM against a 1e-3 grid over the feasible box
    let src2 = {
        let rows = vec![vec![0.0, 0.0], vec![1.5, -0.5]];
        Dataset::new(
            vec!["x".into(), "y".into()],
            (0, 1),
            Matrix::from_rows(&rows),
            vec![0.0; 2],
            None,
            vec![0, 1],
            vec![0; 2],
            DomainTag::Source,
        )
        .unwrap()
    };
    let tgt2 = {
        let rows = vec![vec![1.2, -0.4], vec![1.4, -0.3], vec![0.2, 0.1]];
        Dataset::new(
            vec!["x".into(), "y".into()],
            (0, 1),
            Matrix::from_rows(&rows),
            vec![0.0; 3],
            None,
            vec![0, 1, 2],
            vec![0; 3],
            DomainTag::Target,
        )
        .unwrap()
    };
    let gamma = 0.5;
    let b = 3.0;
    let kval = |a: &[f64], c: &[f64]| -> f64 {
        let d2: f64 = a.iter().zip(c).map(|(u, v)| (u - v) * (u - v)).sum();
        (-gamma * d2).exp()
    };
    let k11 = kval(src2.features(0), src2.features(0));
    let k12 = kval(src2.features(0), src2.features(1));
    let k22 = kval(src2.features(1), src2.features(1));
    let ratio = 2.0 / 3.0;
    let kap = |i: usize| -> f64 {
        ratio
            * (0..3)
                .map(|j| kval(src2.features(i), tgt2.features(j)))
                .sum::<f64>()
    };
    let (kap1, kap2) = (kap(0), kap(1));
    let objective = |w1: f64, w2: f64| -> f64 {
        0.5 * (k11 * w1 * w1 + 2.0 * k12 * w1 * w2 + k22 * w2 * w2) - kap1 * w1 - kap2 * w2
    };
    let eps2 = (2.0f64.sqrt() - 1.0) / 2.0f64.sqrt();
    let slack = 2.0 * eps2;
    let mut grid_best = f64::INFINITY;
    let steps = (b / 1e-3) as usize;
    for i in 0..=steps {
        let w1 = i as f64 * 1e-3;
        for j in 0..=steps {
            let w2 = j as f64 * 1e-3;
            if (w1 + w2 - 2.0).abs() <= slack {
                grid_best = grid_best.min(objective(w1, w2));
            }
        }
    }
    let solved = kmm_weights(&src2, &tgt2, &rbf(gamma), b, None, 2000, 1e-10).unwrap();
    let solver_obj = objective(solved.weights[0], solved.weights[1]);
    let kmm_gap = (solver_obj - grid_best).abs();

    check(
        3,
        tree_worst <= 1e-9 && nnw_matches && kmm_gap <= 1e-4,
        &format!(
            "tree SSE within {tree_worst:.2e} of exhaustive splitter, \
             NNW counts exact, KMM objective within {kmm_gap:.2e} of grid search"
        ),
    );
}

#[test]
fn criterion_4_identical_distributions_stay_near_uniform() {
    let mut rng = ChaCha8Rng::seed_from_u64(4242);
    let src = random_dataset(&mut rng, 100, DomainTag::Source);
    let tgt = Dataset::new(
        src.feature_names.clone(),
        src.coordinate_indices,
        src.samples.clone(),
        src.labels.clone(),
        None,
        src.sensor_ids.clone(),
        src.day_index.clone(),
        DomainTag::Target,
    )
    .unwrap();

    // Maximum likelihood overfits narrow kernels even when no shift
    // exists, so probe the null in the smooth-kernel regime: few centers,
    // bandwidth much wider than the point spacing.
    let kliep = kliep_weights(&src, &tgt, &rbf(0.02), 25, 300, 1e-6).unwrap();
    let kmm = kmm_weights(&src, &tgt, &rbf(0.5), 1000.0, None, 300, 1e-6).unwrap();
    let nnw = nnw_weights(&src, &tgt, 1).unwrap();

    let in_band = |ws: &[f64]| ws.iter().all(|&w| (0.8..=1.2).contains(&w));
    let kliep_ok = in_band(&kliep.weights);
    let kmm_ok = in_band(&kmm.weights);
    let nnw_ok = nnw.weights.iter().all(|&w| w == 1.0);
    check(
        4,
        kliep_ok && kmm_ok && nnw_ok,
        &format!(
            "source = target: KLIEP in [{:.3}, {:.3}], KMM in [{:.3}, {:.3}], NNW(1) all 1",
            kliep.weights.iter().cloned().fold(f64::INFINITY, f64::min),
            kliep.weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            kmm.weights.iter().cloned().fold(f64::INFINITY, f64::min),
            kmm.weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        ),
    );
}

// ---------- criteria 5-8: the benchmark harness ----------

/// Serializes the timed binary invocations so wall-clock budgets are
/// measured without the other heavy test competing for cores.
static HEAVY: Mutex<()> = Mutex::new(());

fn repo_config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ldfkit"))
}

fn run_to_dir(args: &[&str], config: &Path, out_dir: &Path) {
    let out = bin()
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out-dir")
        .arg(out_dir)
        .output()
        .expect("spawn ldfkit");
    assert!(
        out.status.success(),
        "ldfkit {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

struct CommittedRun {
    mean_r2: std::collections::BTreeMap<(String, String), f64>,
    corr_mean_abs: f64,
    elapsed_secs: f64,
}

fn committed_run() -> &'static CommittedRun {
    static RUN: OnceLock<CommittedRun> = OnceLock::new();
    RUN.get_or_init(|| {
        let _serial = HEAVY.lock().unwrap_or_else(|p| p.into_inner());
        let tmp = TempDir::new().unwrap();
        let started = Instant::now();
        run_to_dir(&["bench"], &repo_config("benchmark.json"), tmp.path());
        let elapsed_secs = started.elapsed().as_secs_f64();
        let mut mean_r2 = std::collections::BTreeMap::new();
        let table = fs::read_to_string(tmp.path().join("results.csv")).unwrap();
        for line in table.lines().skip(1) {
            let cells: Vec<&str> = line.split(',').collect();
            assert_eq!(cells[2], "9", "committed benchmark must run at 9 sensors");
            mean_r2.insert(
                (cells[0].to_string(), cells[1].to_string()),
                cells[3].parse::<f64>().unwrap(),
            );
        }
        let manifest: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(tmp.path().join("manifest.json")).unwrap())
                .unwrap();
        CommittedRun {
            mean_r2,
            corr_mean_abs: manifest["ldf_label_correlation"]["mean_abs"]
                .as_f64()
                .expect("manifest carries the latent correlation summary"),
            elapsed_secs,
        }
    })
}

#[test]
fn criterion_5_ldf_lifts_nnw_on_the_committed_benchmark() {
    let run = committed_run();
    let plain = run.mean_r2[&("NNW".to_string(), "plain".to_string())];
    let ldf = run.mean_r2[&("NNW".to_string(), "ldf".to_string())];
    let gain = ldf - plain;
    check(
        5,
        gain >= 0.03 && run.elapsed_secs < 900.0,
        &format!(
            "mean R2 {plain:.3} -> {ldf:.3} (gain {gain:+.3}, needs >= +0.03) \
             in {:.0}s of a 900s budget, 20 repeats at 9 sensors",
            run.elapsed_secs
        ),
    );
}

#[test]
fn criterion_6_latent_tracks_held_out_labels() {
    let run = committed_run();
    check(
        6,
        run.corr_mean_abs > 0.5,
        &format!(
            "mean |corr(latent, label)| = {:.3} on held-out target samples (needs > 0.5)",
            run.corr_mean_abs
        ),
    );
}

#[test]
fn criterion_7_small_neighborhoods_do_not_win() {
    let _serial = HEAVY.lock().unwrap_or_else(|p| p.into_inner());
    let tmp = TempDir::new().unwrap();
    let out = bin()
        .args(["ablate-k", "--k-values", "4,12"])
        .arg("--config")
        .arg(repo_config("ablation.json"))
        .arg("--out-dir")
        .arg(tmp.path())
        .output()
        .expect("spawn ldfkit");
    assert!(
        out.status.success(),
        "ablate-k failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let table = fs::read_to_string(tmp.path().join("ablation.csv")).unwrap();
    let mut by_k = std::collections::BTreeMap::new();
    for line in table.lines().skip(1) {
        let cells: Vec<&str> = line.split(',').collect();
        assert_eq!(cells[3], "5", "ablation must run at 5 sensors");
        by_k.insert(cells[0].parse::<u32>().unwrap(), cells[4].parse::<f64>().unwrap());
    }
    let (k4, k12) = (by_k[&4], by_k[&12]);
    check(
        7,
        k4 <= k12,
        &format!("mean R2 at k=4 is {k4:.3}, at k=12 is {k12:.3} (needs k4 <= k12)"),
    );
}

#[test]
fn criterion_8_benchmarks_are_bit_deterministic() {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("bench.json");
    fs::write(
        &cfg,
        r#"{
            "data": {"kind": "synth", "config": {
                "n_source_sensors": 10, "n_target_sensors": 5,
                "n_days": 10, "grid_resolution": 4
            }},
            "roster": [
                {"model": "nnw", "variant": "plain"},
                {"model": "nnw", "variant": "ldf"},
                {"model": "kliep", "variant": "ldf"}
            ],
            "sensor_counts": [3],
            "cv_repeats": 3,
            "samples_per_sensor": 8,
            "k_neighbors": 6,
            "autoencoder": {"epochs": 6},
            "master_seed": 31
        }"#,
    )
    .unwrap();
    run_to_dir(&["bench"], &cfg, &tmp.path().join("a"));
    run_to_dir(&["bench"], &cfg, &tmp.path().join("b"));
    let a = fs::read(tmp.path().join("a/results.csv")).unwrap();
    let b = fs::read(tmp.path().join("b/results.csv")).unwrap();
    // Every cell preparation also re-asserts that test sensors stay out
    // of the training pool; a violation would have aborted the runs.
    check(
        8,
        a == b,
        &format!(
            "two runs with one master seed produced byte-identical result tables \
             ({} bytes); per-cell train/test sensor disjointness asserted throughout",
            a.len()
        ),
    );
}

// ---------- criterion 9: metric values ----------

#[test]
fn criterion_9_metrics_match_hand_computations() {
    let r2: f64 = r_squared(&[1.0, 2.0, 3.0], &[1.0, 2.0, 4.0]).unwrap();
    let rm: f64 = rmse(&[0.0, 0.0], &[3.0, 4.0]).unwrap();
    let r2_err = (r2 - 0.5).abs();
    let rm_err = (rm - (12.5f64).sqrt()).abs();
    // pearson backs the correlation reports; pin its sign handling too
    let pr: f64 = pearson(&[1.0, 2.0, 3.0], &[-1.0, -2.0, -3.0]).unwrap();
    check(
        9,
        r2_err < 1e-12 && rm_err < 1e-12 && (pr + 1.0).abs() < 1e-12,
        &format!(
            "r_squared([1,2,3],[1,2,4]) off by {r2_err:.1e}, \
             rmse([0,0],[3,4]) off by {rm_err:.1e}, pearson sign exact"
        ),
    );
}
