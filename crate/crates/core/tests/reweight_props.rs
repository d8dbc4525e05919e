//! Property tests for importance weighting: positivity, mean control,
//! an exhaustive nearest-neighbor oracle, and objective descent.

use ldf_core::{
    kernel_eval, kliep_weights, kmm_weights, nnw_weights, Dataset, DomainTag, KernelConfig, Matrix,
};
use proptest::prelude::*;

/// 2-feature dataset; a small index jitter keeps rows pairwise distinct
/// so nearest-neighbor ties cannot arise.
fn jittered(values: &[(f64, f64)], domain: DomainTag) -> Dataset<f64> {
    let rows: Vec<Vec<f64>> = values
        .iter()
        .enumerate()
        .map(|(i, &(a, b))| vec![a + i as f64 * 1e-3, b - i as f64 * 2e-3])
        .collect();
    let n = rows.len();
    Dataset::new(
        vec!["x".into(), "y".into()],
        (0, 1),
        Matrix::from_rows(&rows),
        vec![0.0; n],
        None,
        (0..n as i64).collect(),
        vec![0; n],
        domain,
    )
    .unwrap()
}

fn from_rows(rows: Vec<Vec<f64>>, domain: DomainTag) -> Dataset<f64> {
    let n = rows.len();
    Dataset::new(
        vec!["x".into(), "y".into()],
        (0, 1),
        Matrix::from_rows(&rows),
        vec![0.0; n],
        None,
        (0..n as i64).collect(),
        vec![0; n],
        domain,
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn nnw_matches_exhaustive_assignment(
        source_vals in prop::collection::vec((-30.0f64..30.0, -30.0f64..30.0), 4..60),
        target_vals in prop::collection::vec((-30.0f64..30.0, -30.0f64..30.0), 1..40),
        n_neighbors in 1usize..4
    ) {
        prop_assume!(source_vals.len() >= n_neighbors);
        let source = jittered(&source_vals, DomainTag::Source);
        let target = jittered(&target_vals, DomainTag::Target);
        let m = source.len();
        let n = target.len();
        let w = nnw_weights(&source, &target, n_neighbors).unwrap();

        // oracle: for each target, scan-select the n_neighbors closest
        let mut counts = vec![0usize; m];
        for t in 0..n {
            let tf = target.features(t);
            let mut order: Vec<usize> = (0..m).collect();
            order.sort_by(|&i, &j| {
                let di: f64 = source.features(i).iter().zip(tf).map(|(a, b)| (a - b) * (a - b)).sum();
                let dj: f64 = source.features(j).iter().zip(tf).map(|(a, b)| (a - b) * (a - b)).sum();
                di.partial_cmp(&dj).unwrap().then(i.cmp(&j))
            });
            for &i in order.iter().take(n_neighbors) {
                counts[i] += 1;
            }
        }
        for i in 0..m {
            let expected = counts[i] as f64 * m as f64 / (n * n_neighbors) as f64;
            prop_assert!((w.weights[i] - expected).abs() < 1e-12);
        }
        let mean = w.weights.iter().sum::<f64>() / m as f64;
        prop_assert!((mean - 1.0).abs() < 1e-12, "nnw mean {mean}");
    }

    #[test]
    fn nnw_permutation_equivariance(
        source_vals in prop::collection::vec((-30.0f64..30.0, -30.0f64..30.0), 4..40),
        target_vals in prop::collection::vec((-30.0f64..30.0, -30.0f64..30.0), 1..25),
        rotate in 1usize..10
    ) {
        let source = jittered(&source_vals, DomainTag::Source);
        let target = jittered(&target_vals, DomainTag::Target);
        let m = source.len();
        let base = nnw_weights(&source, &target, 1).unwrap();

        // rotation as a concrete permutation: row i moves to (i + rotate) % m
        let shift = rotate % m;
        let rows: Vec<Vec<f64>> = (0..m)
            .map(|i| source.features((i + m - shift) % m).to_vec())
            .collect();
        let permuted_source = from_rows(rows, DomainTag::Source);
        let permuted = nnw_weights(&permuted_source, &target, 1).unwrap();
        for i in 0..m {
            prop_assert_eq!(permuted.weights[(i + shift) % m], base.weights[i]);
        }
    }

    #[test]
    fn weight_means_stay_controlled(
        source_vals in prop::collection::vec((-3.0f64..3.0, -3.0f64..3.0), 4..30),
        target_vals in prop::collection::vec((-3.0f64..3.0, -3.0f64..3.0), 2..20)
    ) {
        let source = jittered(&source_vals, DomainTag::Source);
        let target = jittered(&target_vals, DomainTag::Target);
        let m = source.len() as f64;
        let cfg = KernelConfig::default();

        let kliep = kliep_weights(&source, &target, &cfg, 100, 200, 1e-8).unwrap();
        prop_assert!(kliep.weights.iter().all(|&v| v.is_finite() && v >= 0.0));
        let mean = kliep.weights.iter().sum::<f64>() / m;
        prop_assert!((mean - 1.0).abs() < 1e-6, "kliep mean {mean}");

        let kmm = kmm_weights(&source, &target, &cfg, 1000.0, None, 300, 1e-10).unwrap();
        prop_assert!(kmm.weights.iter().all(|&v| v.is_finite() && v >= 0.0));
        let eps = (m.sqrt() - 1.0) / m.sqrt();
        let mean = kmm.weights.iter().sum::<f64>() / m;
        prop_assert!(mean >= 1.0 - eps - 1e-9 && mean <= 1.0 + eps + 1e-9, "kmm mean {mean}");
    }

    #[test]
    fn kmm_final_objective_not_above_uniform(
        source_vals in prop::collection::vec((-3.0f64..3.0, -3.0f64..3.0), 3..25),
        target_vals in prop::collection::vec((-3.0f64..3.0, -3.0f64..3.0), 2..15)
    ) {
        let source = jittered(&source_vals, DomainTag::Source);
        let target = jittered(&target_vals, DomainTag::Target);
        let m = source.len();
        let n = target.len();
        let cfg = KernelConfig::default();
        let w = kmm_weights(&source, &target, &cfg, 1000.0, None, 300, 1e-10).unwrap();

        let objective = |wv: &[f64]| -> f64 {
            let mut quad = 0.0;
            let mut lin = 0.0;
            for i in 0..m {
                for j in 0..m {
                    quad += wv[i]
                        * wv[j]
                        * kernel_eval(source.features(i), source.features(j), &cfg).unwrap();
                }
                let mut kappa_i = 0.0;
                for t in 0..n {
                    kappa_i += kernel_eval(source.features(i), target.features(t), &cfg).unwrap();
                }
                lin += wv[i] * kappa_i * m as f64 / n as f64;
            }
            0.5 * quad - lin
        };
        let uniform = vec![1.0; m];
        prop_assert!(
            objective(&w.weights) <= objective(&uniform) + 1e-9,
            "fitted {} vs uniform {}",
            objective(&w.weights),
            objective(&uniform)
        );
    }
}

// ---- frozen (seedless, fully deterministic) checks ----

/// Source drawn over [0, 2], target over [0, 1]: the fitted density
/// ratio must up-weight the covered half and down-weight the rest.
#[test]
fn kliep_recovers_density_ratio_direction() {
    // low-discrepancy lattices stand in for uniform draws
    let source_vals: Vec<(f64, f64)> = (0..500)
        .map(|i| {
            let u = (i as f64 * 0.6180339887498949).fract();
            let v = (i as f64 * 0.4142135623730951).fract();
            (2.0 * u, v)
        })
        .collect();
    let target_vals: Vec<(f64, f64)> = (0..200)
        .map(|i| {
            let u = (i as f64 * 0.7548776662466927).fract();
            let v = (i as f64 * 0.5698402909980532).fract();
            (u, v)
        })
        .collect();
    let source = jittered(&source_vals, DomainTag::Source);
    let target = jittered(&target_vals, DomainTag::Target);
    let cfg = KernelConfig {
        gamma: 2.0,
        ..KernelConfig::default()
    };
    let w = kliep_weights(&source, &target, &cfg, 100, 300, 1e-8).unwrap();
    let (mut covered, mut covered_n) = (0.0, 0);
    let (mut outside, mut outside_n) = (0.0, 0);
    for i in 0..source.len() {
        if source.features(i)[0] <= 1.0 {
            covered += w.weights[i];
            covered_n += 1;
        } else {
            outside += w.weights[i];
            outside_n += 1;
        }
    }
    let covered_mean = covered / covered_n as f64;
    let outside_mean = outside / outside_n as f64;
    assert!(
        covered_mean > 1.5 * outside_mean,
        "covered {covered_mean} vs outside {outside_mean}"
    );
}

/// Permuting source rows permutes KLIEP and KMM weights to numerical
/// accuracy (their solvers sum over source rows, so the last few bits
/// may move; nearest-neighbor counting is exact and tested above).
#[test]
fn kernel_methods_are_permutation_equivariant() {
    let source_vals: Vec<(f64, f64)> = (0..40)
        .map(|i| {
            let t = i as f64 / 40.0;
            ((4.0 * t).sin() * 2.0, (3.0 * t).cos())
        })
        .collect();
    let target_vals: Vec<(f64, f64)> = (0..25)
        .map(|i| {
            let t = i as f64 / 25.0;
            ((4.0 * t + 0.4).sin(), (2.0 * t).cos() * 0.5)
        })
        .collect();
    let source = jittered(&source_vals, DomainTag::Source);
    let target = jittered(&target_vals, DomainTag::Target);
    let m = source.len();
    let shift = 17 % m;
    let rows: Vec<Vec<f64>> = (0..m)
        .map(|i| source.features((i + m - shift) % m).to_vec())
        .collect();
    let permuted_source = from_rows(rows, DomainTag::Source);
    let cfg = KernelConfig::default();

    let base = kliep_weights(&source, &target, &cfg, 100, 300, 1e-10).unwrap();
    let perm = kliep_weights(&permuted_source, &target, &cfg, 100, 300, 1e-10).unwrap();
    for i in 0..m {
        let a = base.weights[i];
        let b = perm.weights[(i + shift) % m];
        assert!((a - b).abs() <= 1e-6 * a.abs().max(1.0), "kliep {a} vs {b}");
    }

    let base = kmm_weights(&source, &target, &cfg, 1000.0, None, 300, 1e-12).unwrap();
    let perm = kmm_weights(&permuted_source, &target, &cfg, 1000.0, None, 300, 1e-12).unwrap();
    for i in 0..m {
        let a = base.weights[i];
        let b = perm.weights[(i + shift) % m];
        assert!((a - b).abs() <= 1e-6 * a.abs().max(1.0), "kmm {a} vs {b}");
    }
}
