//! Property tests for neighborhood clouds: an exhaustive oracle over
//! small pools, ordering invariants, and tensor assembly contracts.

use ldf_core::{
    assemble_ldf_input, build_cloud, feature_weights, Dataset, DomainTag, Matrix, ObjectiveSample,
    Pool,
};
use proptest::prelude::*;

fn make(rows: &[(f64, f64, i64)], domain: DomainTag) -> Dataset<f64> {
    let n = rows.len();
    let samples = if n == 0 {
        Matrix::zeros(0, 2)
    } else {
        Matrix::from_rows(&rows.iter().map(|r| vec![r.0, r.1]).collect::<Vec<_>>())
    };
    Dataset::new(
        vec!["x".into(), "y".into()],
        (0, 1),
        samples,
        rows.iter().map(|r| r.0 * 2.0 - r.1).collect(),
        None,
        (0..n as i64).collect(),
        rows.iter().map(|r| r.2).collect(),
        domain,
    )
    .unwrap()
}

/// Plain selection-by-scan oracle: filter by day window, drop the
/// objective, then repeatedly extract the closest remaining candidate.
fn oracle_neighbors(
    pool_rows: &[(f64, f64, i64)],
    objective: (f64, f64, i64),
    skip: Option<usize>,
    k: usize,
    day_window: i64,
) -> Option<Vec<usize>> {
    let mut remaining: Vec<usize> = (0..pool_rows.len())
        .filter(|&i| Some(i) != skip && (pool_rows[i].2 - objective.2).abs() <= day_window)
        .collect();
    if remaining.len() < k {
        return None;
    }
    let dist = |i: usize| {
        let dx = pool_rows[i].0 - objective.0;
        let dy = pool_rows[i].1 - objective.1;
        dx * dx + dy * dy
    };
    let mut picked = Vec::with_capacity(k);
    for _ in 0..k {
        let mut best = 0;
        for j in 1..remaining.len() {
            if dist(remaining[j]) < dist(remaining[best]) {
                best = j;
            }
        }
        picked.push(remaining.remove(best));
    }
    Some(picked)
}

fn arb_rows(max: usize) -> impl Strategy<Value = Vec<(f64, f64, i64)>> {
    prop::collection::vec((-50.0f64..50.0, -50.0f64..50.0, 0i64..4), 1..max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cloud_matches_exhaustive_oracle(
        source_rows in arb_rows(120),
        target_rows in arb_rows(80),
        k in 1usize..8,
        day_window in 0i64..4,
        pick in 0usize..200
    ) {
        let source = make(&source_rows, DomainTag::Source);
        let target = make(&target_rows, DomainTag::Target);
        let pool = Pool::new(&source, &target).unwrap();
        let mut all_rows = source_rows.clone();
        all_rows.extend_from_slice(&target_rows);
        let idx = pick % all_rows.len();
        let objective_row = all_rows[idx];
        let (ds, local) = if idx < source_rows.len() {
            (&source, idx)
        } else {
            (&target, idx - source_rows.len())
        };
        let objective = ObjectiveSample::from_row(ds, local, Some(idx));
        let expected = oracle_neighbors(&all_rows, objective_row, Some(idx), k, day_window);
        match build_cloud(&pool, &objective, k, day_window) {
            Ok(cloud) => {
                prop_assert_eq!(Some(cloud.neighbor_indices.clone()), expected);
                prop_assert_eq!(cloud.neighbor_indices.len(), k);
                prop_assert!(!cloud.neighbor_indices.contains(&idx));
                for pair in cloud.distances.windows(2) {
                    prop_assert!(pair[0] <= pair[1]);
                }
            }
            Err(_) => prop_assert_eq!(expected, None),
        }
    }

    #[test]
    fn assembly_keeps_objective_row_raw_and_voids_label(
        source_rows in arb_rows(60),
        k in 1usize..6,
        probe in (-50.0f64..50.0, -50.0f64..50.0)
    ) {
        prop_assume!(source_rows.len() >= k);
        // same-day rows so the window filter never starves the cloud
        let rows: Vec<(f64, f64, i64)> = source_rows.iter().map(|r| (r.0, r.1, 0)).collect();
        let source = make(&rows, DomainTag::Source);
        let empty = make(&[], DomainTag::Target);
        let pool = Pool::new(&source, &empty).unwrap();
        let features = [probe.0, probe.1];
        let objective = ObjectiveSample {
            features: &features,
            day: 0,
            label: 3.25,
            aux: None,
            pool_index: None,
        };
        let cloud = build_cloud(&pool, &objective, k, 0).unwrap();
        let neighbor_rows: Vec<&[f64]> = cloud
            .neighbor_indices
            .iter()
            .map(|&i| pool.features(i))
            .collect();
        let weights = feature_weights(&features, &neighbor_rows).unwrap();
        let input = assemble_ldf_input(&objective, &cloud, &pool, &weights).unwrap();
        prop_assert_eq!(input.tensor.rows(), k + 1);
        prop_assert_eq!(input.tensor.cols(), 3);
        // row 0: raw objective features, label cell voided
        prop_assert_eq!(input.tensor.get(0, 0), probe.0);
        prop_assert_eq!(input.tensor.get(0, 1), probe.1);
        prop_assert_eq!(input.tensor.get(0, 2), 0.0);
        prop_assert_eq!(input.target_label, 3.25);
        // every weight lies in (0, 1] and each column peaks at 1
        for f in 0..2 {
            let mut max = 0.0f64;
            for j in 0..k {
                let w = weights.get(j, f);
                prop_assert!(w > 0.0 && w <= 1.0);
                max = max.max(w);
            }
            prop_assert_eq!(max, 1.0);
        }
    }
}
