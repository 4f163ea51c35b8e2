// SPDX-License-Identifier: MIT OR Apache-2.0

use driftseg::bench::{
    read_rows, run_experiment, run_tradeoff_sweep, summarize, write_rows, DatasetConfig, ExperimentConfig, Method,
    MetricsRow,
};
use driftseg::datagen::StreamSpec;
use proptest::prelude::*;

fn small_experiment(name: &str, segments: usize) -> ExperimentConfig {
    let mut spec = StreamSpec::preset(name, 0).unwrap();
    spec.num_segments = segments;
    spec.batches_per_segment = 10;
    let mut c = ExperimentConfig { dataset: DatasetConfig::from_spec(spec), ..ExperimentConfig::default() };
    c.selection.train.hidden_units = 32;
    c.selection.forest.n_estimators = 10;
    c
}

fn row_strategy() -> impl Strategy<Value = MetricsRow> {
    (0usize..2, 0usize..5, 0u64..4, 0.0f64..1.0, 0.0f64..1.0, 0.0f64..5.0, 0.0f64..1.0).prop_map(
        |(d, m, seed, accuracy, f1, t, data_used)| MetricsRow {
            dataset: ["a", "b"][d].into(),
            method: Method::ALL[m],
            seed,
            accuracy,
            f1,
            rf_time_s: t / 2.0,
            model_time_s: t / 2.0,
            total_time_s: t,
            data_used,
        },
    )
}

proptest! {
    #[test]
    fn summary_matches_independent_recount(rows in prop::collection::vec(row_strategy(), 1..30)) {
        let summary = summarize(&rows).unwrap();
        for s in &summary {
            let acc: Vec<f64> = rows.iter().filter(|r| r.dataset == s.dataset && r.method == s.method).map(|r| r.accuracy).collect();
            let n = acc.len() as f64;
            let mean = acc.iter().sum::<f64>() / n;
            let sd = if acc.len() < 2 { 0.0 } else { (acc.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / (n - 1.0)).sqrt() };
            prop_assert_eq!(s.runs, acc.len());
            prop_assert!((s.accuracy_mean - mean).abs() < 1e-12);
            prop_assert!((s.accuracy_sd - sd).abs() < 1e-12);
        }
        let groups: std::collections::HashSet<_> = rows.iter().map(|r| (r.dataset.clone(), r.method)).collect();
        prop_assert_eq!(summary.len(), groups.len());
        for d in ["a", "b"] {
            let of_d: Vec<_> = summary.iter().filter(|s| s.dataset == d).collect();
            if of_d.is_empty() {
                continue;
            }
            let best = of_d.iter().map(|s| s.accuracy_mean).fold(f64::MIN, f64::max);
            let flagged: Vec<_> = of_d.iter().filter(|s| s.best).collect();
            prop_assert_eq!(flagged.len(), 1);
            prop_assert_eq!(flagged[0].accuracy_mean, best);
        }
    }
}

#[test]
fn rows_are_complete_reproducible_and_timed() {
    let mut config = small_experiment("sea", 3);
    config.seeds = vec![0, 1];
    let a = run_experiment(&config).unwrap();
    let b = run_experiment(&config).unwrap();
    assert_eq!(a.len(), 2 * Method::ALL.len());
    for (x, y) in a.iter().zip(&b) {
        assert_eq!((x.method, x.seed, x.accuracy, x.f1, x.data_used), (y.method, y.seed, y.accuracy, y.f1, y.data_used));
        for v in [x.accuracy, x.f1] {
            assert!((0.0..=1.0).contains(&v));
        }
        assert!(x.data_used > 0.0 && x.data_used <= 1.0);
        assert!(x.rf_time_s >= 0.0 && x.model_time_s >= 0.0);
        assert!(x.rf_time_s + x.model_time_s <= x.total_time_s + 0.1);
    }
    let mut buf = Vec::new();
    write_rows(&a, &mut buf).unwrap();
    let back = read_rows(buf.as_slice()).unwrap();
    assert_eq!(back.len(), a.len());
    assert_eq!(back[3].accuracy, a[3].accuracy);
}

#[test]
fn no_drift_full_data_matches_current_segment() {
    let mut config = small_experiment("hyperplane", 4);
    if let Some(spec) = config.dataset.spec.as_mut() {
        spec.params.drift = false;
    }
    config.methods = vec![Method::FullData, Method::CurrentSegment];
    let rows = run_experiment(&config).unwrap();
    let mean = |m: Method| rows.iter().filter(|r| r.method == m).map(|r| r.accuracy).sum::<f64>() / 3.0;
    let (full, current) = (mean(Method::FullData), mean(Method::CurrentSegment));
    assert!((full - current).abs() <= 0.03, "full {full}, current {current}");
}

#[test]
fn sweep_points_are_sorted_and_full_budget_is_unconstrained() {
    let mut config = small_experiment("sine", 3);
    config.seeds = vec![0];
    config.methods = vec![Method::Ours];
    let curve = run_tradeoff_sweep(&config, &[1.0, 0.5, 0.25]).unwrap();
    let fractions: Vec<f64> = curve.iter().map(|p| p.fraction).collect();
    assert_eq!(fractions, vec![0.25, 0.5, 1.0]);
    let row = &run_experiment(&config).unwrap()[0];
    assert_eq!(curve[2].accuracy, row.accuracy);
    assert_eq!(curve[2].data_used, row.data_used);
}
