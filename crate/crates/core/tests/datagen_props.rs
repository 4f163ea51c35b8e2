// SPDX-License-Identifier: MIT OR Apache-2.0

use driftseg::datagen::{
    covcon_concept, covcon_label, generate, load_csv, sea_label, sine_label, split_current_segment, write_csv,
    SplitRatios, StreamSpec,
};
use driftseg::model::{train, TrainConfig};
use proptest::prelude::*;

fn synthetic() -> impl Strategy<Value = &'static str> {
    prop::sample::select(vec!["sea", "random_rbf", "sine", "hyperplane", "covcon"])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn stream_shape_matches_spec(name in synthetic(), segments in 1usize..5, batches in 1usize..4, size in 1usize..30, seed in any::<u64>()) {
        let mut spec = StreamSpec::preset(name, seed).unwrap();
        spec.num_segments = segments;
        spec.batches_per_segment = batches;
        spec.batch_size = size;
        let stream = generate(&spec).unwrap();
        prop_assert_eq!(stream.segments.len(), segments);
        prop_assert_eq!(stream.current, segments - 1);
        let mut next_id = 0;
        for (s, seg) in stream.segments.iter().enumerate() {
            prop_assert_eq!(seg.segment_id, s);
            prop_assert_eq!(seg.batches.len(), batches);
            for b in &seg.batches {
                prop_assert_eq!(b.batch_id, next_id);
                prop_assert_eq!(b.samples.len(), size);
                prop_assert!(b.samples.iter().all(|x| x.features.len() == spec.n_features && x.label < spec.n_classes));
                next_id += 1;
            }
        }
    }
}

#[test]
fn covcon_labels_rederive_exactly() {
    for seed in 0..3 {
        let spec = StreamSpec::preset("covcon", seed).unwrap();
        let stream = generate(&spec).unwrap();
        for seg in &stream.segments {
            let (alpha, direction) = covcon_concept(&spec.params, seg.segment_id);
            for x in seg.samples() {
                assert_eq!(x.label, covcon_label(&x.features, alpha, direction));
            }
        }
    }
}

#[test]
fn sea_and_sine_labels_rederive_exactly() {
    let sea = StreamSpec::preset("sea", 1).unwrap();
    for seg in &generate(&sea).unwrap().segments {
        let theta = sea.params.sea_thresholds[seg.segment_id % sea.params.sea_thresholds.len()];
        assert!(seg.samples().all(|x| x.label == sea_label(&x.features, theta)));
    }
    let sine = StreamSpec::preset("sine", 1).unwrap();
    for seg in &generate(&sine).unwrap().segments {
        assert!(seg.samples().all(|x| x.label == sine_label(&x.features, seg.segment_id % 2 == 1)));
    }
}

/// Label-by-segment contingency table; Pearson chi-square against independence.
fn label_segment_chi_square(spec: &StreamSpec) -> (f64, usize) {
    let stream = generate(spec).unwrap();
    let c = spec.n_classes;
    let table: Vec<Vec<f64>> = stream
        .segments
        .iter()
        .map(|seg| {
            let mut row = vec![0.0; c];
            seg.samples().for_each(|x| row[x.label] += 1.0);
            row
        })
        .collect();
    let total: f64 = table.iter().flatten().sum();
    let col: Vec<f64> = (0..c).map(|j| table.iter().map(|r| r[j]).sum()).collect();
    let mut chi = 0.0;
    for row in &table {
        let rs: f64 = row.iter().sum();
        for j in 0..c {
            let expected = rs * col[j] / total;
            chi += (row[j] - expected).powi(2) / expected;
        }
    }
    (chi, (table.len() - 1) * (c - 1))
}

#[test]
fn rbf_label_histogram_shifts_across_segments() {
    // Upper 0.1% point of chi-square with 7 degrees of freedom.
    const CRITICAL_DF7: f64 = 24.322;
    for seed in 0..3 {
        let (chi, df) = label_segment_chi_square(&StreamSpec::preset("random_rbf", seed).unwrap());
        assert_eq!(df, 7);
        assert!(chi > CRITICAL_DF7, "seed {seed}: chi-square {chi}");
    }
}

fn quick_train() -> TrainConfig {
    TrainConfig { hidden_units: 32, ..TrainConfig::default() }
}

/// A model trained on segment 0 does worse on the final segment than one
/// trained on the final segment's own training split.
#[test]
fn drift_is_realized_for_every_generator() {
    for name in ["sea", "random_rbf", "sine", "hyperplane", "covcon"] {
        let mut worse = 0;
        for seed in 0..3 {
            let stream = generate(&StreamSpec::preset(name, seed).unwrap()).unwrap();
            let split = split_current_segment(&stream, SplitRatios::default()).unwrap();
            let config = TrainConfig { seed, ..quick_train() };
            let init = || config.init_model(stream.n_features(), stream.n_classes()).unwrap();
            let old: Vec<_> = stream.segments[0].batches.iter().collect();
            let own: Vec<_> = split.train.iter().collect();
            let on_old = train(init(), &old, &split.validation, &config).unwrap().model;
            let on_own = train(init(), &own, &split.validation, &config).unwrap().model;
            let a_old = on_old.evaluate(&split.test).unwrap().accuracy;
            let a_own = on_own.evaluate(&split.test).unwrap().accuracy;
            if a_old < a_own {
                worse += 1;
            }
        }
        assert!(worse >= 2, "{name}: segment-0 model worse in only {worse} of 3 seeds");
    }
}

#[test]
fn csv_round_trip_preserves_stream() {
    let spec = StreamSpec::preset("hyperplane", 2).unwrap();
    let stream = generate(&spec).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("h.csv");
    write_csv(&stream, &path).unwrap();
    let back = load_csv(&path, "label", &spec).unwrap();
    assert_eq!(back.segments, stream.segments);
}
