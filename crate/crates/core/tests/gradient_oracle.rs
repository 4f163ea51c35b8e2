// SPDX-License-Identifier: MIT OR Apache-2.0

mod common;

use std::time::Instant;

use driftseg::datagen::Sample;
use driftseg::model::MlpClassifier;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{fd_full, fd_last_layer, random_samples, relative_error};

#[test]
fn last_layer_gradient_matches_finite_differences() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    for i in 0..120 {
        let d = rng.random_range(1..6);
        let h = rng.random_range(1..12);
        let c = rng.random_range(2..5);
        let model = MlpClassifier::new(d, h, c, i).unwrap();
        let sample = random_samples(&mut rng, 1, d, c).remove(0);
        let analytic = model.last_layer_gradient(&sample).unwrap();
        let numeric = fd_last_layer(&model, &sample, 1e-5);
        worst = worst.max(relative_error(analytic.values(), &numeric));
    }
    assert!(worst < 1e-4, "worst relative error {worst}");
    assert!(started.elapsed().as_secs_f64() < 10.0);
}

#[test]
fn full_backprop_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for i in 0..20 {
        let model = MlpClassifier::new(3, 5, 3, i).unwrap();
        let samples = random_samples(&mut rng, 4, 3, 3);
        let analytic = model.full_gradient(&samples).unwrap();
        let numeric = fd_full(&model, &samples, 1e-6);
        let err = relative_error(&analytic, &numeric);
        assert!(err < 1e-4, "instance {i}: relative error {err}");
    }
}

fn model_and_samples() -> impl Strategy<Value = (MlpClassifier, Vec<Sample>)> {
    (1usize..5, 1usize..10, 2usize..4, any::<u64>(), 1usize..8).prop_map(|(d, h, c, seed, n)| {
        let model = MlpClassifier::new(d, h, c, seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let samples = random_samples(&mut rng, n, d, c);
        (model, samples)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn last_layer_slice_of_backprop_equals_mean_last_layer_gradient((model, samples) in model_and_samples()) {
        let full = model.full_gradient(&samples).unwrap();
        let mean = model.mean_gradient(&samples).unwrap();
        let (h, c) = (model.hidden(), model.n_classes());
        let range = model.last_layer_range();
        let w2 = &full[range.start..range.start + c * h];
        let b2 = &full[range.start + c * h..range.end];
        for (a, b) in b2.iter().zip(mean.bias()) {
            prop_assert!((a - b).abs() < 1e-10);
        }
        for (a, b) in w2.iter().zip(mean.weights()) {
            prop_assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn negative_last_layer_gradient_is_a_descent_direction((model, samples) in model_and_samples()) {
        let sample = &samples[0];
        let g = model.last_layer_gradient(sample).unwrap();
        prop_assume!(g.norm() > 1e-6);
        let (h, c) = (model.hidden(), model.n_classes());
        let range = model.last_layer_range();
        let step = 1e-6;
        let shifted = |sign: f64| {
            let mut m = model.clone();
            let p = m.params_mut();
            for k in 0..c * h {
                p[range.start + k] -= sign * step * g.weights()[k];
            }
            for j in 0..c {
                p[range.start + c * h + j] -= sign * step * g.bias()[j];
            }
            m.loss(sample).unwrap()
        };
        let directional = (shifted(1.0) - shifted(-1.0)) / (2.0 * step);
        prop_assert!(directional < 0.0);
        let expected = -g.norm().powi(2);
        prop_assert!((directional - expected).abs() <= 1e-4 * expected.abs().max(1e-8));
    }

    #[test]
    fn mean_gradient_is_linear_over_unions((model, samples) in model_and_samples(), split in 0usize..8) {
        let split = split.min(samples.len());
        prop_assume!(split > 0 && split < samples.len());
        let (a, b) = samples.split_at(split);
        let ga = model.mean_gradient(a).unwrap();
        let gb = model.mean_gradient(b).unwrap();
        let gu = model.mean_gradient(&samples).unwrap();
        let n = samples.len() as f64;
        for k in 0..gu.len() {
            let combined = (a.len() as f64 * ga.values()[k] + b.len() as f64 * gb.values()[k]) / n;
            prop_assert!((combined - gu.values()[k]).abs() < 1e-10);
        }
    }
}
