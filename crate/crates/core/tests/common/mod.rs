// SPDX-License-Identifier: MIT OR Apache-2.0

//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use std::collections::HashSet;

use driftseg::datagen::{CurrentSplit, Sample, Segment};
use driftseg::model::MlpClassifier;

/// Central differences of the loss with respect to the last layer, returned
/// in `[d/db (c entries), d/dw (entry j*h + m)]` order.
pub fn fd_last_layer(model: &MlpClassifier, sample: &Sample, step: f64) -> Vec<f64> {
    let (h, c) = (model.hidden(), model.n_classes());
    let range = model.last_layer_range();
    let w2_start = range.start;
    let b2_start = w2_start + c * h;
    let probe = |index: usize| {
        let mut plus = model.clone();
        plus.params_mut()[index] += step;
        let mut minus = model.clone();
        minus.params_mut()[index] -= step;
        (plus.loss(sample).unwrap() - minus.loss(sample).unwrap()) / (2.0 * step)
    };
    let mut out: Vec<f64> = (0..c).map(|j| probe(b2_start + j)).collect();
    out.extend((0..c * h).map(|k| probe(w2_start + k)));
    out
}

/// Central differences of the mean loss over every parameter.
pub fn fd_full(model: &MlpClassifier, samples: &[Sample], step: f64) -> Vec<f64> {
    (0..model.params().len())
        .map(|i| {
            let mut plus = model.clone();
            plus.params_mut()[i] += step;
            let mut minus = model.clone();
            minus.params_mut()[i] -= step;
            (plus.mean_loss(samples).unwrap() - minus.mean_loss(samples).unwrap()) / (2.0 * step)
        })
        .collect()
}

/// `||a - b|| / max(||a||, ||b||)`, or the absolute error when both are tiny.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale = norm(a).max(norm(b));
    if scale < 1e-8 {
        diff
    } else {
        diff / scale
    }
}

pub fn norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Number of other batches whose count is strictly smaller, by pairwise comparison.
pub fn brute_dominance(counts: &[u32]) -> Vec<u32> {
    (0..counts.len())
        .map(|t| (0..counts.len()).filter(|&u| u != t && counts[t] > counts[u]).count() as u32)
        .collect()
}

/// Per-sample gradients summed in a plain loop and divided once.
pub fn naive_mean_gradient(model: &MlpClassifier, samples: &[Sample]) -> Vec<f64> {
    let mut acc: Vec<f64> = Vec::new();
    for s in samples {
        let g = model.last_layer_gradient(s).unwrap();
        if acc.is_empty() {
            acc = vec![0.0; g.len()];
        }
        for (a, v) in acc.iter_mut().zip(g.values()) {
            *a += v;
        }
    }
    acc.iter().map(|a| a / samples.len() as f64).collect()
}

pub fn naive_gain(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn naive_disparity(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Share of the full-data pool covered by `used`, recounted over explicit
/// (batch id, position) sample identifiers.
pub fn recount_data_used(used: &[usize], previous: &[Segment], split: &CurrentSplit) -> f64 {
    let used: HashSet<usize> = used.iter().copied().collect();
    let mut pool = HashSet::new();
    let mut taken = HashSet::new();
    for b in previous.iter().flat_map(|s| s.batches.iter()).chain(split.train.iter()) {
        for i in 0..b.samples.len() {
            pool.insert((b.batch_id, i));
            let current = split.train.iter().any(|c| c.batch_id == b.batch_id);
            if current || used.contains(&b.batch_id) {
                taken.insert((b.batch_id, i));
            }
        }
    }
    taken.len() as f64 / pool.len() as f64
}

/// Samples with random features in `[-2, 2]^d` and random labels.
pub fn random_samples(rng: &mut impl rand::Rng, n: usize, d: usize, c: usize) -> Vec<Sample> {
    (0..n)
        .map(|_| Sample::new((0..d).map(|_| rng.random_range(-2.0..2.0)).collect(), rng.random_range(0..c)))
        .collect()
}
