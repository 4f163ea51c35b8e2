// SPDX-License-Identifier: MIT OR Apache-2.0

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};

use super::{GeneratorKind, GeneratorParams, Sample, SegmentedStream, StreamSpec};
use crate::error::{Error, Result};

/// Inequality used by the Covcon boundary `alpha * sin(pi * x1) ? x2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Greater,
    Less,
}

/// Label 1 iff `x0 + x1 <= theta`.
pub fn sea_label(x: &[f64], theta: f64) -> usize {
    usize::from(x[0] + x[1] <= theta)
}

/// Label 1 iff `x1 < 0.5 sin(2 pi x0) + 0.5`, negated when `reversed`.
pub fn sine_label(x: &[f64], reversed: bool) -> usize {
    let below = x[1] < 0.5 * (2.0 * std::f64::consts::PI * x[0]).sin() + 0.5;
    usize::from(below != reversed)
}

/// Label 1 iff `sum_j w_j x_j > sum_j w_j / 2`. Points on the plane get label 0.
pub fn hyperplane_label(x: &[f64], weights: &[f64]) -> usize {
    let margin: f64 = x.iter().zip(weights).map(|(xi, wi)| wi * (xi - 0.5)).sum();
    usize::from(margin > 0.0)
}

pub fn covcon_label(x: &[f64], alpha: f64, direction: Direction) -> usize {
    let boundary = alpha * (std::f64::consts::PI * x[0]).sin();
    let hit = match direction {
        Direction::Greater => boundary > x[1],
        Direction::Less => boundary < x[1],
    };
    usize::from(hit)
}

/// Covcon concept of a segment: alpha grows linearly and the inequality
/// alternates, starting with `Greater` on segment 0.
pub fn covcon_concept(params: &GeneratorParams, segment: usize) -> (f64, Direction) {
    let s = if params.drift { segment } else { 0 };
    let alpha = params.covcon_alpha0 + params.covcon_alpha_step * s as f64;
    let direction = if s % 2 == 0 { Direction::Greater } else { Direction::Less };
    (alpha, direction)
}

/// Lower edge of the x1 sampling window, clamped so the window stays in [0, 1].
fn covcon_window_start(params: &GeneratorParams, segment: usize) -> f64 {
    let s = if params.drift { segment } else { 0 };
    (params.covcon_slide * s as f64).min(1.0 - params.covcon_window).max(0.0)
}

/// Generate a synthetic stream. Pure function of the spec (seed included).
pub fn generate(spec: &StreamSpec) -> Result<SegmentedStream> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let samples = match spec.generator {
        GeneratorKind::Sea => sea(spec, &mut rng),
        GeneratorKind::Sine => sine(spec, &mut rng),
        GeneratorKind::RandomRbf => random_rbf(spec, &mut rng)?,
        GeneratorKind::Hyperplane => hyperplane(spec, &mut rng),
        GeneratorKind::Covcon => covcon(spec, &mut rng),
        GeneratorKind::Csv => {
            return Err(Error::InvalidSpec("CSV streams are loaded with load_csv, not generated".into()))
        }
    };
    SegmentedStream::from_samples(spec.clone(), samples)
}

fn uniform_vec(rng: &mut ChaCha8Rng, d: usize, scale: f64) -> Vec<f64> {
    (0..d).map(|_| rng.random::<f64>() * scale).collect()
}

fn sea(spec: &StreamSpec, rng: &mut ChaCha8Rng) -> Vec<Sample> {
    let p = &spec.params;
    let mut out = Vec::with_capacity(spec.used_size());
    for s in 0..spec.num_segments {
        let theta = if p.drift { p.sea_thresholds[s % p.sea_thresholds.len()] } else { p.sea_thresholds[0] };
        for _ in 0..spec.segment_size() {
            let x = uniform_vec(rng, 3, 10.0);
            let y = sea_label(&x, theta);
            out.push(Sample::new(x, y));
        }
    }
    out
}

fn sine(spec: &StreamSpec, rng: &mut ChaCha8Rng) -> Vec<Sample> {
    let mut out = Vec::with_capacity(spec.used_size());
    for s in 0..spec.num_segments {
        let reversed = spec.params.drift && s % 2 == 1;
        for _ in 0..spec.segment_size() {
            let x = uniform_vec(rng, 4, 1.0);
            let y = sine_label(&x, reversed);
            out.push(Sample::new(x, y));
        }
    }
    out
}

fn random_rbf(spec: &StreamSpec, rng: &mut ChaCha8Rng) -> Result<Vec<Sample>> {
    let p = &spec.params;
    let (d, c, k) = (spec.n_features, spec.n_classes, p.rbf_centroids);
    let centers: Vec<Vec<f64>> = (0..k).map(|_| uniform_vec(rng, d, 1.0)).collect();
    let mut labels: Vec<usize> = (0..k).map(|_| rng.random_range(0..c)).collect();
    let weights: Vec<f64> = (0..k).map(|_| 1.0 - rng.random::<f64>()).collect();
    let pick = WeightedIndex::new(&weights).map_err(|e| Error::InvalidSpec(e.to_string()))?;
    let noise = Normal::new(0.0, p.rbf_sigma).map_err(|e| Error::InvalidSpec(e.to_string()))?;
    let n_flip = (p.rbf_flip_fraction * k as f64).round() as usize;

    let mut out = Vec::with_capacity(spec.used_size());
    for s in 0..spec.num_segments {
        if s > 0 && p.drift {
            for i in sample_indices(rng, k, n_flip).into_iter() {
                labels[i] = (labels[i] + rng.random_range(1..c)) % c;
            }
        }
        for _ in 0..spec.segment_size() {
            let i = pick.sample(rng);
            let x: Vec<f64> = centers[i].iter().map(|&m| m + noise.sample(rng)).collect();
            out.push(Sample::new(x, labels[i]));
        }
    }
    Ok(out)
}

fn hyperplane(spec: &StreamSpec, rng: &mut ChaCha8Rng) -> Vec<Sample> {
    let p = &spec.params;
    let d = spec.n_features;
    let mut weights = uniform_vec(rng, d, 1.0);
    let mut signs: Vec<f64> = (0..p.hyperplane_drift_features)
        .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
        .collect();
    let mut out = Vec::with_capacity(spec.used_size());
    for i in 0..spec.used_size() {
        if p.drift && i > 0 && i % p.hyperplane_interval == 0 {
            for (j, sign) in signs.iter_mut().enumerate() {
                weights[j] += *sign * p.hyperplane_step;
                if rng.random::<f64>() < p.hyperplane_flip_prob {
                    *sign = -*sign;
                }
            }
        }
        let x = uniform_vec(rng, d, 1.0);
        let y = hyperplane_label(&x, &weights);
        out.push(Sample::new(x, y));
    }
    out
}

fn covcon(spec: &StreamSpec, rng: &mut ChaCha8Rng) -> Vec<Sample> {
    let p = &spec.params;
    let mut out = Vec::with_capacity(spec.used_size());
    for s in 0..spec.num_segments {
        let (alpha, direction) = covcon_concept(p, s);
        let lo = covcon_window_start(p, s);
        for _ in 0..spec.segment_size() {
            let x = vec![lo + p.covcon_window * rng.random::<f64>(), rng.random::<f64>()];
            let y = covcon_label(&x, alpha, direction);
            out.push(Sample::new(x, y));
        }
    }
    out
}
