// SPDX-License-Identifier: MIT OR Apache-2.0

//! One-hidden-layer ReLU network with a softmax head.
//!
//! Parameters live in one flat vector laid out as
//! `[W1 (hidden x d, row-major) | b1 | w (c x hidden, row-major) | b]`, which
//! lets the optimizers treat them uniformly. The last-layer gradient used for
//! data selection is exposed separately as a [`GradientVector`].

mod metrics;
mod train;

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datagen::Sample;
use crate::error::{Error, Result};

pub use metrics::{classification_metrics, Metrics};
pub use train::{train, train_with_plan, EarlyStopping, EpochPlan, Optimizer, StopSignal, TrainConfig, TrainOutcome};

/// Numerically stable softmax. Probabilities are floored at the smallest
/// normal `f64` so that they stay strictly positive for extreme logits.
pub fn softmax(z: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; z.len()];
    softmax_into(z, &mut out);
    out
}

fn softmax_into(z: &[f64], out: &mut [f64]) {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (o, &v) in out.iter_mut().zip(z) {
        *o = (v - max).exp();
        sum += *o;
    }
    for o in out.iter_mut() {
        *o = (*o / sum).max(f64::MIN_POSITIVE);
    }
}

pub fn log_sum_exp(z: &[f64]) -> f64 {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Cross-entropy `-sum_j y_j ln(p_j)` for a one-hot `y`.
pub fn cross_entropy(y: &[f64], probs: &[f64]) -> Result<f64> {
    let hot = one_hot_index(y)?;
    if probs.len() != y.len() {
        return Err(Error::DimensionMismatch { expected: y.len(), got: probs.len() });
    }
    // -0.0 when p == 1
    Ok((-probs[hot].ln()).max(0.0))
}

/// Cross-entropy straight from logits: `logsumexp(z) - z[label]`.
pub fn cross_entropy_from_logits(z: &[f64], label: usize) -> f64 {
    (log_sum_exp(z) - z[label]).max(0.0)
}

fn one_hot_index(y: &[f64]) -> Result<usize> {
    let mut hot = None;
    for (j, &v) in y.iter().enumerate() {
        if v == 1.0 && hot.is_none() {
            hot = Some(j);
        } else if v != 0.0 {
            return Err(Error::NotOneHot);
        }
    }
    hot.ok_or(Error::NotOneHot)
}

pub fn one_hot(label: usize, n_classes: usize) -> Vec<f64> {
    let mut y = vec![0.0; n_classes];
    y[label] = 1.0;
    y
}

/// Flattened last-layer gradient `(dL/db, dL/dw)`: `c` bias entries followed
/// by `c * hidden` weight entries, where entry `c + j * hidden + m` is
/// `dL/dw[m][j]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradientVector {
    n_classes: usize,
    values: Vec<f64>,
}

impl GradientVector {
    pub fn new(n_classes: usize, values: Vec<f64>) -> Result<Self> {
        if n_classes == 0 || values.len() < n_classes || (values.len() - n_classes) % n_classes != 0 {
            return Err(Error::InvalidConfig(format!(
                "gradient of length {} does not fit {n_classes} classes",
                values.len()
            )));
        }
        Ok(Self { n_classes, values })
    }

    pub fn zeros(n_classes: usize, hidden: usize) -> Self {
        Self { n_classes, values: vec![0.0; n_classes * (hidden + 1)] }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn bias(&self) -> &[f64] {
        &self.values[..self.n_classes]
    }

    pub fn weights(&self) -> &[f64] {
        &self.values[self.n_classes..]
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    fn check_len(&self, other: &Self) -> Result<()> {
        if self.len() != other.len() {
            return Err(Error::DimensionMismatch { expected: self.len(), got: other.len() });
        }
        Ok(())
    }

    pub fn dot(&self, other: &Self) -> Result<f64> {
        self.check_len(other)?;
        Ok(self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum())
    }

    /// Euclidean distance.
    pub fn distance(&self, other: &Self) -> Result<f64> {
        self.check_len(other)?;
        Ok(self.values.iter().zip(&other.values).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Result of a forward pass.
#[derive(Clone, Debug, PartialEq)]
pub struct Forward {
    /// Hidden embedding (post-ReLU).
    pub hidden: Vec<f64>,
    pub logits: Vec<f64>,
    pub probs: Vec<f64>,
}

const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpClassifier {
    n_features: usize,
    hidden: usize,
    n_classes: usize,
    params: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    version: u32,
    #[serde(flatten)]
    model: MlpClassifier,
}

struct Scratch {
    hidden: Vec<f64>,
    logits: Vec<f64>,
    probs: Vec<f64>,
    dz: Vec<f64>,
    dh: Vec<f64>,
}

const CHUNK: usize = 256;

impl MlpClassifier {
    /// He-uniform input weights, Xavier-uniform output weights, zero biases.
    pub fn new(n_features: usize, hidden: usize, n_classes: usize, seed: u64) -> Result<Self> {
        if n_features == 0 || hidden == 0 || n_classes < 2 {
            return Err(Error::InvalidConfig("model needs d >= 1, hidden >= 1 and c >= 2".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut model = Self { n_features, hidden, n_classes, params: vec![0.0; Self::n_params(n_features, hidden, n_classes)] };
        let he = (6.0 / n_features as f64).sqrt();
        for w in model.w1_mut() {
            *w = rng.random_range(-he..he);
        }
        let xavier = (6.0 / (hidden + n_classes) as f64).sqrt();
        for w in model.w2_mut() {
            *w = rng.random_range(-xavier..xavier);
        }
        Ok(model)
    }

    /// Build from explicit parameters in the flat layout.
    pub fn from_params(n_features: usize, hidden: usize, n_classes: usize, params: Vec<f64>) -> Result<Self> {
        let want = Self::n_params(n_features, hidden, n_classes);
        if params.len() != want {
            return Err(Error::DimensionMismatch { expected: want, got: params.len() });
        }
        Ok(Self { n_features, hidden, n_classes, params })
    }

    fn n_params(d: usize, h: usize, c: usize) -> usize {
        h * d + h + c * h + c
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn offsets(&self) -> [usize; 4] {
        let (d, h, c) = (self.n_features, self.hidden, self.n_classes);
        [0, h * d, h * d + h, h * d + h + c * h]
    }

    pub fn w1(&self) -> &[f64] {
        let o = self.offsets();
        &self.params[o[0]..o[1]]
    }

    pub fn b1(&self) -> &[f64] {
        let o = self.offsets();
        &self.params[o[1]..o[2]]
    }

    /// Output weights, row `j` holds class `j`'s weights over hidden units.
    pub fn w2(&self) -> &[f64] {
        let o = self.offsets();
        &self.params[o[2]..o[3]]
    }

    pub fn b2(&self) -> &[f64] {
        let o = self.offsets();
        &self.params[o[3]..]
    }

    fn w1_mut(&mut self) -> &mut [f64] {
        let o = self.offsets();
        &mut self.params[o[0]..o[1]]
    }

    fn w2_mut(&mut self) -> &mut [f64] {
        let o = self.offsets();
        &mut self.params[o[2]..o[3]]
    }

    /// Range of the last layer (`w`, then `b`) inside the flat parameter vector.
    pub fn last_layer_range(&self) -> std::ops::Range<usize> {
        self.offsets()[2]..self.params.len()
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n_features {
            return Err(Error::DimensionMismatch { expected: self.n_features, got: x.len() });
        }
        Ok(())
    }

    fn check_sample(&self, s: &Sample) -> Result<()> {
        self.check_dim(&s.features)?;
        if s.label >= self.n_classes {
            return Err(Error::InvalidConfig(format!("label {} outside [0, {})", s.label, self.n_classes)));
        }
        Ok(())
    }

    fn scratch(&self) -> Scratch {
        Scratch {
            hidden: vec![0.0; self.hidden],
            logits: vec![0.0; self.n_classes],
            probs: vec![0.0; self.n_classes],
            dz: vec![0.0; self.n_classes],
            dh: vec![0.0; self.hidden],
        }
    }

    fn forward_into(&self, x: &[f64], s: &mut Scratch) {
        let (d, h) = (self.n_features, self.hidden);
        let (w1, b1, w2, b2) = (self.w1(), self.b1(), self.w2(), self.b2());
        for m in 0..h {
            let row = &w1[m * d..(m + 1) * d];
            let a = b1[m] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
            s.hidden[m] = a.max(0.0);
        }
        for j in 0..self.n_classes {
            let row = &w2[j * h..(j + 1) * h];
            s.logits[j] = b2[j] + row.iter().zip(&s.hidden).map(|(w, v)| w * v).sum::<f64>();
        }
        softmax_into(&s.logits, &mut s.probs);
    }

    pub fn forward(&self, x: &[f64]) -> Result<Forward> {
        self.check_dim(x)?;
        let mut s = self.scratch();
        self.forward_into(x, &mut s);
        Ok(Forward { hidden: s.hidden, logits: s.logits, probs: s.probs })
    }

    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        Ok(argmax(&self.forward(x)?.logits))
    }

    /// Per-sample loss.
    pub fn loss(&self, sample: &Sample) -> Result<f64> {
        self.check_sample(sample)?;
        let mut s = self.scratch();
        self.forward_into(&sample.features, &mut s);
        Ok(cross_entropy_from_logits(&s.logits, sample.label))
    }

    /// Average loss over a non-empty set.
    pub fn mean_loss<'a, I>(&self, samples: I) -> Result<f64>
    where
        I: IntoIterator<Item = &'a Sample>,
    {
        let samples: Vec<&Sample> = samples.into_iter().collect();
        if samples.is_empty() {
            return Err(Error::Empty("loss samples"));
        }
        for s in &samples {
            self.check_sample(s)?;
        }
        let partial: Vec<f64> = samples
            .par_chunks(CHUNK)
            .map(|chunk| {
                let mut s = self.scratch();
                chunk
                    .iter()
                    .map(|x| {
                        self.forward_into(&x.features, &mut s);
                        cross_entropy_from_logits(&s.logits, x.label)
                    })
                    .sum::<f64>()
            })
            .collect();
        Ok(partial.iter().sum::<f64>() / samples.len() as f64)
    }

    /// `(y_hat - y, (y_hat - y) x hidden)` for one sample.
    pub fn last_layer_gradient(&self, sample: &Sample) -> Result<GradientVector> {
        self.check_sample(sample)?;
        let mut g = GradientVector::zeros(self.n_classes, self.hidden);
        let mut s = self.scratch();
        self.add_last_layer_gradient(sample, &mut s, &mut g.values);
        Ok(g)
    }

    fn add_last_layer_gradient(&self, sample: &Sample, s: &mut Scratch, acc: &mut [f64]) {
        let (h, c) = (self.hidden, self.n_classes);
        self.forward_into(&sample.features, s);
        for j in 0..c {
            let r = s.probs[j] - if j == sample.label { 1.0 } else { 0.0 };
            acc[j] += r;
            let row = &mut acc[c + j * h..c + (j + 1) * h];
            for (a, &x) in row.iter_mut().zip(&s.hidden) {
                *a += r * x;
            }
        }
    }

    /// Mean last-layer gradient over a non-empty set. Chunk partial sums are
    /// combined in chunk order, so the result does not depend on thread count.
    pub fn mean_gradient<'a, I>(&self, samples: I) -> Result<GradientVector>
    where
        I: IntoIterator<Item = &'a Sample>,
    {
        let samples: Vec<&Sample> = samples.into_iter().collect();
        if samples.is_empty() {
            return Err(Error::Empty("gradient samples"));
        }
        for s in &samples {
            self.check_sample(s)?;
        }
        let len = self.n_classes * (self.hidden + 1);
        let partial: Vec<Vec<f64>> = samples
            .par_chunks(CHUNK)
            .map(|chunk| {
                let mut acc = vec![0.0; len];
                let mut s = self.scratch();
                for x in chunk {
                    self.add_last_layer_gradient(x, &mut s, &mut acc);
                }
                acc
            })
            .collect();
        let mut values = vec![0.0; len];
        for p in &partial {
            for (v, a) in values.iter_mut().zip(p) {
                *v += a;
            }
        }
        let n = samples.len() as f64;
        values.iter_mut().for_each(|v| *v /= n);
        GradientVector::new(self.n_classes, values)
    }

    /// Full backpropagated gradient of the mean loss, in the flat parameter layout.
    pub fn full_gradient<'a, I>(&self, samples: I) -> Result<Vec<f64>>
    where
        I: IntoIterator<Item = &'a Sample>,
    {
        let samples: Vec<&Sample> = samples.into_iter().collect();
        if samples.is_empty() {
            return Err(Error::Empty("gradient samples"));
        }
        for s in &samples {
            self.check_sample(s)?;
        }
        let partial: Vec<Vec<f64>> = samples
            .par_chunks(CHUNK)
            .map(|chunk| {
                let mut grad = vec![0.0; self.params.len()];
                let mut s = self.scratch();
                for x in chunk {
                    self.backprop(x, &mut s, &mut grad);
                }
                grad
            })
            .collect();
        let mut grad = vec![0.0; self.params.len()];
        for p in &partial {
            for (g, a) in grad.iter_mut().zip(p) {
                *g += a;
            }
        }
        let n = samples.len() as f64;
        grad.iter_mut().for_each(|g| *g /= n);
        Ok(grad)
    }

    fn backprop(&self, sample: &Sample, s: &mut Scratch, grad: &mut [f64]) {
        let (d, h, c) = (self.n_features, self.hidden, self.n_classes);
        let [_, o_b1, o_w2, o_b2] = self.offsets();
        self.forward_into(&sample.features, s);
        for j in 0..c {
            s.dz[j] = s.probs[j] - if j == sample.label { 1.0 } else { 0.0 };
        }
        let w2 = self.w2();
        s.dh.iter_mut().for_each(|v| *v = 0.0);
        for j in 0..c {
            let dz = s.dz[j];
            grad[o_b2 + j] += dz;
            let gw = &mut grad[o_w2 + j * h..o_w2 + (j + 1) * h];
            let row = &w2[j * h..(j + 1) * h];
            for m in 0..h {
                gw[m] += dz * s.hidden[m];
                s.dh[m] += dz * row[m];
            }
        }
        let x = &sample.features;
        for m in 0..h {
            if s.hidden[m] <= 0.0 {
                continue;
            }
            let dh = s.dh[m];
            grad[o_b1 + m] += dh;
            let gw = &mut grad[m * d..(m + 1) * d];
            for (g, &v) in gw.iter_mut().zip(x) {
                *g += dh * v;
            }
        }
    }

    /// One plain gradient-descent step on the mean loss of `samples`.
    pub fn sgd_step<'a, I>(&mut self, samples: I, learning_rate: f64) -> Result<()>
    where
        I: IntoIterator<Item = &'a Sample>,
    {
        let grad = self.full_gradient(samples)?;
        check_finite(&grad)?;
        for (p, g) in self.params.iter_mut().zip(&grad) {
            *p -= learning_rate * g;
        }
        Ok(())
    }

    pub fn evaluate<'a, I>(&self, samples: I) -> Result<Metrics>
    where
        I: IntoIterator<Item = &'a Sample>,
    {
        let mut predicted = Vec::new();
        let mut truth = Vec::new();
        for s in samples {
            predicted.push(self.predict(&s.features)?);
            truth.push(s.label);
        }
        classification_metrics(&predicted, &truth, self.n_classes)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&Checkpoint { version: CHECKPOINT_VERSION, model: self.clone() })?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_str(s)?;
        if ck.version != CHECKPOINT_VERSION {
            return Err(Error::Version { expected: CHECKPOINT_VERSION, found: ck.version });
        }
        let m = ck.model;
        Self::from_params(m.n_features, m.hidden, m.n_classes, m.params)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

pub(crate) fn check_finite(grad: &[f64]) -> Result<()> {
    match grad.iter().position(|g| !g.is_finite()) {
        Some(i) => Err(Error::Diverged(format!("non-finite gradient at parameter {i}"))),
        None => Ok(()),
    }
}

/// First index of the largest value.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}
