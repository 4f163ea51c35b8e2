// SPDX-License-Identifier: MIT OR Apache-2.0

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_finite, MlpClassifier};
use crate::datagen::{Batch, Sample};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Optimizer {
    /// `theta -= lr * grad`
    Sgd,
    Adam { beta1: f64, beta2: f64, epsilon: f64 },
}

impl Optimizer {
    pub fn adam() -> Self {
        Optimizer::Adam { beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub hidden_units: usize,
    pub optimizer: Optimizer,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            max_epochs: 2000,
            patience: 10,
            hidden_units: 256,
            optimizer: Optimizer::adam(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig("learning rate must be positive".into()));
        }
        if self.max_epochs == 0 || self.patience == 0 || self.hidden_units == 0 {
            return Err(Error::InvalidConfig("max_epochs, patience and hidden_units must be >= 1".into()));
        }
        Ok(())
    }

    /// Fresh model for this config.
    pub fn init_model(&self, n_features: usize, n_classes: usize) -> Result<MlpClassifier> {
        MlpClassifier::new(n_features, self.hidden_units, n_classes, self.seed)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopSignal {
    Improved,
    Wait,
    Stop,
}

/// Patience-based early stopping on a loss that should decrease.
#[derive(Clone, Debug)]
pub struct EarlyStopping {
    patience: usize,
    best: f64,
    best_epoch: Option<usize>,
    wait: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        Self { patience, best: f64::INFINITY, best_epoch: None, wait: 0 }
    }

    pub fn observe(&mut self, epoch: usize, loss: f64) -> StopSignal {
        if loss < self.best {
            self.best = loss;
            self.best_epoch = Some(epoch);
            self.wait = 0;
            return StopSignal::Improved;
        }
        self.wait += 1;
        if self.wait >= self.patience {
            StopSignal::Stop
        } else {
            StopSignal::Wait
        }
    }

    pub fn best(&self) -> Option<(usize, f64)> {
        self.best_epoch.map(|e| (e, self.best))
    }
}

enum OptState {
    Sgd,
    Adam { m: Vec<f64>, v: Vec<f64>, t: i32, beta1: f64, beta2: f64, epsilon: f64 },
}

impl OptState {
    fn new(opt: Optimizer, n: usize) -> Self {
        match opt {
            Optimizer::Sgd => OptState::Sgd,
            Optimizer::Adam { beta1, beta2, epsilon } => {
                OptState::Adam { m: vec![0.0; n], v: vec![0.0; n], t: 0, beta1, beta2, epsilon }
            }
        }
    }

    fn step(&mut self, model: &mut MlpClassifier, samples: &[Sample], lr: f64) -> Result<()> {
        match self {
            OptState::Sgd => model.sgd_step(samples, lr),
            OptState::Adam { m, v, t, beta1, beta2, epsilon } => {
                let grad = model.full_gradient(samples)?;
                check_finite(&grad)?;
                *t += 1;
                let c1 = 1.0 - beta1.powi(*t);
                let c2 = 1.0 - beta2.powi(*t);
                for (i, p) in model.params_mut().iter_mut().enumerate() {
                    m[i] = *beta1 * m[i] + (1.0 - *beta1) * grad[i];
                    v[i] = *beta2 * v[i] + (1.0 - *beta2) * grad[i] * grad[i];
                    *p -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + *epsilon);
                }
                Ok(())
            }
        }
    }
}

/// What to train on in one epoch, plus caller data kept if the epoch turns
/// out to be the best one.
pub struct EpochPlan<'a, T> {
    pub batches: Vec<&'a Batch>,
    pub info: T,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome<T> {
    /// Snapshot with the lowest validation loss.
    pub model: MlpClassifier,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub epochs_run: usize,
    /// Validation loss after each epoch.
    pub val_losses: Vec<f64>,
    /// Plan info of the best epoch.
    pub best_info: T,
}

/// Epoch loop shared by every training method.
///
/// Each epoch asks `plan` for its batches, sorts them by id, shuffles that
/// order with a seeded RNG and takes one optimizer step per batch. The
/// validation loss drives early stopping; the best snapshot is returned.
pub fn train_with_plan<'a, T, F>(
    mut model: MlpClassifier,
    validation: &[Sample],
    config: &TrainConfig,
    mut plan: F,
) -> Result<TrainOutcome<T>>
where
    F: FnMut(usize, &MlpClassifier) -> Result<EpochPlan<'a, T>>,
{
    config.validate()?;
    if validation.is_empty() {
        return Err(Error::Empty("validation set"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(1);
    let mut opt = OptState::new(config.optimizer, model.params().len());
    let mut stopper = EarlyStopping::new(config.patience);
    let mut best: Option<(MlpClassifier, T)> = None;
    let mut val_losses = Vec::new();

    for epoch in 1..=config.max_epochs {
        let EpochPlan { mut batches, info } = plan(epoch, &model)?;
        batches.sort_by_key(|b| b.batch_id);
        batches.dedup_by_key(|b| b.batch_id);
        batches.retain(|b| !b.is_empty());
        if batches.is_empty() {
            return Err(Error::Empty("training batches"));
        }
        batches.shuffle(&mut rng);
        for b in &batches {
            opt.step(&mut model, &b.samples, config.learning_rate)?;
        }
        let loss = model.mean_loss(validation)?;
        if !loss.is_finite() {
            return Err(Error::Diverged(format!("validation loss {loss} at epoch {epoch}")));
        }
        val_losses.push(loss);
        match stopper.observe(epoch, loss) {
            StopSignal::Improved => best = Some((model.clone(), info)),
            StopSignal::Wait => {}
            StopSignal::Stop => break,
        }
    }
    let (best_epoch, best_val_loss) = stopper.best().expect("at least one epoch ran");
    let (model, best_info) = best.expect("best snapshot recorded with best epoch");
    Ok(TrainOutcome { model, best_epoch, best_val_loss, epochs_run: val_losses.len(), val_losses, best_info })
}

/// Train on a fixed batch list.
pub fn train(model: MlpClassifier, batches: &[&Batch], validation: &[Sample], config: &TrainConfig) -> Result<TrainOutcome<()>> {
    if batches.is_empty() {
        return Err(Error::Empty("training batches"));
    }
    train_with_plan(model, validation, config, |_, _| Ok(EpochPlan { batches: batches.to_vec(), info: () }))
}
