// SPDX-License-Identifier: MIT OR Apache-2.0

//! Gradient-based segment filtering combined with forest-ranked batch selection.
//!
//! Every epoch, each historical segment is scored against the validation set
//! with the current model's last-layer gradients:
//!
//! * gain `G = E[g_segment] . E[g_validation]`
//! * disparity `D = ||E[g_segment] - E[g_validation]||`
//!
//! A segment survives iff `G > 0` and `D < T_d`; the current segment always
//! survives. Each validation sample then walks its forest ranking and keeps
//! the first batch owned by a surviving segment. The union of those batches
//! and the current segment's training batches is what the epoch trains on.

mod trace;

use std::collections::{HashMap, HashSet};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::datagen::{Batch, CurrentSplit, Sample, Segment, SegmentedStream};
use crate::error::{Error, Result};
use crate::forest::{train_forest, BatchRanking, ForestConfig, RandomForestIndex};
use crate::model::{train_with_plan, EpochPlan, GradientVector, MlpClassifier, TrainConfig};

pub use trace::{read_trace, verify_trace, write_trace, EpochTrace};

/// Gain: plain dot product of two mean gradients.
pub fn gain_score(segment: &GradientVector, validation: &GradientVector) -> Result<f64> {
    segment.dot(validation)
}

/// Disparity: Euclidean distance between two mean gradients.
pub fn disparity_score(segment: &GradientVector, validation: &GradientVector) -> Result<f64> {
    segment.distance(validation)
}

/// The selection rule. Both inequalities are strict.
pub fn passes(gain: f64, disparity: f64, threshold: f64) -> bool {
    gain > 0.0 && disparity < threshold
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentScore {
    pub segment_id: usize,
    pub gain: f64,
    pub disparity: f64,
    pub selected: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SegmentSelection {
    /// Surviving segment ids in time order; the current segment is last.
    pub selected: Vec<usize>,
    pub scores: Vec<SegmentScore>,
}

/// Score every previous segment against the validation gradient under `model`.
pub fn select_segments(
    model: &MlpClassifier,
    previous: &[Segment],
    current_segment_id: usize,
    validation: &[Sample],
    threshold: f64,
) -> Result<SegmentSelection> {
    if validation.is_empty() {
        return Err(Error::Empty("validation set"));
    }
    let g_val = model.mean_gradient(validation)?;
    let mut scores = Vec::with_capacity(previous.len());
    let mut selected = Vec::new();
    for segment in previous {
        let g = model.mean_gradient(segment.samples())?;
        let gain = gain_score(&g, &g_val)?;
        let disparity = disparity_score(&g, &g_val)?;
        let keep = passes(gain, disparity, threshold);
        if keep {
            selected.push(segment.segment_id);
        }
        scores.push(SegmentScore { segment_id: segment.segment_id, gain, disparity, selected: keep });
    }
    selected.push(current_segment_id);
    Ok(SegmentSelection { selected, scores })
}

/// Best batches in first-insertion order, with how many validation samples
/// picked each one.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct BestBatches {
    pub batches: Vec<usize>,
    pub votes: Vec<usize>,
}

impl BestBatches {
    fn add(&mut self, batch: usize) {
        match self.batches.iter().position(|&b| b == batch) {
            Some(i) => self.votes[i] += 1,
            None => {
                self.batches.push(batch);
                self.votes.push(1);
            }
        }
    }

    /// Keep the `ceil(fraction * len)` most-voted batches (at least one);
    /// ties keep insertion order.
    pub fn truncate_to_fraction(&mut self, fraction: f64) {
        let keep = ((fraction * self.batches.len() as f64).ceil() as usize).clamp(1, self.batches.len().max(1));
        if keep >= self.batches.len() {
            return;
        }
        let mut idx: Vec<usize> = (0..self.batches.len()).collect();
        idx.sort_by(|&a, &b| self.votes[b].cmp(&self.votes[a]).then(a.cmp(&b)));
        idx.truncate(keep);
        idx.sort_unstable();
        self.batches = idx.iter().map(|&i| self.batches[i]).collect();
        self.votes = idx.iter().map(|&i| self.votes[i]).collect();
    }
}

/// Ranking of every validation sample against the forest.
pub fn rank_validation(index: &RandomForestIndex, validation: &[Sample]) -> Result<Vec<BatchRanking>> {
    validation.iter().map(|v| index.rank_batches(&v.features)).collect()
}

/// For each ranking, keep the first batch whose segment is selected. A ranking
/// that never hits falls back to `fallback` (the current segment's batches).
pub fn select_best_batches(
    rankings: &[BatchRanking],
    batch_segment: &HashMap<usize, usize>,
    selected_segments: &HashSet<usize>,
    fallback: &[usize],
) -> BestBatches {
    let mut best = BestBatches::default();
    for ranking in rankings {
        let hit = ranking
            .order
            .iter()
            .find(|b| batch_segment.get(b).is_some_and(|s| selected_segments.contains(s)));
        match hit {
            Some(&b) => best.add(b),
            None => fallback.iter().for_each(|&b| best.add(b)),
        }
    }
    best
}

/// How the disparity threshold is chosen.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdSearch {
    /// Use `disparity_threshold` as is.
    Fixed,
    /// Try each listed value.
    Grid(Vec<f64>),
    /// `n` evenly spaced points strictly inside (0, 2).
    Even(usize),
}

impl ThresholdSearch {
    pub fn candidates(&self, fixed: f64) -> Vec<f64> {
        match self {
            ThresholdSearch::Fixed => vec![fixed],
            ThresholdSearch::Grid(v) => v.clone(),
            ThresholdSearch::Even(n) => (1..=*n).map(|k| 2.0 * k as f64 / (*n + 1) as f64).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SelectionConfig {
    pub disparity_threshold: f64,
    pub threshold_search: ThresholdSearch,
    /// Gain/disparity filtering of previous segments. Off: every segment survives.
    pub segment_filter: bool,
    /// Forest-ranked batch choice. Off: every batch of every surviving segment is used.
    pub batch_ranking: bool,
    /// Keep only this fraction of the best batches (most-voted first).
    pub batch_budget: Option<f64>,
    pub train: TrainConfig,
    pub forest: ForestConfig,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self {
            disparity_threshold: 1.0,
            threshold_search: ThresholdSearch::Fixed,
            segment_filter: true,
            batch_ranking: true,
            batch_budget: None,
            train: TrainConfig::default(),
            forest: ForestConfig::default(),
        }
    }
}

impl SelectionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.disparity_threshold > 0.0) {
            return Err(Error::InvalidConfig("disparity threshold must be > 0".into()));
        }
        if let Some(f) = self.batch_budget {
            if !(f > 0.0 && f <= 1.0) {
                return Err(Error::InvalidConfig(format!("batch budget {f} outside (0, 1]")));
            }
        }
        if let ThresholdSearch::Grid(v) = &self.threshold_search {
            if v.iter().any(|t| !(*t > 0.0)) {
                return Err(Error::InvalidConfig("grid thresholds must be > 0".into()));
            }
        }
        self.train.validate()?;
        if self.batch_ranking {
            self.forest.validate()?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct SelectionOutcome {
    pub threshold: f64,
    /// Surviving segments in the best epoch.
    pub selected_segments: Vec<usize>,
    /// Best batches of the best epoch (before the current batches are added).
    pub best_batches: Vec<usize>,
    /// Every batch the best epoch trained on.
    pub training_batches: Vec<usize>,
    pub data_used_fraction: f64,
    pub model: MlpClassifier,
    pub trace: Vec<EpochTrace>,
    pub best_epoch: usize,
    pub epochs_run: usize,
    pub best_val_loss: f64,
    pub forest_time: Duration,
    pub train_time: Duration,
}

/// Share of the full-data training pool (all previous segments plus the
/// current training split) covered by `used` batch ids. The current training
/// split always counts as used, and each batch counts once.
pub fn data_used_fraction(used: &[usize], previous: &[Segment], split: &CurrentSplit) -> f64 {
    let prev_sizes: HashMap<usize, usize> =
        previous.iter().flat_map(|s| s.batches.iter().map(|b| (b.batch_id, b.len()))).collect();
    let current: HashSet<usize> = split.train.iter().map(|b| b.batch_id).collect();
    let distinct: HashSet<usize> = used.iter().copied().collect();
    let from_prev: usize = distinct.iter().filter(|b| !current.contains(b)).filter_map(|b| prev_sizes.get(b)).sum();
    let total: usize = prev_sizes.values().sum::<usize>() + split.train_len();
    (from_prev + split.train_len()) as f64 / total as f64
}

pub fn compute_data_used(outcome: &SelectionOutcome, stream: &SegmentedStream, split: &CurrentSplit) -> f64 {
    data_used_fraction(&outcome.training_batches, stream.previous_segments(), split)
}

/// Everything about a run that does not depend on the threshold: the batch
/// pool, the forest and the validation rankings. Build once, run per threshold.
pub struct SelectionContext<'a> {
    previous: &'a [Segment],
    split: &'a CurrentSplit,
    current_segment_id: usize,
    n_features: usize,
    n_classes: usize,
    batches: HashMap<usize, &'a Batch>,
    batch_segment: HashMap<usize, usize>,
    rankings: Option<Vec<BatchRanking>>,
    pub forest_time: Duration,
}

impl<'a> SelectionContext<'a> {
    pub fn build(stream: &'a SegmentedStream, split: &'a CurrentSplit, config: &SelectionConfig) -> Result<Self> {
        Self::from_parts(
            stream.previous_segments(),
            split,
            stream.current,
            stream.n_features(),
            stream.n_classes(),
            config,
        )
    }

    pub fn from_parts(
        previous: &'a [Segment],
        split: &'a CurrentSplit,
        current_segment_id: usize,
        n_features: usize,
        n_classes: usize,
        config: &SelectionConfig,
    ) -> Result<Self> {
        config.validate()?;
        if split.train.is_empty() {
            return Err(Error::Empty("current training split"));
        }
        if split.validation.is_empty() {
            return Err(Error::Empty("validation set"));
        }
        let mut batches = HashMap::new();
        let mut batch_segment = HashMap::new();
        let mut ordered: Vec<&Batch> = Vec::new();
        for seg in previous {
            for b in &seg.batches {
                batches.insert(b.batch_id, b);
                batch_segment.insert(b.batch_id, seg.segment_id);
                ordered.push(b);
            }
        }
        for b in &split.train {
            if batches.insert(b.batch_id, b).is_some() {
                return Err(Error::InvalidConfig(format!("batch id {} appears twice", b.batch_id)));
            }
            batch_segment.insert(b.batch_id, current_segment_id);
            ordered.push(b);
        }
        let started = Instant::now();
        let rankings = if config.batch_ranking {
            let index = train_forest(&ordered, &config.forest)?;
            Some(rank_validation(&index, &split.validation)?)
        } else {
            None
        };
        let forest_time = started.elapsed();
        Ok(Self {
            previous,
            split,
            current_segment_id,
            n_features,
            n_classes,
            batches,
            batch_segment,
            rankings,
            forest_time,
        })
    }

    pub fn batch_segment(&self) -> &HashMap<usize, usize> {
        &self.batch_segment
    }

    fn current_batch_ids(&self) -> Vec<usize> {
        self.split.train.iter().map(|b| b.batch_id).collect()
    }

    /// Segment survivors for one epoch.
    fn epoch_segments(&self, model: &MlpClassifier, config: &SelectionConfig, threshold: f64) -> Result<SegmentSelection> {
        if config.segment_filter {
            select_segments(model, self.previous, self.current_segment_id, &self.split.validation, threshold)
        } else {
            let mut selected: Vec<usize> = self.previous.iter().map(|s| s.segment_id).collect();
            selected.push(self.current_segment_id);
            Ok(SegmentSelection { selected, scores: Vec::new() })
        }
    }

    fn epoch_batches(&self, selected: &[usize], config: &SelectionConfig) -> BestBatches {
        let current = self.current_batch_ids();
        let mut best = match &self.rankings {
            Some(rankings) => {
                let set: HashSet<usize> = selected.iter().copied().collect();
                select_best_batches(rankings, &self.batch_segment, &set, &current)
            }
            None => {
                let set: HashSet<usize> = selected.iter().copied().collect();
                let mut all = BestBatches::default();
                for seg in self.previous.iter().filter(|s| set.contains(&s.segment_id)) {
                    seg.batches.iter().for_each(|b| all.add(b.batch_id));
                }
                current.iter().for_each(|&b| all.add(b));
                all
            }
        };
        if let Some(f) = config.batch_budget {
            best.truncate_to_fraction(f);
        }
        best
    }

    /// Run the selection training loop at a given threshold.
    pub fn run(&self, config: &SelectionConfig, threshold: f64) -> Result<SelectionOutcome> {
        if !(threshold > 0.0) {
            return Err(Error::InvalidConfig("disparity threshold must be > 0".into()));
        }
        let started = Instant::now();
        let model = config.train.init_model(self.n_features, self.n_classes)?;
        let current = self.current_batch_ids();
        let mut trace: Vec<EpochTrace> = Vec::new();
        let out = train_with_plan(model, &self.split.validation, &config.train, |epoch, model| {
            let selection = self.epoch_segments(model, config, threshold)?;
            let best = self.epoch_batches(&selection.selected, config);
            let mut training = best.batches.clone();
            for &b in &current {
                if !training.contains(&b) {
                    training.push(b);
                }
            }
            let batches: Vec<&Batch> = training.iter().map(|id| self.batches[id]).collect();
            trace.push(EpochTrace {
                epoch,
                threshold,
                scores: selection.scores,
                selected_segments: selection.selected.clone(),
                best_batches: best.batches.clone(),
                n_training_batches: batches.len(),
                val_loss: f64::NAN,
            });
            Ok(EpochPlan { batches, info: (selection.selected, best.batches, training) })
        })?;
        for (t, loss) in trace.iter_mut().zip(&out.val_losses) {
            t.val_loss = *loss;
        }
        let (selected_segments, best_batches, training_batches) = out.best_info;
        let data_used_fraction = data_used_fraction(&training_batches, self.previous, self.split);
        Ok(SelectionOutcome {
            threshold,
            selected_segments,
            best_batches,
            training_batches,
            data_used_fraction,
            model: out.model,
            trace,
            best_epoch: out.best_epoch,
            epochs_run: out.epochs_run,
            best_val_loss: out.best_val_loss,
            forest_time: self.forest_time,
            train_time: started.elapsed(),
        })
    }

    /// Check every epoch of `outcome` against the selection invariants.
    pub fn verify(&self, outcome: &SelectionOutcome) -> std::result::Result<(), String> {
        verify_trace(&outcome.trace, self.current_segment_id, &self.batch_segment)
    }

    /// Validation accuracy of one candidate threshold.
    fn score_threshold(&self, config: &SelectionConfig, threshold: f64) -> Result<(f64, SelectionOutcome)> {
        let outcome = self.run(config, threshold)?;
        let acc = outcome.model.evaluate(&self.split.validation)?.accuracy;
        Ok((acc, outcome))
    }

    /// Pick the candidate with the best validation accuracy; ties go to the
    /// smaller threshold.
    pub fn tune_threshold(&self, config: &SelectionConfig, candidates: &[f64]) -> Result<ThresholdTuning> {
        if candidates.is_empty() {
            return Err(Error::Empty("threshold grid"));
        }
        let mut sorted = candidates.to_vec();
        sorted.sort_by(f64::total_cmp);
        sorted.dedup();
        let mut scores = Vec::with_capacity(sorted.len());
        let mut best: Option<(f64, SelectionOutcome)> = None;
        for &t in &sorted {
            let (acc, outcome) = self.score_threshold(config, t)?;
            scores.push((t, acc));
            if best.as_ref().is_none_or(|(a, _)| acc > *a) {
                best = Some((acc, outcome));
            }
        }
        let (_, outcome) = best.expect("non-empty grid");
        Ok(ThresholdTuning { threshold: outcome.threshold, scores, outcome })
    }
}

#[derive(Clone, Debug)]
pub struct ThresholdTuning {
    pub threshold: f64,
    /// `(threshold, validation accuracy)` in ascending threshold order.
    pub scores: Vec<(f64, f64)>,
    /// Outcome of the winning threshold.
    pub outcome: SelectionOutcome,
}

/// Build the forest, then train with per-epoch selection at `config.disparity_threshold`.
pub fn run_selection_training(
    stream: &SegmentedStream,
    split: &CurrentSplit,
    config: &SelectionConfig,
) -> Result<SelectionOutcome> {
    let ctx = SelectionContext::build(stream, split, config)?;
    ctx.run(config, config.disparity_threshold)
}

/// Search the configured threshold candidates and return the winner.
pub fn tune_disparity_threshold(stream: &SegmentedStream, split: &CurrentSplit, config: &SelectionConfig) -> Result<f64> {
    let ctx = SelectionContext::build(stream, split, config)?;
    let candidates = config.threshold_search.candidates(config.disparity_threshold);
    Ok(ctx.tune_threshold(config, &candidates)?.threshold)
}
