// SPDX-License-Identifier: MIT OR Apache-2.0

//! Experiment harness: methods x seeds on one dataset, metric rows, the
//! data-budget sweep and per-method summaries.

mod summary;

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::datagen::{generate, load_csv, split_current_segment, CurrentSplit, SegmentedStream, SplitRatios, StreamSpec};
use crate::error::{Error, Result};
use crate::model::{train, Metrics};
use crate::selection::{data_used_fraction, EpochTrace, SelectionConfig, SelectionContext, SelectionOutcome, ThresholdSearch};

pub use summary::{summarize, write_summary, SummaryRow};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Every batch of every segment, no selection.
    FullData,
    /// The current segment's training split only.
    CurrentSegment,
    /// Forest-ranked batches over all segments, no segment filter.
    Alg1Only,
    /// Segment filter plus forest-ranked batches.
    Ours,
    /// Segment filter only; every batch of a surviving segment is used.
    QuiltLike,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::FullData, Method::CurrentSegment, Method::Alg1Only, Method::Ours, Method::QuiltLike];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::FullData => "full_data",
            Method::CurrentSegment => "current_segment",
            Method::Alg1Only => "alg1_only",
            Method::Ours => "ours",
            Method::QuiltLike => "quilt_like",
        }
    }

    /// Selection switches for the methods that go through the selection loop.
    fn selection_flags(self) -> Option<(bool, bool)> {
        match self {
            Method::Alg1Only => Some((false, true)),
            Method::Ours => Some((true, true)),
            Method::QuiltLike => Some((true, false)),
            Method::FullData | Method::CurrentSegment => None,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown method `{s}`")))
    }
}

/// Where the stream comes from: a named preset, an explicit spec, or a CSV
/// file shaped by either of those.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetConfig {
    pub name: Option<String>,
    pub spec: Option<StreamSpec>,
    pub csv: Option<PathBuf>,
    pub label_column: String,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self { name: None, spec: None, csv: None, label_column: "label".into() }
    }
}

impl DatasetConfig {
    pub fn preset(name: &str) -> Self {
        Self { name: Some(name.into()), ..Self::default() }
    }

    pub fn from_spec(spec: StreamSpec) -> Self {
        Self { spec: Some(spec), ..Self::default() }
    }

    /// Spec for one seed. An explicit spec wins over the preset name.
    pub fn resolve(&self, seed: u64) -> Result<StreamSpec> {
        let mut spec = match (&self.spec, &self.name) {
            (Some(spec), _) => spec.clone(),
            (None, Some(name)) => StreamSpec::preset(name, seed)?,
            (None, None) => return Err(Error::InvalidConfig("dataset needs a name or a spec".into())),
        };
        spec.seed = seed;
        Ok(spec)
    }

    pub fn label(&self) -> String {
        match (&self.spec, &self.name) {
            (Some(spec), _) => spec.name.clone(),
            (None, Some(name)) => name.clone(),
            (None, None) => "unnamed".into(),
        }
    }

    pub fn build(&self, seed: u64, strict: bool) -> Result<SegmentedStream> {
        let spec = self.resolve(seed)?;
        if strict {
            spec.validate_strict()?;
        }
        match &self.csv {
            Some(path) => load_csv(path, &self.label_column, &spec),
            None => generate(&spec),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub dataset: DatasetConfig,
    pub methods: Vec<Method>,
    pub seeds: Vec<u64>,
    pub split: SplitRatios,
    pub selection: SelectionConfig,
    pub out: Option<PathBuf>,
    pub strict_table1: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dataset: DatasetConfig::default(),
            methods: Method::ALL.to_vec(),
            seeds: vec![0, 1, 2],
            split: SplitRatios::default(),
            selection: SelectionConfig::default(),
            out: None,
            strict_table1: false,
        }
    }
}

impl ExperimentConfig {
    pub fn for_dataset(name: &str) -> Self {
        Self { dataset: DatasetConfig::preset(name), ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::InvalidConfig("at least one seed is required".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidConfig("at least one method is required".into()));
        }
        self.split.validate()?;
        self.selection.validate()
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let config: Self = toml::from_str(s)?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    /// Selection config with the run seed applied to training and the forest.
    fn seeded_selection(&self, seed: u64) -> SelectionConfig {
        let mut s = self.selection.clone();
        s.train.seed = seed;
        s.forest.seed = seed;
        s
    }
}

/// One (method, seed) result. Failed runs carry NaN metrics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub dataset: String,
    pub method: Method,
    pub seed: u64,
    pub accuracy: f64,
    pub f1: f64,
    pub rf_time_s: f64,
    pub model_time_s: f64,
    pub total_time_s: f64,
    pub data_used: f64,
}

impl MetricsRow {
    pub fn failed(&self) -> bool {
        self.accuracy.is_nan()
    }
}

pub fn write_rows<W: std::io::Write>(rows: &[MetricsRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rows<R: std::io::Read>(input: R) -> Result<Vec<MetricsRow>> {
    csv::Reader::from_reader(input).deserialize().map(|r| r.map_err(Error::from)).collect()
}

/// What one method produced on one stream.
#[derive(Clone, Debug)]
pub struct MethodResult {
    pub metrics: Metrics,
    pub forest_time: Duration,
    pub model_time: Duration,
    pub total_time: Duration,
    pub data_used: f64,
    /// Present for the selection-based methods.
    pub selection: Option<SelectionOutcome>,
}

fn selection_run(
    ctx: &SelectionContext<'_>,
    config: &SelectionConfig,
) -> Result<SelectionOutcome> {
    let outcome = match &config.threshold_search {
        ThresholdSearch::Fixed => ctx.run(config, config.disparity_threshold)?,
        search => ctx.tune_threshold(config, &search.candidates(config.disparity_threshold))?.outcome,
    };
    ctx.verify(&outcome).map_err(Error::Unsound)?;
    Ok(outcome)
}

/// Train `method` on `stream` and evaluate on the test part of `split`.
/// Selection traces are checked; a violation is an error.
pub fn run_method(
    method: Method,
    stream: &SegmentedStream,
    split: &CurrentSplit,
    config: &SelectionConfig,
) -> Result<MethodResult> {
    let started = Instant::now();
    let previous = stream.previous_segments();
    let (model, forest_time, model_time, data_used, selection) = match method.selection_flags() {
        None => {
            let mut batches: Vec<_> = Vec::new();
            if method == Method::FullData {
                batches.extend(previous.iter().flat_map(|s| s.batches.iter()));
            }
            batches.extend(split.train.iter());
            let t = Instant::now();
            let model = config.train.init_model(stream.n_features(), stream.n_classes())?;
            let out = train(model, &batches, &split.validation, &config.train)?;
            let used: Vec<usize> = batches.iter().map(|b| b.batch_id).collect();
            (out.model, Duration::ZERO, t.elapsed(), data_used_fraction(&used, previous, split), None)
        }
        Some((segment_filter, batch_ranking)) => {
            let mut cfg = config.clone();
            cfg.segment_filter = segment_filter;
            cfg.batch_ranking = batch_ranking;
            let ctx = SelectionContext::build(stream, split, &cfg)?;
            let outcome = selection_run(&ctx, &cfg)?;
            let model_time = started.elapsed().saturating_sub(ctx.forest_time);
            (outcome.model.clone(), ctx.forest_time, model_time, outcome.data_used_fraction, Some(outcome))
        }
    };
    let metrics = model.evaluate(&split.test)?;
    Ok(MethodResult { metrics, forest_time, model_time, total_time: started.elapsed(), data_used, selection })
}

/// One epoch of a selection trace, tagged with its run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub dataset: String,
    pub method: Method,
    pub seed: u64,
    #[serde(flatten)]
    pub epoch: EpochTrace,
}

/// Every configured (seed, method) cell. Divergence becomes a NaN row and the
/// run continues; any other failure aborts.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<MetricsRow>> {
    run_experiment_with(config, |_| Ok(()))
}

/// As [`run_experiment`], handing each selection-trace epoch to `on_trace`.
pub fn run_experiment_with<F>(config: &ExperimentConfig, mut on_trace: F) -> Result<Vec<MetricsRow>>
where
    F: FnMut(TraceRecord) -> Result<()>,
{
    config.validate()?;
    let dataset = config.dataset.label();
    let mut rows = Vec::new();
    for &seed in &config.seeds {
        let stream = config.dataset.build(seed, config.strict_table1)?;
        let split = split_current_segment(&stream, config.split)?;
        let selection = config.seeded_selection(seed);
        for &method in &config.methods {
            let row = match run_method(method, &stream, &split, &selection) {
                Ok(r) => {
                    for epoch in r.selection.iter().flat_map(|o| o.trace.iter()) {
                        on_trace(TraceRecord { dataset: dataset.clone(), method, seed, epoch: epoch.clone() })?;
                    }
                    MetricsRow {
                        dataset: dataset.clone(),
                        method,
                        seed,
                        accuracy: r.metrics.accuracy,
                        f1: r.metrics.f1,
                        rf_time_s: r.forest_time.as_secs_f64(),
                        model_time_s: r.model_time.as_secs_f64(),
                        total_time_s: r.total_time.as_secs_f64(),
                        data_used: r.data_used,
                    }
                }
                Err(Error::Diverged(msg)) => {
                    eprintln!("{dataset}/{method}/seed {seed}: {msg}");
                    MetricsRow {
                        dataset: dataset.clone(),
                        method,
                        seed,
                        accuracy: f64::NAN,
                        f1: f64::NAN,
                        rf_time_s: f64::NAN,
                        model_time_s: f64::NAN,
                        total_time_s: f64::NAN,
                        data_used: f64::NAN,
                    }
                }
                Err(e) => return Err(e),
            };
            rows.push(row);
        }
    }
    Ok(rows)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub fraction: f64,
    /// Mean test accuracy over seeds.
    pub accuracy: f64,
    /// Mean share of the full-data pool actually trained on.
    pub data_used: f64,
}

/// Accuracy against batch budget for the first selection method in the config
/// (`ours` if none is listed). Points come back in ascending fraction order.
pub fn run_tradeoff_sweep(config: &ExperimentConfig, fractions: &[f64]) -> Result<Vec<CurvePoint>> {
    config.validate()?;
    if fractions.is_empty() {
        return Err(Error::Empty("fractions"));
    }
    if let Some(f) = fractions.iter().find(|f| !(**f > 0.0 && **f <= 1.0)) {
        return Err(Error::InvalidConfig(format!("fraction {f} outside (0, 1]")));
    }
    let mut fractions = fractions.to_vec();
    fractions.sort_by(f64::total_cmp);
    fractions.dedup();
    let method = config.methods.iter().copied().find(|m| m.selection_flags().is_some()).unwrap_or(Method::Ours);
    let (segment_filter, batch_ranking) = method.selection_flags().expect("selection method");

    let mut acc = vec![0.0; fractions.len()];
    let mut used = vec![0.0; fractions.len()];
    for &seed in &config.seeds {
        let stream = config.dataset.build(seed, config.strict_table1)?;
        let split = split_current_segment(&stream, config.split)?;
        let mut cfg = config.seeded_selection(seed);
        cfg.segment_filter = segment_filter;
        cfg.batch_ranking = batch_ranking;
        let ctx = SelectionContext::build(&stream, &split, &cfg)?;
        for (i, &f) in fractions.iter().enumerate() {
            cfg.batch_budget = (f < 1.0).then_some(f);
            let outcome = selection_run(&ctx, &cfg)?;
            acc[i] += outcome.model.evaluate(&split.test)?.accuracy;
            used[i] += outcome.data_used_fraction;
        }
    }
    let n = config.seeds.len() as f64;
    Ok(fractions
        .into_iter()
        .enumerate()
        .map(|(i, fraction)| CurvePoint { fraction, accuracy: acc[i] / n, data_used: used[i] / n })
        .collect())
}

pub fn write_curve<W: std::io::Write>(points: &[CurvePoint], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for p in points {
        w.serialize(p)?;
    }
    w.flush()?;
    Ok(())
}
