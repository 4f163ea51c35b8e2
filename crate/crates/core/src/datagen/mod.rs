// SPDX-License-Identifier: MIT OR Apache-2.0

//! Drifting streams: the sample/batch/segment hierarchy, the five synthetic
//! generators, a CSV loader and the chronological split of the current segment.

mod csv_io;
mod generators;
mod split;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use csv_io::{load_csv, write_csv};
pub use generators::{
    covcon_concept, covcon_label, generate, hyperplane_label, sea_label, sine_label, Direction,
};
pub use split::{split_current_segment, CurrentSplit, SplitRatios};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub features: Vec<f64>,
    pub label: usize,
}

impl Sample {
    pub fn new(features: Vec<f64>, label: usize) -> Self {
        Self { features, label }
    }
}

/// A contiguous block of samples; `batch_id` is a global, time-ordered ordinal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Batch {
    pub batch_id: usize,
    pub samples: Vec<Sample>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub segment_id: usize,
    pub batches: Vec<Batch>,
}

impl Segment {
    pub fn samples(&self) -> impl Iterator<Item = &Sample> + '_ {
        self.batches.iter().flat_map(|b| b.samples.iter())
    }

    pub fn len(&self) -> usize {
        self.batches.iter().map(Batch::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorKind {
    Sea,
    RandomRbf,
    Sine,
    Hyperplane,
    Covcon,
    Csv,
}

/// Per-generator constants. Every field has a default, so config files only
/// need to mention what they change.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorParams {
    /// When false the concept (and covariate window) is frozen at segment 0.
    pub drift: bool,
    /// SEA thresholds, cycled across segments.
    pub sea_thresholds: Vec<f64>,
    pub rbf_centroids: usize,
    /// Standard deviation of the Gaussian offset around a centroid.
    pub rbf_sigma: f64,
    /// Fraction of centroid labels reassigned at every segment boundary.
    pub rbf_flip_fraction: f64,
    pub hyperplane_drift_features: usize,
    /// Weight change applied to each drift feature every `hyperplane_interval` samples.
    pub hyperplane_step: f64,
    pub hyperplane_interval: usize,
    pub hyperplane_flip_prob: f64,
    pub covcon_alpha0: f64,
    pub covcon_alpha_step: f64,
    /// Width of the x1 sampling window.
    pub covcon_window: f64,
    /// Per-segment displacement of the x1 window.
    pub covcon_slide: f64,
}

impl Default for GeneratorParams {
    fn default() -> Self {
        Self {
            drift: true,
            sea_thresholds: vec![8.0, 9.0, 7.0, 9.5],
            rbf_centroids: 50,
            rbf_sigma: 0.1,
            rbf_flip_fraction: 0.3,
            hyperplane_drift_features: 2,
            hyperplane_step: 0.1,
            hyperplane_interval: 1000,
            hyperplane_flip_prob: 0.1,
            covcon_alpha0: 0.8,
            covcon_alpha_step: 0.2,
            covcon_window: 0.25,
            covcon_slide: 0.1875,
        }
    }
}

/// Shape and provenance of a stream.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StreamSpec {
    pub name: String,
    pub generator: GeneratorKind,
    pub total_size: usize,
    pub n_features: usize,
    pub n_classes: usize,
    pub num_segments: usize,
    pub batches_per_segment: usize,
    pub batch_size: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub params: GeneratorParams,
}

/// One row of the published dataset-statistics table.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TableRow {
    pub name: &'static str,
    pub generator: GeneratorKind,
    pub total_size: usize,
    pub n_features: usize,
    pub n_classes: usize,
    pub num_segments: usize,
    pub batches_per_segment: usize,
    pub batch_size: usize,
}

const fn row(
    name: &'static str,
    generator: GeneratorKind,
    total_size: usize,
    n_features: usize,
    n_classes: usize,
    num_segments: usize,
    batches_per_segment: usize,
    batch_size: usize,
) -> TableRow {
    TableRow {
        name,
        generator,
        total_size,
        n_features,
        n_classes,
        num_segments,
        batches_per_segment,
        batch_size,
    }
}

use GeneratorKind::*;

/// Standard dataset shapes: size, features, classes, segments, batches per
/// segment and batch size.
pub const DATASET_TABLE: &[TableRow] = &[
    row("sea", Sea, 16_000, 3, 2, 8, 20, 100),
    row("random_rbf", RandomRbf, 16_000, 10, 2, 8, 20, 100),
    row("sine", Sine, 16_000, 4, 2, 8, 20, 100),
    row("hyperplane", Hyperplane, 16_000, 10, 2, 8, 20, 100),
    row("covcon", Covcon, 10_000, 2, 2, 5, 2, 1_000),
    row("covcon_5m", Covcon, 5_000_000, 2, 2, 10, 10, 50_000),
    row("electricity", Csv, 43_200, 6, 2, 10, 20, 216),
    row("weather", Csv, 18_000, 8, 2, 10, 20, 90),
    row("spam", Csv, 9_324, 499, 2, 9, 14, 74),
    row("usenet1", Csv, 1_500, 99, 2, 5, 2, 150),
    row("usenet2", Csv, 1_500, 99, 2, 5, 3, 100),
    row("covertype", Csv, 581_000, 54, 7, 10, 10, 5_810),
];

pub fn table_row(name: &str) -> Option<&'static TableRow> {
    let key = name.to_ascii_lowercase();
    DATASET_TABLE.iter().find(|r| r.name == key)
}

impl StreamSpec {
    /// Spec for a named dataset with its standard shape and default parameters.
    pub fn preset(name: &str, seed: u64) -> Result<Self> {
        let r = table_row(name)
            .ok_or_else(|| Error::InvalidSpec(format!("unknown dataset `{name}`")))?;
        Ok(Self {
            name: r.name.to_string(),
            generator: r.generator,
            total_size: r.total_size,
            n_features: r.n_features,
            n_classes: r.n_classes,
            num_segments: r.num_segments,
            batches_per_segment: r.batches_per_segment,
            batch_size: r.batch_size,
            seed,
            params: GeneratorParams::default(),
        })
    }

    pub fn segment_size(&self) -> usize {
        self.batches_per_segment * self.batch_size
    }

    /// Number of samples the segmented stream actually holds.
    pub fn used_size(&self) -> usize {
        self.num_segments * self.segment_size()
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::InvalidSpec(m));
        if self.num_segments == 0 || self.batches_per_segment == 0 || self.batch_size == 0 {
            return fail("segment count, batches per segment and batch size must be positive".into());
        }
        if self.n_features == 0 {
            return fail("feature count must be positive".into());
        }
        if self.n_classes < 2 {
            return fail("at least two classes are required".into());
        }
        if self.used_size() > self.total_size {
            return fail(format!(
                "{} segments x {} batches x {} samples exceeds total size {}",
                self.num_segments, self.batches_per_segment, self.batch_size, self.total_size
            ));
        }
        let p = &self.params;
        let required_d = match self.generator {
            Sea => Some(3),
            Sine => Some(4),
            Covcon => Some(2),
            RandomRbf | Hyperplane | Csv => None,
        };
        if let Some(d) = required_d {
            if self.n_features != d {
                return fail(format!("{:?} requires {d} features, got {}", self.generator, self.n_features));
            }
        }
        if matches!(self.generator, Sea | Sine | Covcon | Hyperplane) && self.n_classes != 2 {
            return fail(format!("{:?} is a binary generator", self.generator));
        }
        match self.generator {
            Sea if p.sea_thresholds.is_empty() => fail("SEA needs at least one threshold".into()),
            RandomRbf if p.rbf_centroids == 0 => fail("RandomRBF needs at least one centroid".into()),
            RandomRbf if !(0.0..=1.0).contains(&p.rbf_flip_fraction) || p.rbf_sigma < 0.0 => {
                fail("RandomRBF flip fraction must lie in [0, 1] and sigma must be >= 0".into())
            }
            Hyperplane if p.hyperplane_drift_features > self.n_features || p.hyperplane_interval == 0 => {
                fail("hyperplane drift features exceed dimension or interval is zero".into())
            }
            Covcon if !(p.covcon_window > 0.0 && p.covcon_window <= 1.0) => {
                fail("covcon window must lie in (0, 1]".into())
            }
            _ => Ok(()),
        }
    }

    /// Check the shape against the standard row for this dataset name.
    pub fn validate_strict(&self) -> Result<()> {
        self.validate()?;
        let r = table_row(&self.name).ok_or_else(|| {
            Error::InvalidSpec(format!("`{}` has no standard shape to check against", self.name))
        })?;
        let got = (
            self.generator,
            self.total_size,
            self.n_features,
            self.n_classes,
            self.num_segments,
            self.batches_per_segment,
            self.batch_size,
        );
        let want = (
            r.generator,
            r.total_size,
            r.n_features,
            r.n_classes,
            r.num_segments,
            r.batches_per_segment,
            r.batch_size,
        );
        if got != want {
            return Err(Error::InvalidSpec(format!(
                "`{}` does not match its standard shape: got {got:?}, expected {want:?}",
                self.name
            )));
        }
        Ok(())
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        Ok(toml::from_str(s)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }
}

/// A stream cut into segments; `current` is the latest segment.
#[derive(Clone, Debug, PartialEq)]
pub struct SegmentedStream {
    pub spec: StreamSpec,
    pub segments: Vec<Segment>,
    pub current: usize,
}

impl SegmentedStream {
    /// Cut a chronological sample sequence into the spec's segments and batches.
    /// Samples beyond `spec.used_size()` are dropped.
    pub fn from_samples(spec: StreamSpec, samples: Vec<Sample>) -> Result<Self> {
        spec.validate()?;
        if samples.len() < spec.used_size() {
            return Err(Error::InvalidSpec(format!(
                "stream holds {} samples, spec needs {}",
                samples.len(),
                spec.used_size()
            )));
        }
        let mut it = samples.into_iter();
        let mut segments = Vec::with_capacity(spec.num_segments);
        let mut batch_id = 0;
        for segment_id in 0..spec.num_segments {
            let mut batches = Vec::with_capacity(spec.batches_per_segment);
            for _ in 0..spec.batches_per_segment {
                let samples: Vec<Sample> = it.by_ref().take(spec.batch_size).collect();
                batches.push(Batch { batch_id, samples });
                batch_id += 1;
            }
            segments.push(Segment { segment_id, batches });
        }
        let current = spec.num_segments - 1;
        Ok(Self { spec, segments, current })
    }

    pub fn current_segment(&self) -> &Segment {
        &self.segments[self.current]
    }

    pub fn previous_segments(&self) -> &[Segment] {
        &self.segments[..self.current]
    }

    pub fn n_features(&self) -> usize {
        self.spec.n_features
    }

    pub fn n_classes(&self) -> usize {
        self.spec.n_classes
    }

    pub fn samples(&self) -> impl Iterator<Item = &Sample> + '_ {
        self.segments.iter().flat_map(Segment::samples)
    }

    pub fn len(&self) -> usize {
        self.segments.iter().map(Segment::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_match_standard_rows() {
        let sea = StreamSpec::preset("SEA", 42).unwrap();
        assert_eq!(
            (sea.total_size, sea.n_features, sea.n_classes, sea.num_segments, sea.batches_per_segment, sea.batch_size),
            (16_000, 3, 2, 8, 20, 100)
        );
        assert_eq!(sea.segment_size(), 2_000);
        let cov = StreamSpec::preset("covcon", 0).unwrap();
        assert_eq!((cov.num_segments, cov.batches_per_segment, cov.batch_size), (5, 2, 1_000));
        for r in DATASET_TABLE {
            let spec = StreamSpec::preset(r.name, 1).unwrap();
            spec.validate_strict().unwrap();
            assert!(spec.used_size() <= spec.total_size, "{}", r.name);
        }
    }

    #[test]
    fn oversized_spec_is_rejected() {
        let mut spec = StreamSpec::preset("sea", 0).unwrap();
        spec.num_segments = 9;
        assert!(matches!(spec.validate(), Err(Error::InvalidSpec(_))));
    }

    #[test]
    fn strict_mode_catches_custom_shapes() {
        let mut spec = StreamSpec::preset("sine", 0).unwrap();
        spec.total_size = 4_000;
        spec.num_segments = 2;
        spec.validate().unwrap();
        assert!(spec.validate_strict().is_err());
    }

    #[test]
    fn spec_toml_round_trip() {
        let mut spec = StreamSpec::preset("hyperplane", 7).unwrap();
        spec.params.hyperplane_step = 0.0;
        let text = spec.to_toml_string().unwrap();
        assert_eq!(StreamSpec::from_toml_str(&text).unwrap(), spec);
    }

    #[test]
    fn partial_params_take_defaults() {
        let text = r#"
            name = "sea"
            generator = "sea"
            total_size = 16000
            n_features = 3
            n_classes = 2
            num_segments = 8
            batches_per_segment = 20
            batch_size = 100
            [params]
            drift = false
        "#;
        let spec = StreamSpec::from_toml_str(text).unwrap();
        assert!(!spec.params.drift);
        assert_eq!(spec.params.sea_thresholds, vec![8.0, 9.0, 7.0, 9.5]);
        assert_eq!(spec.seed, 0);
    }
}
