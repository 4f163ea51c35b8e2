// SPDX-License-Identifier: MIT OR Apache-2.0

use serde::{Deserialize, Serialize};

use super::{Batch, Sample, SegmentedStream};
use crate::error::{Error, Result};

/// Chronological train / validation / test fractions of the current segment.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self { train: 0.6, validation: 0.2, test: 0.2 }
    }
}

impl SplitRatios {
    pub fn new(train: f64, validation: f64, test: f64) -> Self {
        Self { train, validation, test }
    }

    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.validation, self.test];
        if parts.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return Err(Error::InvalidConfig(format!("split ratios must all be positive, got {parts:?}")));
        }
        if (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidConfig(format!("split ratios must sum to 1, got {parts:?}")));
        }
        Ok(())
    }
}

/// The current segment, split in time order.
#[derive(Clone, Debug, PartialEq)]
pub struct CurrentSplit {
    /// Re-batched at the stream's batch size; ids start at the segment's first
    /// batch id, so they stay disjoint from older segments.
    pub train: Vec<Batch>,
    pub validation: Vec<Sample>,
    pub test: Vec<Sample>,
}

impl CurrentSplit {
    pub fn train_samples(&self) -> impl Iterator<Item = &Sample> + '_ {
        self.train.iter().flat_map(|b| b.samples.iter())
    }

    pub fn train_len(&self) -> usize {
        self.train.iter().map(Batch::len).sum()
    }
}

pub fn split_current_segment(stream: &SegmentedStream, ratios: SplitRatios) -> Result<CurrentSplit> {
    ratios.validate()?;
    let segment = stream.current_segment();
    let samples: Vec<Sample> = segment.samples().cloned().collect();
    let n = samples.len();
    let n_train = (n as f64 * ratios.train).round() as usize;
    let n_val = (n as f64 * ratios.validation).round() as usize;
    if n_train == 0 || n_val == 0 || n_train + n_val >= n {
        return Err(Error::InvalidConfig(format!(
            "current segment of {n} samples is too small for split {ratios:?}"
        )));
    }
    let first_id = segment.batches.first().map_or(0, |b| b.batch_id);
    let mut rest = samples.into_iter();
    let train = rest
        .by_ref()
        .take(n_train)
        .collect::<Vec<_>>()
        .chunks(stream.spec.batch_size)
        .enumerate()
        .map(|(i, chunk)| Batch { batch_id: first_id + i, samples: chunk.to_vec() })
        .collect();
    let validation = rest.by_ref().take(n_val).collect();
    let test = rest.collect();
    Ok(CurrentSplit { train, validation, test })
}
