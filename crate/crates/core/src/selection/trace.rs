// SPDX-License-Identifier: MIT OR Apache-2.0

//! Per-epoch selection trace and its soundness check.

use std::collections::{HashMap, HashSet};
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::passes;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochTrace {
    pub epoch: usize,
    pub threshold: f64,
    /// Empty when segment filtering is off.
    pub scores: Vec<super::SegmentScore>,
    pub selected_segments: Vec<usize>,
    pub best_batches: Vec<usize>,
    pub n_training_batches: usize,
    pub val_loss: f64,
}

/// One JSON object per line.
pub fn write_trace<W: Write>(trace: &[EpochTrace], mut out: W) -> Result<()> {
    for t in trace {
        serde_json::to_writer(&mut out, t)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_trace<R: BufRead>(input: R) -> Result<Vec<EpochTrace>> {
    let mut trace = Vec::new();
    for line in input.lines() {
        let line = line?;
        if !line.trim().is_empty() {
            trace.push(serde_json::from_str(&line).map_err(|e| Error::Serialization(e.to_string()))?);
        }
    }
    Ok(trace)
}

/// Every recorded score obeys the selection rule, the selected set matches
/// the scores, the current segment is always selected, and every best batch
/// belongs to a selected segment.
pub fn verify_trace(
    trace: &[EpochTrace],
    current_segment_id: usize,
    batch_segment: &HashMap<usize, usize>,
) -> std::result::Result<(), String> {
    for t in trace {
        let e = t.epoch;
        let selected: HashSet<usize> = t.selected_segments.iter().copied().collect();
        if !selected.contains(&current_segment_id) {
            return Err(format!("epoch {e}: current segment not selected"));
        }
        for s in &t.scores {
            let rule = passes(s.gain, s.disparity, t.threshold);
            if s.selected != rule {
                return Err(format!(
                    "epoch {e}: segment {} has G={} D={} T_d={} but selected={}",
                    s.segment_id, s.gain, s.disparity, t.threshold, s.selected
                ));
            }
            if s.selected != selected.contains(&s.segment_id) {
                return Err(format!("epoch {e}: segment {} score and selected set disagree", s.segment_id));
            }
        }
        if !t.scores.is_empty() {
            let expected = t.scores.iter().filter(|s| s.selected).count() + 1;
            if selected.len() != expected {
                return Err(format!("epoch {e}: {} selected segments, scores imply {expected}", selected.len()));
            }
        }
        for b in &t.best_batches {
            match batch_segment.get(b) {
                Some(seg) if selected.contains(seg) => {}
                Some(seg) => return Err(format!("epoch {e}: batch {b} from unselected segment {seg}")),
                None => return Err(format!("epoch {e}: unknown batch {b}")),
            }
        }
    }
    Ok(())
}
