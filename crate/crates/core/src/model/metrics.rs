// SPDX-License-Identifier: MIT OR Apache-2.0

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    /// Positive-class (label 1) F1 for binary tasks, macro F1 otherwise.
    pub f1: f64,
}

/// Accuracy and F1 of `predicted` against `truth`.
///
/// A class that never occurs in either vector has an undefined F1; for binary
/// tasks that case counts as 1.0 (nothing to find, nothing found), and for
/// macro F1 such classes are left out of the average.
pub fn classification_metrics(predicted: &[usize], truth: &[usize], n_classes: usize) -> Result<Metrics> {
    if predicted.is_empty() {
        return Err(Error::Empty("evaluation set"));
    }
    if predicted.len() != truth.len() {
        return Err(Error::DimensionMismatch { expected: truth.len(), got: predicted.len() });
    }
    let correct = predicted.iter().zip(truth).filter(|(p, t)| p == t).count();
    let accuracy = correct as f64 / truth.len() as f64;
    let class_f1 = |k: usize| -> Option<f64> {
        let mut tp = 0;
        let mut fp = 0;
        let mut fn_ = 0;
        for (&p, &t) in predicted.iter().zip(truth) {
            match (p == k, t == k) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fn_ += 1,
                _ => {}
            }
        }
        let denom = 2 * tp + fp + fn_;
        (denom > 0).then(|| 2.0 * tp as f64 / denom as f64)
    };
    let f1 = if n_classes == 2 {
        class_f1(1).unwrap_or(1.0)
    } else {
        let scores: Vec<f64> = (0..n_classes).filter_map(class_f1).collect();
        scores.iter().sum::<f64>() / scores.len() as f64
    };
    Ok(Metrics { accuracy, f1 })
}
