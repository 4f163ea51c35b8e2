// SPDX-License-Identifier: MIT OR Apache-2.0

use serde::Serialize;

use super::{Method, MetricsRow};
use crate::error::{Error, Result};

/// Mean and sample standard deviation per (dataset, method) over the
/// non-failed seeds.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SummaryRow {
    pub dataset: String,
    pub method: Method,
    pub runs: usize,
    pub failed: usize,
    pub accuracy_mean: f64,
    pub accuracy_sd: f64,
    pub f1_mean: f64,
    pub f1_sd: f64,
    pub rf_time_s_mean: f64,
    pub rf_time_s_sd: f64,
    pub model_time_s_mean: f64,
    pub model_time_s_sd: f64,
    pub total_time_s_mean: f64,
    pub total_time_s_sd: f64,
    pub data_used_mean: f64,
    pub data_used_sd: f64,
    /// Highest mean accuracy on its dataset.
    pub best: bool,
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    match values.len() {
        0 => (f64::NAN, f64::NAN),
        1 => (values[0], 0.0),
        n => {
            let mean = values.iter().sum::<f64>() / n as f64;
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (mean, var.sqrt())
        }
    }
}

/// Groups keep first-appearance order.
pub fn summarize(rows: &[MetricsRow]) -> Result<Vec<SummaryRow>> {
    if rows.is_empty() {
        return Err(Error::Empty("metrics rows"));
    }
    let mut keys: Vec<(String, Method)> = Vec::new();
    for r in rows {
        let key = (r.dataset.clone(), r.method);
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    let mut out: Vec<SummaryRow> = keys
        .into_iter()
        .map(|(dataset, method)| {
            let group: Vec<&MetricsRow> = rows.iter().filter(|r| r.dataset == dataset && r.method == method).collect();
            let ok: Vec<&MetricsRow> = group.iter().copied().filter(|r| !r.failed()).collect();
            let col = |f: fn(&MetricsRow) -> f64| mean_sd(&ok.iter().map(|r| f(r)).collect::<Vec<_>>());
            let (accuracy_mean, accuracy_sd) = col(|r| r.accuracy);
            let (f1_mean, f1_sd) = col(|r| r.f1);
            let (rf_time_s_mean, rf_time_s_sd) = col(|r| r.rf_time_s);
            let (model_time_s_mean, model_time_s_sd) = col(|r| r.model_time_s);
            let (total_time_s_mean, total_time_s_sd) = col(|r| r.total_time_s);
            let (data_used_mean, data_used_sd) = col(|r| r.data_used);
            SummaryRow {
                dataset,
                method,
                runs: ok.len(),
                failed: group.len() - ok.len(),
                accuracy_mean,
                accuracy_sd,
                f1_mean,
                f1_sd,
                rf_time_s_mean,
                rf_time_s_sd,
                model_time_s_mean,
                model_time_s_sd,
                total_time_s_mean,
                total_time_s_sd,
                data_used_mean,
                data_used_sd,
                best: false,
            }
        })
        .collect();
    let datasets: Vec<String> = out.iter().map(|s| s.dataset.clone()).collect();
    for d in datasets {
        let best = out
            .iter()
            .enumerate()
            .filter(|(_, s)| s.dataset == d && !s.accuracy_mean.is_nan())
            .max_by(|a, b| a.1.accuracy_mean.total_cmp(&b.1.accuracy_mean).then(b.0.cmp(&a.0)))
            .map(|(i, _)| i);
        if let Some(i) = best {
            out[i].best = true;
        }
    }
    Ok(out)
}

pub fn write_summary<W: std::io::Write>(rows: &[SummaryRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
