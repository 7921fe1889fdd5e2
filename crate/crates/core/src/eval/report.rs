use std::fmt::Write as _;

use super::bootstrap::{bootstrap_indices, BootstrapEstimate};
use super::metrics::{average_precision, correlation, mae, rmse, roc_auc};
use crate::error::{Error, Result};
use crate::model::Task;
use crate::sequence::Label;

#[derive(Debug, Clone, PartialEq)]
pub struct MetricEntry {
    pub name: String,
    pub value: f64,
    pub bootstrap: BootstrapEstimate,
}

/// Metric values with bootstrap uncertainty, plus free-form annotations
/// (probe parameters and results).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EvalReport {
    pub metrics: Vec<MetricEntry>,
    pub annotations: Vec<(String, String)>,
}

impl EvalReport {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.metrics.iter().find(|m| m.name == name).map(|m| m.value)
    }

    pub fn annotate(&mut self, key: impl Into<String>, value: impl ToString) {
        self.annotations.push((key.into(), value.to_string()));
    }

    pub fn render_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "{:<14} {:>12} {:>12} {:>12} {:>6}", "metric", "value", "boot_mean", "boot_se", "runs").unwrap();
        for m in &self.metrics {
            writeln!(
                s,
                "{:<14} {:>12.6} {:>12.6} {:>12.6} {:>6}",
                m.name, m.value, m.bootstrap.mean, m.bootstrap.std_error, m.bootstrap.runs
            )
            .unwrap();
        }
        for (k, v) in &self.annotations {
            writeln!(s, "{k}: {v}").unwrap();
        }
        s
    }

    /// One `key=value` pair per line.
    pub fn render_kv(&self) -> String {
        let mut s = String::new();
        for m in &self.metrics {
            writeln!(s, "{}.value={}", m.name, m.value).unwrap();
            writeln!(s, "{}.mean={}", m.name, m.bootstrap.mean).unwrap();
            writeln!(s, "{}.std_error={}", m.name, m.bootstrap.std_error).unwrap();
            writeln!(s, "{}.runs={}", m.name, m.bootstrap.runs).unwrap();
        }
        for (k, v) in &self.annotations {
            writeln!(s, "{k}={v}").unwrap();
        }
        s
    }
}

type Statistic = fn(&[Vec<f64>], &[Vec<f64>], &[usize]) -> Result<f64>;

fn column(rows: &[Vec<f64>], idx: &[usize], k: usize) -> Vec<f64> {
    idx.iter().map(|&i| rows[i][k]).collect()
}

/// Mean over outputs of a per-output metric.
fn macro_average(
    preds: &[Vec<f64>],
    targets: &[Vec<f64>],
    idx: &[usize],
    metric: fn(&[f64], &[f64]) -> Result<f64>,
) -> Result<f64> {
    let s = preds[0].len();
    let mut total = 0.0;
    for k in 0..s {
        total += metric(&column(preds, idx, k), &column(targets, idx, k))?;
    }
    Ok(total / s as f64)
}

/// Computes the task's metrics over `preds` and, with `bootstrap =
/// Some((runs, seed))`, their bootstrap estimates. Multi-output
/// classification metrics are averaged over outputs.
pub fn evaluate_predictions(
    task: Task,
    preds: &[Vec<f64>],
    labels: &[Label],
    bootstrap: Option<(usize, u64)>,
) -> Result<EvalReport> {
    if preds.is_empty() || preds.len() != labels.len() {
        return Err(Error::LengthMismatch(preds.len(), labels.len()));
    }
    let targets: Vec<Vec<f64>> = labels.iter().map(Label::as_targets).collect();
    if targets.iter().zip(preds).any(|(t, p)| t.len() != p.len()) {
        return Err(Error::LabelMismatch("prediction and label widths differ".into()));
    }
    let stats: Vec<(&str, Statistic)> = match task {
        Task::Classification => vec![
            ("roc_auc", |p, t, i| macro_average(p, t, i, roc_auc)),
            ("map", |p, t, i| macro_average(p, t, i, average_precision)),
        ],
        Task::Regression => vec![
            ("mae", |p, t, i| mae(&column(p, i, 0), &column(t, i, 0))),
            ("rmse", |p, t, i| rmse(&column(p, i, 0), &column(t, i, 0))),
            ("correlation", |p, t, i| correlation(&column(p, i, 0), &column(t, i, 0))),
        ],
    };
    let all: Vec<usize> = (0..preds.len()).collect();
    let mut report = EvalReport::default();
    for (k, (name, stat)) in stats.into_iter().enumerate() {
        let value = match stat(preds, &targets, &all) {
            Ok(v) => v,
            Err(Error::SingleClass(_) | Error::ZeroVariance(_)) => {
                report.annotate(format!("{name}.undefined"), "true");
                continue;
            }
            Err(e) => return Err(e),
        };
        let estimate = match bootstrap {
            Some((runs, seed)) => {
                // each metric gets its own family of run streams
                let metric_seed = seed.wrapping_add((k as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
                bootstrap_indices(preds.len(), runs, metric_seed, |idx| stat(preds, &targets, idx))?
            }
            None => BootstrapEstimate { mean: value, std_error: 0.0, runs: 1 },
        };
        report.metrics.push(MetricEntry { name: name.to_string(), value, bootstrap: estimate });
    }
    Ok(report)
}
