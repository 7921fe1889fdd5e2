//! Ranking and regression metrics.

use crate::error::{Error, Result};

fn check_lengths(a: &[f64], b: &[f64]) -> Result<()> {
    if a.is_empty() || a.len() != b.len() {
        return Err(Error::LengthMismatch(a.len(), b.len()));
    }
    Ok(())
}

fn is_positive(label: f64) -> bool {
    label > 0.5
}

/// Area under the ROC curve from the Mann-Whitney rank statistic, tied
/// scores sharing their mid-rank.
pub fn roc_auc(scores: &[f64], labels: &[f64]) -> Result<f64> {
    check_lengths(scores, labels)?;
    let n = scores.len();
    let n_pos = labels.iter().filter(|&&y| is_positive(y)).count();
    let n_neg = n - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass("roc_auc"));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut pos_rank_sum = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1 ..= j+1 share their mean
        let mid = (i + j + 2) as f64 / 2.0;
        let pos_here = order[i..=j].iter().filter(|&&k| is_positive(labels[k])).count();
        pos_rank_sum += mid * pos_here as f64;
        i = j + 1;
    }
    let u = pos_rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

/// Average precision: precision at each distinct score threshold, weighted
/// by the recall gained there.
pub fn average_precision(scores: &[f64], labels: &[f64]) -> Result<f64> {
    check_lengths(scores, labels)?;
    let n_pos = labels.iter().filter(|&&y| is_positive(y)).count();
    if n_pos == 0 {
        return Err(Error::SingleClass("average precision"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let (mut tp, mut seen, mut ap) = (0usize, 0usize, 0.0);
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let gained = order[i..=j].iter().filter(|&&k| is_positive(labels[k])).count();
        tp += gained;
        seen += j - i + 1;
        ap += gained as f64 / n_pos as f64 * (tp as f64 / seen as f64);
        i = j + 1;
    }
    Ok(ap)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassificationMetrics {
    /// `None` when only one class is present.
    pub roc_auc: Option<f64>,
    pub average_precision: f64,
}

pub fn classification_metrics(scores: &[f64], labels: &[f64]) -> Result<ClassificationMetrics> {
    let average_precision = average_precision(scores, labels)?;
    let roc_auc = match roc_auc(scores, labels) {
        Ok(v) => Some(v),
        Err(Error::SingleClass(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(ClassificationMetrics { roc_auc, average_precision })
}

pub fn mae(preds: &[f64], targets: &[f64]) -> Result<f64> {
    check_lengths(preds, targets)?;
    Ok(preds.iter().zip(targets).map(|(p, t)| (p - t).abs()).sum::<f64>() / preds.len() as f64)
}

pub fn rmse(preds: &[f64], targets: &[f64]) -> Result<f64> {
    check_lengths(preds, targets)?;
    Ok((preds.iter().zip(targets).map(|(p, t)| (p - t).powi(2)).sum::<f64>() / preds.len() as f64).sqrt())
}

/// Pearson correlation coefficient.
pub fn correlation(preds: &[f64], targets: &[f64]) -> Result<f64> {
    check_lengths(preds, targets)?;
    let n = preds.len() as f64;
    let mp = preds.iter().sum::<f64>() / n;
    let mt = targets.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (p, t) in preds.iter().zip(targets) {
        let (a, b) = (p - mp, t - mt);
        sxy += a * b;
        sxx += a * a;
        syy += b * b;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::ZeroVariance("correlation"));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegressionMetrics {
    pub mae: f64,
    pub rmse: f64,
    /// `None` when either side has zero variance.
    pub correlation: Option<f64>,
}

pub fn regression_metrics(preds: &[f64], targets: &[f64]) -> Result<RegressionMetrics> {
    let correlation = match correlation(preds, targets) {
        Ok(v) => Some(v),
        Err(Error::ZeroVariance(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(RegressionMetrics { mae: mae(preds, targets)?, rmse: rmse(preds, targets)?, correlation })
}
