//! Nonparametric bootstrap of a metric.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Redraws allowed per run when a resample leaves the metric undefined.
pub const MAX_REDRAWS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BootstrapEstimate {
    pub mean: f64,
    /// Sample standard deviation of the per-run values (0 for one run).
    pub std_error: f64,
    pub runs: usize,
}

/// Bootstraps `metric` over resampled `(score, label)` pairs.
pub fn bootstrap<F>(metric: F, scores: &[f64], labels: &[f64], runs: usize, seed: u64) -> Result<BootstrapEstimate>
where
    F: Fn(&[f64], &[f64]) -> Result<f64>,
{
    if scores.is_empty() || scores.len() != labels.len() {
        return Err(Error::LengthMismatch(scores.len(), labels.len()));
    }
    let mut s = Vec::with_capacity(scores.len());
    let mut l = Vec::with_capacity(labels.len());
    bootstrap_indices(scores.len(), runs, seed, |idx| {
        s.clear();
        l.clear();
        s.extend(idx.iter().map(|&i| scores[i]));
        l.extend(idx.iter().map(|&i| labels[i]));
        metric(&s, &l)
    })
}

/// Bootstraps a statistic of `n` items given as a function of resampled
/// indices.
///
/// Run `r` draws from its own ChaCha stream `r` of `seed`, so the result
/// does not depend on the order in which runs are evaluated. A resample on
/// which the statistic is undefined (single class, zero variance) is
/// redrawn from the same stream, at most [`MAX_REDRAWS`] times.
pub fn bootstrap_indices<F>(n: usize, runs: usize, seed: u64, mut statistic: F) -> Result<BootstrapEstimate>
where
    F: FnMut(&[usize]) -> Result<f64>,
{
    if runs == 0 {
        return Err(Error::Config("bootstrap needs at least one run".into()));
    }
    if n == 0 {
        return Err(Error::LengthMismatch(0, 0));
    }
    let mut values = Vec::with_capacity(runs);
    let mut idx = vec![0usize; n];
    for run in 0..runs {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(run as u64);
        let mut attempts = 0;
        let value = loop {
            for slot in idx.iter_mut() {
                *slot = rng.random_range(0..n);
            }
            match statistic(&idx) {
                Ok(v) => break v,
                Err(Error::SingleClass(_) | Error::ZeroVariance(_)) if attempts < MAX_REDRAWS => attempts += 1,
                Err(Error::SingleClass(_) | Error::ZeroVariance(_)) => {
                    return Err(Error::BootstrapExhausted(MAX_REDRAWS))
                }
                Err(e) => return Err(e),
            }
        };
        values.push(value);
    }
    let mean = values.iter().sum::<f64>() / runs as f64;
    let std_error = if runs > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (runs - 1) as f64).sqrt()
    } else {
        0.0
    };
    Ok(BootstrapEstimate { mean, std_error, runs })
}
