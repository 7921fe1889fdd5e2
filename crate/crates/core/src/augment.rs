//! Stochastic temporal-clustering augmentation.
//!
//! A draw picks `p ~ U[0, p_high]`, selects `ceil(p * T)` distinct gaps
//! between consecutive events, and fuses the events at both ends of every
//! selected gap. Chains of selected gaps fuse into a single cluster, so the
//! output always has `T - ceil(p * T)` events.
//!
//! Note the convention: here `p` is the fraction of events *merged away*,
//! whereas the coarsening operators take the fraction *retained*.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::coarsen::ceil_count;
use crate::error::{Error, Result};
use crate::sequence::{merge_runs, EventSequence};

/// Gaps shorter than this are treated as this long when weighting.
pub const MIN_GAP_HOURS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentConfig {
    pub p_high: f64,
    pub weighted: bool,
    pub rng_seed: u64,
}

impl AugmentConfig {
    pub fn validate(&self) -> Result<()> {
        if (0.0..1.0).contains(&self.p_high) {
            Ok(())
        } else {
            Err(Error::BadPHigh(self.p_high))
        }
    }
}

/// Selection probabilities of the `T - 1` gaps of a sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalWeights {
    pub probs: Vec<f64>,
}

impl IntervalWeights {
    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}

/// Uniform gap weights, or weights proportional to the inverse gap length
/// when `weighted` is set.
pub fn interval_weights(seq: &EventSequence, weighted: bool) -> Result<IntervalWeights> {
    let n = seq.len();
    if n < 2 {
        return Err(Error::NoIntervals(n));
    }
    let probs = if weighted {
        let inv: Vec<f64> = seq
            .events
            .windows(2)
            .map(|w| 1.0 / (w[1].t - w[0].t).max(MIN_GAP_HOURS))
            .collect();
        let total: f64 = inv.iter().sum();
        inv.into_iter().map(|v| v / total).collect()
    } else {
        vec![1.0 / (n - 1) as f64; n - 1]
    };
    Ok(IntervalWeights { probs })
}

/// Draws `m` distinct gap indices, sequentially without replacement,
/// renormalizing after every draw.
///
/// Implemented with exponential race keys: each gap gets `E_i / w_i` with
/// `E_i ~ Exp(1)` and the `m` smallest keys win, in order. This has exactly
/// the distribution of successive renormalized draws. The returned indices
/// are in draw order.
pub fn sample_intervals<R: Rng + ?Sized>(weights: &IntervalWeights, m: usize, rng: &mut R) -> Result<Vec<usize>> {
    let available = weights.probs.iter().filter(|&&w| w > 0.0).count();
    if m > available {
        return Err(Error::SamplingExhausted { requested: m, available });
    }
    if m == 0 {
        return Ok(Vec::new());
    }
    let mut keyed: Vec<(f64, usize)> = weights
        .probs
        .iter()
        .enumerate()
        .filter(|(_, &w)| w > 0.0)
        .map(|(i, &w)| {
            // 1 - U lies in (0, 1], so the log is finite
            let u: f64 = rng.random();
            (-(1.0 - u).ln() / w, i)
        })
        .collect();
    if m < keyed.len() {
        keyed.select_nth_unstable_by(m - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        keyed.truncate(m);
    }
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    Ok(keyed.into_iter().map(|(_, i)| i).collect())
}

/// Fuses the events at both ends of every gap in `gaps` (gap `i` joins
/// events `i` and `i + 1`), transitively.
pub fn merge_intervals(seq: &EventSequence, gaps: &[usize]) -> Result<EventSequence> {
    let n = seq.len();
    let mut joined = vec![false; n.saturating_sub(1)];
    for &g in gaps {
        if g + 1 >= n {
            return Err(Error::DimensionMismatch { expected: n.saturating_sub(1), got: g + 1 });
        }
        joined[g] = true;
    }
    let starts: Vec<usize> = std::iter::once(0)
        .chain((1..n).filter(|&i| !joined[i - 1]))
        .collect();
    Ok(seq.with_events(merge_runs(&seq.events, &starts)))
}

/// Result of one augmentation draw, with the randomness it consumed.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentDraw {
    pub sequence: EventSequence,
    pub p: f64,
    pub gaps: Vec<usize>,
}

/// One stochastic augmentation of `seq`.
pub fn fast_augment<R: Rng + ?Sized>(seq: &EventSequence, cfg: &AugmentConfig, rng: &mut R) -> Result<EventSequence> {
    fast_augment_traced(seq, cfg, rng).map(|d| d.sequence)
}

/// Same as [`fast_augment`], also reporting the drawn `p` and gaps.
pub fn fast_augment_traced<R: Rng + ?Sized>(seq: &EventSequence, cfg: &AugmentConfig, rng: &mut R) -> Result<AugmentDraw> {
    cfg.validate()?;
    seq.check_coarsened()?;
    let p = if cfg.p_high > 0.0 { rng.random_range(0.0..=cfg.p_high) } else { 0.0 };
    let n = seq.len();
    if n < 2 {
        return Ok(AugmentDraw { sequence: seq.clone(), p, gaps: Vec::new() });
    }
    // there are only n - 1 gaps to merge
    let m = ceil_count(p, n).min(n - 1);
    let weights = interval_weights(seq, cfg.weighted)?;
    let gaps = sample_intervals(&weights, m, rng)?;
    let sequence = merge_intervals(seq, &gaps)?;
    Ok(AugmentDraw { sequence, p, gaps })
}

/// Output length of an augmentation draw with merge fraction `p`.
pub fn augmented_len(p: f64, n: usize) -> usize {
    if n < 2 {
        n
    } else {
        n - ceil_count(p, n).min(n - 1)
    }
}
