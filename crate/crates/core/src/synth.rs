//! Synthetic irregular sequences whose labels depend on time-weighted
//! means of smooth latent signals.
//!
//! Each variable follows `a + b sin(w t + phi)` over `[0, horizon]`.
//! Observation times mix a uniform background with Gaussian bursts around
//! Poisson-many centers, and each value is masked independently. The label
//! is Bernoulli with probability `sigmoid(z / noise)`, where `z` is a fixed
//! signed contrast of the exact time-weighted means.

use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sequence::{Event, EventSequence, Label, LabeledSequence};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_sequences: usize,
    pub r: usize,
    pub t_min: usize,
    pub t_max: usize,
    /// Probability that an event belongs to a burst rather than the
    /// uniform background.
    pub burst_intensity: f64,
    /// Expected number of burst centers beyond the first.
    pub extra_bursts: f64,
    /// Standard deviation of burst members around their center, in hours.
    pub burst_width: f64,
    /// Logistic temperature of the label rule; 0 makes labels a step.
    pub noise: f64,
    /// Standard deviation of measurement noise on observed values.
    pub obs_noise: f64,
    pub missing_rate: f64,
    pub horizon: f64,
    pub val_fraction: f64,
    pub test_fraction: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_sequences: 3000,
            r: 4,
            t_min: 2,
            t_max: 12,
            burst_intensity: 0.7,
            extra_bursts: 2.0,
            burst_width: 0.5,
            noise: 0.25,
            obs_noise: 0.1,
            missing_rate: 0.5,
            horizon: 24.0,
            val_fraction: 1.0 / 6.0,
            test_fraction: 1.0 / 6.0,
            seed: 0,
        }
    }
}

impl SynthConfig {
    /// Reads a JSON object; absent fields keep their defaults.
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("synthetic data configuration: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.n_sequences == 0 {
            return bad("n_sequences must be positive");
        }
        if self.r == 0 {
            return bad("r must be positive");
        }
        if self.t_min < 1 {
            return bad("t_min must be at least 1");
        }
        if self.t_max < self.t_min {
            return bad("t_max must not be below t_min");
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return bad("noise must be finite and nonnegative");
        }
        if !(self.obs_noise >= 0.0 && self.obs_noise.is_finite()) {
            return bad("obs_noise must be finite and nonnegative");
        }
        if !(0.0..=1.0).contains(&self.burst_intensity) {
            return bad("burst_intensity must lie in [0, 1]");
        }
        if !(self.extra_bursts >= 0.0 && self.extra_bursts.is_finite()) {
            return bad("extra_bursts must be finite and nonnegative");
        }
        if !(self.burst_width > 0.0 && self.burst_width.is_finite()) {
            return bad("burst_width must be positive");
        }
        if !(0.0..1.0).contains(&self.missing_rate) {
            return bad("missing_rate must lie in [0, 1)");
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return bad("horizon must be positive");
        }
        let (v, t) = (self.val_fraction, self.test_fraction);
        if !(v >= 0.0 && t >= 0.0 && v + t < 1.0) {
            return bad("split fractions must be nonnegative and sum below 1");
        }
        Ok(())
    }

    /// Weight of variable `j` in the label contrast.
    pub fn contrast_weight(&self, j: usize) -> f64 {
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        sign / (self.r as f64).sqrt()
    }

    pub fn probability(&self, z: f64) -> f64 {
        if self.noise == 0.0 {
            if z > 0.0 {
                1.0
            } else {
                0.0
            }
        } else {
            1.0 / (1.0 + (-z / self.noise).exp())
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatentSignal {
    pub offset: f64,
    pub amplitude: f64,
    pub frequency: f64,
    pub phase: f64,
}

impl LatentSignal {
    pub fn at(&self, t: f64) -> f64 {
        self.offset + self.amplitude * (self.frequency * t + self.phase).sin()
    }

    /// Exact mean of the signal over `[0, horizon]`.
    pub fn time_mean(&self, horizon: f64) -> f64 {
        let wh = self.frequency * horizon;
        self.offset + self.amplitude * (self.phase.cos() - (wh + self.phase).cos()) / wh
    }
}

/// One split: sequences with the label probability that generated each.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Split {
    pub items: Vec<LabeledSequence>,
    pub probabilities: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthDataset {
    pub train: Split,
    pub val: Split,
    pub test: Split,
}

fn sample_signal(rng: &mut ChaCha8Rng, horizon: f64) -> LatentSignal {
    let base = 2.0 * PI / horizon;
    LatentSignal {
        offset: Normal::new(0.0, 1.0).unwrap().sample(rng),
        amplitude: rng.random_range(0.5..1.5),
        frequency: base * rng.random_range(1.0..4.0),
        phase: rng.random_range(0.0..2.0 * PI),
    }
}

fn sample_times(cfg: &SynthConfig, n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let h = cfg.horizon;
    let extra = if cfg.extra_bursts > 0.0 { Poisson::new(cfg.extra_bursts).unwrap().sample(rng) as usize } else { 0 };
    let centers: Vec<f64> = (0..=extra).map(|_| rng.random_range(0.0..h)).collect();
    let spread = Normal::new(0.0, cfg.burst_width).unwrap();
    let mut times: Vec<f64> = (0..n)
        .map(|_| {
            if rng.random::<f64>() < cfg.burst_intensity {
                let c = centers[rng.random_range(0..centers.len())];
                (c + spread.sample(rng)).clamp(0.0, h)
            } else {
                rng.random_range(0.0..h)
            }
        })
        .collect();
    times.sort_by(f64::total_cmp);
    times
}

/// Draws sequence `index` of the corpus; returns it with its label
/// probability. Every sequence uses its own stream of the seed.
pub fn generate_one(cfg: &SynthConfig, index: usize) -> (LabeledSequence, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(index as u64);
    let signals: Vec<LatentSignal> = (0..cfg.r).map(|_| sample_signal(&mut rng, cfg.horizon)).collect();
    let z: f64 = signals
        .iter()
        .enumerate()
        .map(|(j, s)| cfg.contrast_weight(j) * s.time_mean(cfg.horizon))
        .sum();
    let prob = cfg.probability(z);
    let y = u8::from(rng.random::<f64>() < prob);
    let n = rng.random_range(cfg.t_min..=cfg.t_max);
    let obs = Normal::new(0.0, cfg.obs_noise).unwrap();
    let events = sample_times(cfg, n, &mut rng)
        .into_iter()
        .map(|t| {
            let mut values: Vec<Option<f64>> = signals
                .iter()
                .map(|s| (rng.random::<f64>() >= cfg.missing_rate).then(|| s.at(t) + obs.sample(&mut rng)))
                .collect();
            if values.iter().all(Option::is_none) {
                let j = rng.random_range(0..cfg.r);
                values[j] = Some(signals[j].at(t) + obs.sample(&mut rng));
            }
            Event::from_options(t, &values, 1)
        })
        .collect();
    let sequence = EventSequence::new(format!("s{index:06}"), events);
    (LabeledSequence { sequence, label: Label::Binary(vec![y]) }, prob)
}

/// Generates the corpus and splits it into disjoint train, validation and
/// test sets.
pub fn generate(cfg: &SynthConfig) -> Result<SynthDataset> {
    cfg.validate()?;
    let n = cfg.n_sequences;
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(u64::MAX);
    order.shuffle(&mut rng);
    let n_test = (n as f64 * cfg.test_fraction).round() as usize;
    let n_val = (n as f64 * cfg.val_fraction).round() as usize;
    let mut splits = [Split::default(), Split::default(), Split::default()];
    for (rank, &i) in order.iter().enumerate() {
        let which = if rank < n_test {
            2
        } else if rank < n_test + n_val {
            1
        } else {
            0
        };
        let (item, p) = generate_one(cfg, i);
        splits[which].items.push(item);
        splits[which].probabilities.push(p);
    }
    for s in &mut splits {
        let mut paired: Vec<(LabeledSequence, f64)> = s.items.drain(..).zip(s.probabilities.drain(..)).collect();
        paired.sort_by(|a, b| a.0.sequence.id.cmp(&b.0.sequence.id));
        (s.items, s.probabilities) = paired.into_iter().unzip();
    }
    let [train, val, test] = splits;
    Ok(SynthDataset { train, val, test })
}

/// Time-weighted mean of variable `j` over `[0, horizon]`, weighting each
/// observation by the span of times closer to it than to any other
/// observation of `j`. `None` when `j` is never observed.
pub fn time_weighted_mean(seq: &EventSequence, j: usize, horizon: f64) -> Option<f64> {
    let obs: Vec<(f64, f64)> = seq.events.iter().filter_map(|e| e.value(j).map(|v| (e.t, v))).collect();
    if obs.is_empty() {
        return None;
    }
    let mut total = 0.0;
    let mut weight = 0.0;
    for (i, &(t, v)) in obs.iter().enumerate() {
        let lo = if i == 0 { 0.0 } else { 0.5 * (obs[i - 1].0 + t) };
        let hi = if i + 1 == obs.len() { horizon } else { 0.5 * (t + obs[i + 1].0) };
        let w = (hi.min(horizon) - lo.max(0.0)).max(0.0);
        total += w * v;
        weight += w;
    }
    // every observation sits on one instant
    if weight == 0.0 {
        return Some(obs.iter().map(|o| o.1).sum::<f64>() / obs.len() as f64);
    }
    Some(total / weight)
}

/// The generating label rule applied to time-weighted estimates of the
/// latent means; an unobserved variable contributes its prior mean 0.
pub fn oracle_probability(cfg: &SynthConfig, seq: &EventSequence) -> f64 {
    let z: f64 = (0..cfg.r)
        .map(|j| cfg.contrast_weight(j) * time_weighted_mean(seq, j, cfg.horizon).unwrap_or(0.0))
        .sum();
    cfg.probability(z)
}
