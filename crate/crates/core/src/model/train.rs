//! Mini-batch SGD with momentum for the reference predictor and the MRE
//! ensemble, with optional per-epoch augmentation.

use std::borrow::Cow;

use ndarray::{s, Array1, Array2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::mre::{MreModel, ResolutionView, DESCRIPTOR_LEN};
use super::reference::ReferencePredictor;
use super::{Model, Task};
use crate::augment::{fast_augment, AugmentConfig};
use crate::coarsen::CoarsenMode;
use crate::codec::FeatureCodec;
use crate::error::{Error, Result};
use crate::sequence::{EventSequence, LabeledSequence};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MreConfig {
    pub mode: CoarsenMode,
    pub resolutions: Vec<f64>,
    pub interval: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub hidden: usize,
    pub seed: u64,
    pub augment: Option<AugmentConfig>,
    pub mre: Option<MreConfig>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 50,
            learning_rate: 0.05,
            momentum: 0.9,
            batch_size: 32,
            hidden: 64,
            seed: 0,
            augment: None,
            mre: None,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.hidden == 0 {
            return Err(Error::Config("batch size and hidden width must be positive".into()));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("bad learning rate {}", self.learning_rate)));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config(format!("momentum must lie in [0, 1), got {}", self.momentum)));
        }
        if let Some(aug) = &self.augment {
            aug.validate()?;
        }
        if let Some(mre) = &self.mre {
            if mre.resolutions.is_empty() || mre.resolutions.iter().any(|&p| !(p > 0.0 && p <= 1.0)) {
                return Err(Error::Config("MRE resolutions must be nonempty and lie in (0, 1]".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    /// 1-based.
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: Model,
    pub trace: Vec<EpochStats>,
}

#[derive(Clone)]
enum Prepared {
    Single(Array2<f64>),
    Mre(Vec<ResolutionView>),
}

impl Model {
    fn prepare(&self, seq: &EventSequence, codec: &FeatureCodec) -> Result<Prepared> {
        match self {
            Model::Single(_) => codec.featurize(seq).map(Prepared::Single),
            Model::Mre(m) => m.views(seq, codec).map(Prepared::Mre),
        }
    }

    fn sample_loss(&self, x: &Prepared, targets: &[f64], grad: Option<&mut Array1<f64>>) -> f64 {
        match (self, x) {
            (Model::Single(p), Prepared::Single(f)) => match grad {
                Some(g) => p.accumulate(f.view(), targets, g),
                None => super::Predictor::loss(p, f.view(), targets),
            },
            (Model::Mre(m), Prepared::Mre(views)) => m.backward(views, targets, grad).0,
            _ => unreachable!("prepared input matches model kind"),
        }
    }

    fn num_trainable(&self) -> usize {
        match self {
            Model::Single(p) => p.num_parameters(),
            Model::Mre(m) => m.num_parameters(),
        }
    }

    fn apply_step(&mut self, step: &Array1<f64>) {
        match self {
            Model::Single(p) => {
                let mut theta = p.parameters_mut();
                theta += step;
            }
            Model::Mre(m) => {
                let n = m.predictor.num_parameters();
                let mut theta = m.predictor.parameters_mut();
                theta += &step.slice(s![..n]);
                for i in 0..DESCRIPTOR_LEN {
                    m.beta[i] += step[n + i];
                }
            }
        }
    }
}

/// Trains from scratch; see [`train_with_observer`].
pub fn train(
    train_set: &[LabeledSequence],
    val_set: &[LabeledSequence],
    codec: &FeatureCodec,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    train_with_observer(train_set, val_set, codec, cfg, |_, _| {})
}

/// Trains from scratch, calling `observer` after every epoch with that
/// epoch's statistics and the current model.
///
/// Deterministic for a fixed configuration: initialization, shuffling and
/// augmentation each draw from their own seeded stream, and augmentation
/// gives every (epoch, sequence) pair an independent stream.
pub fn train_with_observer<F>(
    train_set: &[LabeledSequence],
    val_set: &[LabeledSequence],
    codec: &FeatureCodec,
    cfg: &TrainConfig,
    mut observer: F,
) -> Result<TrainOutcome>
where
    F: FnMut(&EpochStats, &Model),
{
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(Error::EmptyDataset("training split"));
    }
    let (task, outputs) = Task::infer(train_set.iter().chain(val_set).map(|s| &s.label))?;

    let mut init_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let predictor = ReferencePredictor::new(task, codec.width(), cfg.hidden, outputs, &mut init_rng);
    let mut model = match &cfg.mre {
        None => Model::Single(predictor),
        Some(mre) => {
            let mut m = MreModel::new(predictor, mre.resolutions.clone(), mre.mode);
            m.interval = mre.interval;
            Model::Mre(m)
        }
    };

    let targets: Vec<Vec<f64>> = train_set.iter().map(|s| s.label.as_targets()).collect();
    let val_targets: Vec<Vec<f64>> = val_set.iter().map(|s| s.label.as_targets()).collect();
    let base: Vec<Prepared> = if cfg.augment.is_some() {
        Vec::new()
    } else {
        train_set.iter().map(|s| model.prepare(&s.sequence, codec)).collect::<Result<_>>()?
    };
    let val: Vec<Prepared> = val_set.iter().map(|s| model.prepare(&s.sequence, codec)).collect::<Result<_>>()?;

    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    shuffle_rng.set_stream(1);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut velocity = Array1::<f64>::zeros(model.num_trainable());
    let mut grad = Array1::<f64>::zeros(model.num_trainable());
    let mut trace = Vec::with_capacity(cfg.epochs);

    for epoch in 1..=cfg.epochs {
        let samples: Cow<'_, [Prepared]> = match &cfg.augment {
            None => Cow::Borrowed(&base),
            Some(aug) => Cow::Owned(
                train_set
                    .iter()
                    .enumerate()
                    .map(|(i, s)| {
                        let mut rng = augment_stream(aug, epoch, i);
                        model.prepare(&fast_augment(&s.sequence, aug, &mut rng)?, codec)
                    })
                    .collect::<Result<_>>()?,
            ),
        };
        order.shuffle(&mut shuffle_rng);
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            grad.fill(0.0);
            for &i in batch {
                total += model.sample_loss(&samples[i], &targets[i], Some(&mut grad));
            }
            grad /= batch.len() as f64;
            velocity *= cfg.momentum;
            velocity.scaled_add(-cfg.learning_rate, &grad);
            model.apply_step(&velocity);
        }
        let train_loss = total / train_set.len() as f64;
        if !train_loss.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        let val_loss = (!val.is_empty()).then(|| {
            val.iter()
                .zip(&val_targets)
                .map(|(x, y)| model.sample_loss(x, y, None))
                .sum::<f64>()
                / val.len() as f64
        });
        let stats = EpochStats { epoch, train_loss, val_loss };
        observer(&stats, &model);
        trace.push(stats);
    }
    Ok(TrainOutcome { model, trace })
}

fn augment_stream(aug: &AugmentConfig, epoch: usize, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(aug.rng_seed);
    rng.set_stream(((epoch as u64) << 32) | index as u64);
    rng
}
