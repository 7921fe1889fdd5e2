//! Predictors over featurized sequences and the multi-resolution ensemble.

mod io;
pub mod mre;
pub mod reference;
pub mod train;

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::codec::FeatureCodec;
use crate::error::{Error, Result};
use crate::sequence::{EventSequence, Label};

pub use mre::{attention_weights, resolution_descriptor, MreModel, ResolutionView, DEFAULT_RESOLUTIONS};
pub use reference::ReferencePredictor;
pub use train::{train, train_with_observer, EpochStats, MreConfig, TrainConfig, TrainOutcome};

/// Probabilities below this (or above one minus it) are clamped inside the
/// cross-entropy.
pub(crate) const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    /// Independent binary outputs, cross-entropy loss.
    Classification,
    /// Real outputs, squared-error loss.
    Regression,
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::Classification => "classification",
            Task::Regression => "regression",
        })
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "classification" => Ok(Task::Classification),
            "regression" => Ok(Task::Regression),
            other => Err(Error::Config(format!("unknown task {other:?}"))),
        }
    }
}

impl Task {
    /// Task and output width implied by a set of labels.
    pub fn infer<'a>(labels: impl IntoIterator<Item = &'a Label>) -> Result<(Task, usize)> {
        let mut found: Option<(Task, usize)> = None;
        for label in labels {
            let this = match label {
                Label::Binary(v) => {
                    if v.iter().any(|&b| b > 1) {
                        return Err(Error::LabelMismatch("binary labels must be 0 or 1".into()));
                    }
                    (Task::Classification, v.len())
                }
                Label::Real(_) => (Task::Regression, 1),
            };
            match found {
                None => found = Some(this),
                Some(prev) if prev != this => {
                    return Err(Error::LabelMismatch(format!(
                        "mixed label kinds: {} x{} and {} x{}",
                        prev.0, prev.1, this.0, this.1
                    )))
                }
                _ => {}
            }
        }
        found.ok_or(Error::EmptyDataset("no labels"))
    }

    /// Mean per-output loss of `outputs` against `targets`.
    pub fn loss(self, outputs: &[f64], targets: &[f64]) -> f64 {
        let s = outputs.len() as f64;
        match self {
            Task::Classification => {
                outputs
                    .iter()
                    .zip(targets)
                    .map(|(&p, &y)| {
                        let p = p.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR);
                        -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
                    })
                    .sum::<f64>()
                    / s
            }
            Task::Regression => outputs.iter().zip(targets).map(|(p, y)| (p - y).powi(2)).sum::<f64>() / s,
        }
    }
}

/// A differentiable map from a `T x d` feature matrix to `s` outputs.
pub trait Predictor {
    fn task(&self) -> Task;

    fn outputs(&self) -> usize;

    /// Probabilities (classification) or values (regression).
    fn forward(&self, features: ArrayView2<'_, f64>) -> Array1<f64>;

    /// Gradient of the loss with respect to every entry of `features`.
    fn input_gradient(&self, features: ArrayView2<'_, f64>, targets: &[f64]) -> Array2<f64>;

    fn loss(&self, features: ArrayView2<'_, f64>, targets: &[f64]) -> f64 {
        let out = self.forward(features);
        self.task().loss(out.as_slice().expect("contiguous"), targets)
    }
}

/// A trained model: either a bare predictor or a multi-resolution ensemble
/// around one.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Single(ReferencePredictor),
    Mre(MreModel),
}

impl Model {
    pub fn task(&self) -> Task {
        self.predictor().task()
    }

    pub fn predictor(&self) -> &ReferencePredictor {
        match self {
            Model::Single(p) => p,
            Model::Mre(m) => &m.predictor,
        }
    }

    /// Prediction for one raw sequence.
    pub fn predict(&self, seq: &EventSequence, codec: &FeatureCodec) -> Result<Vec<f64>> {
        match self {
            Model::Single(p) => {
                let features = codec.featurize(seq)?;
                Ok(p.forward(features.view()).to_vec())
            }
            Model::Mre(m) => m.predict(seq, codec),
        }
    }

    pub fn to_text(&self) -> String {
        io::write_model(self)
    }

    pub fn from_text(text: &str) -> Result<Self> {
        io::read_model(text)
    }
}
