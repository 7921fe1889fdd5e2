//! Multi-resolution ensemble.
//!
//! One shared predictor is evaluated on `K` coarsened views of the input,
//! `C_{p_1}(X), ..., C_{p_K}(X)`, and the outputs are mixed with attention
//! weights computed from cheap per-view descriptors:
//!
//! ```text
//! g(X) = sum_k alpha_k(X) * f(C_{p_k}(X)),   alpha = softmax(D beta)
//! ```
//!
//! Each view's descriptor is `[ln(T'_k + 1), p_k, fraction of empty cells]`,
//! so `beta` holds only three numbers on top of the shared predictor.

use ndarray::{Array1, Array2};

use super::reference::ReferencePredictor;
use super::{Predictor, Task, PROB_FLOOR};
use crate::coarsen::{ceil_count, coarsen, CoarsenMode, CoarseningSpec};
use crate::codec::FeatureCodec;
use crate::error::Result;
use crate::sequence::{merge_events, EventSequence};

pub const DEFAULT_RESOLUTIONS: [f64; 4] = [1.0, 0.5, 0.25, 0.125];

pub const DESCRIPTOR_LEN: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct MreModel {
    pub predictor: ReferencePredictor,
    pub beta: [f64; DESCRIPTOR_LEN],
    pub resolutions: Vec<f64>,
    pub mode: CoarsenMode,
    /// Grid window; `None` uses each sequence's own span.
    pub interval: Option<(f64, f64)>,
}

/// One coarsened view, featurized, with its attention descriptor.
#[derive(Debug, Clone)]
pub struct ResolutionView {
    pub features: Array2<f64>,
    pub descriptor: [f64; DESCRIPTOR_LEN],
}

pub fn resolution_descriptor(view: &EventSequence, p: f64) -> [f64; DESCRIPTOR_LEN] {
    let len = view.len();
    let empty = view.events.iter().filter(|e| e.c == 0).count();
    [((len + 1) as f64).ln(), p, empty as f64 / len.max(1) as f64]
}

/// Softmax of the linear scores `descriptor . beta`.
pub fn attention_weights(descriptors: &[[f64; DESCRIPTOR_LEN]], beta: &[f64; DESCRIPTOR_LEN]) -> Vec<f64> {
    let scores: Vec<f64> = descriptors
        .iter()
        .map(|d| d.iter().zip(beta).map(|(a, b)| a * b).sum())
        .collect();
    softmax(&scores)
}

pub(crate) fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Per-view outputs and their mixture.
#[derive(Debug, Clone)]
pub struct MrePrediction {
    pub combined: Vec<f64>,
    pub per_resolution: Vec<Vec<f64>>,
    pub alpha: Vec<f64>,
}

impl MreModel {
    pub fn new(predictor: ReferencePredictor, resolutions: Vec<f64>, mode: CoarsenMode) -> Self {
        MreModel { predictor, beta: [0.0; DESCRIPTOR_LEN], resolutions, mode, interval: None }
    }

    pub fn num_parameters(&self) -> usize {
        self.predictor.num_parameters() + DESCRIPTOR_LEN
    }

    /// `C_p(X)` for one resolution. In grid mode a resolution that leaves
    /// fewer than two cells collapses the whole sequence into one event.
    pub fn coarsen_view(&self, seq: &EventSequence, p: f64) -> Result<EventSequence> {
        if self.mode == CoarsenMode::Grid && ceil_count(p, seq.len()) < 2 {
            seq.check_coarsened()?;
            return Ok(seq.with_events(vec![merge_events(&seq.events)]));
        }
        let spec = CoarseningSpec { mode: self.mode, p, interval: self.interval, snap_to_grid: false };
        coarsen(seq, &spec)
    }

    pub fn views(&self, seq: &EventSequence, codec: &FeatureCodec) -> Result<Vec<ResolutionView>> {
        self.resolutions
            .iter()
            .map(|&p| {
                let view = self.coarsen_view(seq, p)?;
                Ok(ResolutionView { features: codec.featurize(&view)?, descriptor: resolution_descriptor(&view, p) })
            })
            .collect()
    }

    pub fn predict_views(&self, views: &[ResolutionView]) -> MrePrediction {
        let descriptors: Vec<_> = views.iter().map(|v| v.descriptor).collect();
        let alpha = attention_weights(&descriptors, &self.beta);
        let per_resolution: Vec<Vec<f64>> = views
            .iter()
            .map(|v| self.predictor.forward(v.features.view()).to_vec())
            .collect();
        let mut combined = vec![0.0; self.predictor.outputs()];
        for (a, f) in alpha.iter().zip(&per_resolution) {
            for (g, v) in combined.iter_mut().zip(f) {
                *g += a * v;
            }
        }
        MrePrediction { combined, per_resolution, alpha }
    }

    pub fn predict(&self, seq: &EventSequence, codec: &FeatureCodec) -> Result<Vec<f64>> {
        Ok(self.predict_views(&self.views(seq, codec)?).combined)
    }

    /// Loss of the mixture plus its gradient. Parameter gradients go into
    /// `grad` (predictor layout followed by `beta`) when given; the return
    /// value also carries the gradient with respect to every view's
    /// features.
    pub(crate) fn backward(
        &self,
        views: &[ResolutionView],
        targets: &[f64],
        mut grad: Option<&mut Array1<f64>>,
    ) -> (f64, Vec<Array2<f64>>) {
        let p = &self.predictor;
        let passes: Vec<_> = views.iter().map(|v| p.pass(v.features.view())).collect();
        let outs: Vec<Array1<f64>> = passes.iter().map(|ps| p.head(&ps.logits)).collect();
        let descriptors: Vec<_> = views.iter().map(|v| v.descriptor).collect();
        let alpha = attention_weights(&descriptors, &self.beta);
        let s = p.outputs();
        let mut g = Array1::<f64>::zeros(s);
        for (a, f) in alpha.iter().zip(&outs) {
            g.scaled_add(*a, f);
        }
        let task = p.task();
        let loss = task.loss(g.as_slice().expect("contiguous"), targets);

        // dL/dg
        let dg: Array1<f64> = match task {
            Task::Classification => g
                .iter()
                .zip(targets)
                .map(|(&gj, &y)| {
                    let gc = gj.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR);
                    (gc - y) / (gc * (1.0 - gc)) / s as f64
                })
                .collect(),
            Task::Regression => g.iter().zip(targets).map(|(&gj, &y)| 2.0 * (gj - y) / s as f64).collect(),
        };

        let n_theta = p.num_parameters();
        let mut dbeta = [0.0; DESCRIPTOR_LEN];
        let mut input_grads = Vec::with_capacity(views.len());
        for (k, (pass, f)) in passes.iter().zip(&outs).enumerate() {
            let dz: Array1<f64> = match task {
                Task::Classification => &dg * &f.mapv(|v| v * (1.0 - v)) * alpha[k],
                Task::Regression => &dg * alpha[k],
            };
            let dpooled = match grad.as_deref_mut() {
                Some(grad) => {
                    let mut theta_grad = Array1::zeros(n_theta);
                    let dp = p.backward(pass, &dz, Some(&mut theta_grad));
                    grad.slice_mut(ndarray::s![..n_theta]).scaled_add(1.0, &theta_grad);
                    dp
                }
                None => p.backward(pass, &dz, None),
            };
            input_grads.push(p.unpool(pass, &dpooled));
            // d g / d score_k = alpha_k (f_k - g)
            let dscore: f64 = dg.iter().zip(f.iter().zip(&g)).map(|(d, (fk, gj))| d * alpha[k] * (fk - gj)).sum();
            for (db, x) in dbeta.iter_mut().zip(&views[k].descriptor) {
                *db += dscore * x;
            }
        }
        if let Some(grad) = grad {
            for (i, db) in dbeta.iter().enumerate() {
                grad[n_theta + i] += db;
            }
        }
        (loss, input_grads)
    }

    /// Gradient of the ensemble loss with respect to each view's features.
    pub fn input_gradients(&self, views: &[ResolutionView], targets: &[f64]) -> Vec<Array2<f64>> {
        self.backward(views, targets, None).1
    }

    pub fn loss(&self, views: &[ResolutionView], targets: &[f64]) -> f64 {
        let pred = self.predict_views(views);
        self.predictor.task().loss(&pred.combined, targets)
    }
}
