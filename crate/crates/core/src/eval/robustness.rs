//! Input-sensitivity probes: FGSM perturbations and invariance gaps.

use ndarray::{Array2, ArrayView2, Zip};

use crate::codec::FeatureCodec;
use crate::error::{Error, Result};
use crate::model::{Model, Predictor, ResolutionView};
use crate::sequence::{EventSequence, LabeledSequence};

/// `x + eps * sign(grad)` with `sign(0) = 0`.
///
/// Every entry moves by at most `eps` as measured in floating point: a sum
/// that rounds past the bound is pulled back one ulp at a time.
pub fn fgsm(features: ArrayView2<'_, f64>, eps: f64, gradient: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    if !(eps >= 0.0 && eps.is_finite()) {
        return Err(Error::Config(format!("FGSM step must be finite and nonnegative, got {eps}")));
    }
    if features.dim() != gradient.dim() {
        return Err(Error::DimensionMismatch { expected: features.len(), got: gradient.len() });
    }
    let mut out = features.to_owned();
    Zip::from(&mut out).and(&gradient).for_each(|x, &g| {
        if eps == 0.0 || g == 0.0 || g.is_nan() {
            return;
        }
        let orig = *x;
        let mut moved = if g > 0.0 { orig + eps } else { orig - eps };
        while (moved - orig).abs() > eps {
            moved = if g > 0.0 { moved.next_down() } else { moved.next_up() };
        }
        *x = moved;
    });
    Ok(out)
}

/// Predictions after an FGSM step of size `eps` on every input, using the
/// true label to build the gradient. For an ensemble, each coarsened view
/// is perturbed along its own share of the ensemble-loss gradient.
pub fn fgsm_predictions(model: &Model, codec: &FeatureCodec, data: &[LabeledSequence], eps: f64) -> Result<Vec<Vec<f64>>> {
    data.iter()
        .map(|item| {
            let targets = item.label.as_targets();
            match model {
                Model::Single(p) => {
                    let x = codec.featurize(&item.sequence)?;
                    let g = p.input_gradient(x.view(), &targets);
                    let adv = fgsm(x.view(), eps, g.view())?;
                    Ok(p.forward(adv.view()).to_vec())
                }
                Model::Mre(m) => {
                    let views = m.views(&item.sequence, codec)?;
                    let grads = m.input_gradients(&views, &targets);
                    let adv: Vec<ResolutionView> = views
                        .iter()
                        .zip(&grads)
                        .map(|(v, g)| {
                            Ok(ResolutionView { features: fgsm(v.features.view(), eps, g.view())?, descriptor: v.descriptor })
                        })
                        .collect::<Result<_>>()?;
                    Ok(m.predict_views(&adv).combined)
                }
            }
        })
        .collect()
}

/// Mean absolute change of every output when each sequence is replaced by
/// `transform(index, sequence)`.
pub fn invariance_gap<P, T>(predict: P, sequences: &[EventSequence], mut transform: T) -> Result<Vec<f64>>
where
    P: Fn(&EventSequence) -> Result<Vec<f64>>,
    T: FnMut(usize, &EventSequence) -> Result<EventSequence>,
{
    if sequences.is_empty() {
        return Err(Error::EmptyDataset("invariance gap needs sequences"));
    }
    let mut total: Vec<f64> = Vec::new();
    for (i, seq) in sequences.iter().enumerate() {
        let before = predict(seq)?;
        let after = predict(&transform(i, seq)?)?;
        if total.is_empty() {
            total = vec![0.0; before.len()];
        }
        for (acc, (a, b)) in total.iter_mut().zip(before.iter().zip(&after)) {
            *acc += (a - b).abs();
        }
    }
    let n = sequences.len() as f64;
    Ok(total.into_iter().map(|v| v / n).collect())
}
