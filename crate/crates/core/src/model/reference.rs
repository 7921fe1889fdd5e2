//! Mean-pool + one-hidden-layer network used as the shared base predictor.

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, ArrayViewMut1, Axis};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::{Predictor, Task};

/// `pool -> relu(W1 x + b1) -> W2 h + b2 -> sigmoid | identity`.
///
/// Parameters live in one flat vector laid out as `W1` (hidden x input,
/// row-major), `b1`, `W2` (outputs x hidden), `b2`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferencePredictor {
    task: Task,
    input: usize,
    hidden: usize,
    outputs: usize,
    theta: Array1<f64>,
}

/// Intermediate values of one forward pass.
pub(crate) struct Pass {
    pooled: Array1<f64>,
    pre: Array1<f64>,
    hidden: Array1<f64>,
    pub(crate) logits: Array1<f64>,
    rows: usize,
}

impl ReferencePredictor {
    /// He-initialized weights, zero biases.
    pub fn new<R: Rng + ?Sized>(task: Task, input: usize, hidden: usize, outputs: usize, rng: &mut R) -> Self {
        let mut theta = Array1::zeros(Self::param_len(input, hidden, outputs));
        let w1 = Normal::new(0.0, (2.0 / input.max(1) as f64).sqrt()).expect("finite std");
        let w2 = Normal::new(0.0, (1.0 / hidden.max(1) as f64).sqrt()).expect("finite std");
        let n1 = hidden * input;
        for v in theta.slice_mut(s![..n1]) {
            *v = w1.sample(rng);
        }
        let off = n1 + hidden;
        for v in theta.slice_mut(s![off..off + outputs * hidden]) {
            *v = w2.sample(rng);
        }
        ReferencePredictor { task, input, hidden, outputs, theta }
    }

    /// Rebuilds a predictor from a flat parameter vector.
    pub fn from_parameters(task: Task, input: usize, hidden: usize, outputs: usize, theta: Vec<f64>) -> Option<Self> {
        (theta.len() == Self::param_len(input, hidden, outputs))
            .then(|| ReferencePredictor { task, input, hidden, outputs, theta: Array1::from(theta) })
    }

    pub fn param_len(input: usize, hidden: usize, outputs: usize) -> usize {
        hidden * input + hidden + outputs * hidden + outputs
    }

    pub fn num_parameters(&self) -> usize {
        self.theta.len()
    }

    pub fn input_dim(&self) -> usize {
        self.input
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden
    }

    pub fn parameters(&self) -> ArrayView1<'_, f64> {
        self.theta.view()
    }

    pub(crate) fn parameters_mut(&mut self) -> ArrayViewMut1<'_, f64> {
        self.theta.view_mut()
    }

    fn w1(&self) -> ArrayView2<'_, f64> {
        let n = self.hidden * self.input;
        self.theta.slice(s![..n]).into_shape_with_order((self.hidden, self.input)).expect("layout")
    }

    fn b1(&self) -> ArrayView1<'_, f64> {
        let off = self.hidden * self.input;
        self.theta.slice(s![off..off + self.hidden])
    }

    fn w2(&self) -> ArrayView2<'_, f64> {
        let off = self.hidden * self.input + self.hidden;
        self.theta
            .slice(s![off..off + self.outputs * self.hidden])
            .into_shape_with_order((self.outputs, self.hidden))
            .expect("layout")
    }

    fn b2(&self) -> ArrayView1<'_, f64> {
        let off = self.hidden * self.input + self.hidden + self.outputs * self.hidden;
        self.theta.slice(s![off..])
    }

    pub(crate) fn pass(&self, features: ArrayView2<'_, f64>) -> Pass {
        assert_eq!(features.ncols(), self.input, "feature width mismatch");
        let rows = features.nrows();
        let pooled = features.mean_axis(Axis(0)).unwrap_or_else(|| Array1::zeros(self.input));
        let pre = self.w1().dot(&pooled) + self.b1();
        let hidden = pre.mapv(|v| v.max(0.0));
        let logits = self.w2().dot(&hidden) + self.b2();
        Pass { pooled, pre, hidden, logits, rows }
    }

    pub(crate) fn head(&self, logits: &Array1<f64>) -> Array1<f64> {
        match self.task {
            Task::Classification => logits.mapv(sigmoid),
            Task::Regression => logits.clone(),
        }
    }

    /// Gradient of the loss with respect to the logits.
    pub(crate) fn logit_gradient(&self, outputs: &Array1<f64>, targets: &[f64]) -> Array1<f64> {
        let s = self.outputs as f64;
        let y = ArrayView1::from(targets);
        match self.task {
            Task::Classification => (outputs - &y) / s,
            Task::Regression => (outputs - &y) * (2.0 / s),
        }
    }

    /// Backpropagates `dlogits`, accumulating parameter gradients into
    /// `grad` (same layout as the parameters) and returning the gradient
    /// with respect to the pooled input.
    pub(crate) fn backward(&self, pass: &Pass, dlogits: &Array1<f64>, grad: Option<&mut Array1<f64>>) -> Array1<f64> {
        let dhidden = self.w2().t().dot(dlogits);
        let dpre = &dhidden * &pass.pre.mapv(|v| if v > 0.0 { 1.0 } else { 0.0 });
        if let Some(grad) = grad {
            let (h, d, o) = (self.hidden, self.input, self.outputs);
            let mut off = 0;
            {
                let mut gw1 = grad.slice_mut(s![off..off + h * d]).into_shape_with_order((h, d)).expect("layout");
                for (i, mut row) in gw1.outer_iter_mut().enumerate() {
                    row.scaled_add(dpre[i], &pass.pooled);
                }
            }
            off += h * d;
            grad.slice_mut(s![off..off + h]).scaled_add(1.0, &dpre);
            off += h;
            {
                let mut gw2 = grad.slice_mut(s![off..off + o * h]).into_shape_with_order((o, h)).expect("layout");
                for (k, mut row) in gw2.outer_iter_mut().enumerate() {
                    row.scaled_add(dlogits[k], &pass.hidden);
                }
            }
            off += o * h;
            grad.slice_mut(s![off..]).scaled_add(1.0, dlogits);
        }
        self.w1().t().dot(&dpre)
    }

    /// Spreads a pooled-input gradient back over the `rows` feature rows.
    pub(crate) fn unpool(&self, pass: &Pass, dpooled: &Array1<f64>) -> Array2<f64> {
        let scaled = dpooled / pass.rows as f64;
        let mut out = Array2::zeros((pass.rows, self.input));
        for mut row in out.outer_iter_mut() {
            row.assign(&scaled);
        }
        out
    }

    /// Loss and parameter gradient for one sample; the gradient is added
    /// into `grad`.
    pub(crate) fn accumulate(&self, features: ArrayView2<'_, f64>, targets: &[f64], grad: &mut Array1<f64>) -> f64 {
        let pass = self.pass(features);
        let out = self.head(&pass.logits);
        let loss = self.task.loss(out.as_slice().expect("contiguous"), targets);
        let dlogits = self.logit_gradient(&out, targets);
        self.backward(&pass, &dlogits, Some(grad));
        loss
    }
}

impl Predictor for ReferencePredictor {
    fn task(&self) -> Task {
        self.task
    }

    fn outputs(&self) -> usize {
        self.outputs
    }

    fn forward(&self, features: ArrayView2<'_, f64>) -> Array1<f64> {
        let pass = self.pass(features);
        self.head(&pass.logits)
    }

    fn input_gradient(&self, features: ArrayView2<'_, f64>, targets: &[f64]) -> Array2<f64> {
        let pass = self.pass(features);
        let out = self.head(&pass.logits);
        let dlogits = self.logit_gradient(&out, targets);
        let dpooled = self.backward(&pass, &dlogits, None);
        self.unpool(&pass, &dpooled)
    }
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_features(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
        Array2::from_shape_fn((rows, cols), |_| rng.random_range(-1.5..1.5))
    }

    /// Central differences of the loss, one entry at a time.
    fn numeric_gradient(p: &impl Predictor, x: &Array2<f64>, y: &[f64], step: f64) -> Array2<f64> {
        let mut g = Array2::zeros(x.raw_dim());
        for idx in ndarray::indices(x.raw_dim()) {
            let mut plus = x.clone();
            plus[idx] += step;
            let mut minus = x.clone();
            minus[idx] -= step;
            g[idx] = (p.loss(plus.view(), y) - p.loss(minus.view(), y)) / (2.0 * step);
        }
        g
    }

    fn rel_err(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
        let diff = (a - b).mapv(|v| v * v).sum().sqrt();
        let scale = a.mapv(|v| v * v).sum().sqrt().max(b.mapv(|v| v * v).sum().sqrt()).max(1e-12);
        diff / scale
    }

    #[test]
    fn input_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for (task, outputs) in [(Task::Classification, 1), (Task::Classification, 3), (Task::Regression, 1)] {
            let p = ReferencePredictor::new(task, 6, 16, outputs, &mut rng);
            let x = random_features(&mut rng, 5, 6);
            let y: Vec<f64> = (0..outputs).map(|k| (k % 2) as f64).collect();
            let err = rel_err(&p.input_gradient(x.view(), &y), &numeric_gradient(&p, &x, &y, 1e-5));
            assert!(err < 1e-4, "{task}: {err}");
        }
    }

    #[test]
    fn parameter_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let p = ReferencePredictor::new(Task::Classification, 4, 8, 2, &mut rng);
        let x = random_features(&mut rng, 3, 4);
        let y = [1.0, 0.0];
        let mut grad = Array1::zeros(p.num_parameters());
        p.accumulate(x.view(), &y, &mut grad);
        for i in (0..p.num_parameters()).step_by(3) {
            let mut plus = p.clone();
            plus.theta[i] += 1e-6;
            let mut minus = p.clone();
            minus.theta[i] -= 1e-6;
            let fd = (plus.loss(x.view(), &y) - minus.loss(x.view(), &y)) / 2e-6;
            assert!((fd - grad[i]).abs() < 1e-6 * fd.abs().max(1.0), "param {i}: {fd} vs {}", grad[i]);
        }
    }

    #[test]
    fn duplicated_rows_get_equal_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = ReferencePredictor::new(Task::Classification, 3, 8, 1, &mut rng);
        let mut x = random_features(&mut rng, 4, 3);
        let row0 = x.row(0).to_owned();
        x.row_mut(2).assign(&row0);
        let g = p.input_gradient(x.view(), &[1.0]);
        assert_eq!(g.row(0), g.row(2));
    }

    #[test]
    fn constant_predictor_has_zero_gradient() {
        let p = ReferencePredictor::from_parameters(Task::Classification, 2, 2, 1, vec![0.0; 9]).unwrap();
        let x = Array2::from_elem((3, 2), 0.7);
        assert_eq!(p.forward(x.view())[0], 0.5);
        assert!(p.input_gradient(x.view(), &[1.0]).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn outputs_are_probabilities() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p = ReferencePredictor::new(Task::Classification, 5, 32, 4, &mut rng);
        let x = random_features(&mut rng, 7, 5) * 100.0;
        assert!(p.forward(x.view()).iter().all(|&v| (0.0..=1.0).contains(&v) && v.is_finite()));
    }

    #[test]
    fn sigmoid_is_stable() {
        assert_eq!(sigmoid(-1000.0), 0.0);
        assert_eq!(sigmoid(1000.0), 1.0);
        assert_eq!(sigmoid(0.0), 0.5);
    }
}
