//! One-hidden-layer MLP classifier trained with the rewritten losses.
//!
//! `f(x) = softmax(W2^T relu(W1^T x + b1) + b2)`, all in `f64`.

mod adam;
mod io;
mod train;

pub use adam::{AdamConfig, AdamState};
pub use io::{read_params, write_params, PARAMS_MAGIC};
pub use train::{
    dataset_loss, evaluate, train, train_with_trajectory, EpochMetrics, Evaluation, TestData,
    TrainConfig, TrainOutcome, TrainingData,
};

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, ArrayViewMut1, ArrayViewMut2, Axis};
use rand::Rng;

use crate::combinatorics::{ClassSpace, LabelSubset};
use crate::error::{Error, Result};
use crate::losses::{BaseLoss, ScoreVector, Supervision};

/// Weights and biases stored contiguously as `w1 (d x H)`, `b1 (H)`,
/// `w2 (H x K)`, `b2 (K)`, each row-major.
///
/// Gradients use the same layout.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpParams {
    d: usize,
    h: usize,
    k: usize,
    data: Vec<f64>,
}

impl MlpParams {
    pub fn zeros(d: usize, h: usize, k: usize) -> Result<Self> {
        if d == 0 || h == 0 || k < 2 {
            return Err(Error::ShapeMismatch(format!(
                "invalid MLP shape d={d}, H={h}, K={k}"
            )));
        }
        Ok(Self {
            d,
            h,
            k,
            data: vec![0.0; d * h + h + h * k + k],
        })
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init<R: Rng + ?Sized>(d: usize, h: usize, k: usize, rng: &mut R) -> Result<Self> {
        let mut params = Self::zeros(d, h, k)?;
        let limit1 = (6.0 / (d + h) as f64).sqrt();
        let limit2 = (6.0 / (h + k) as f64).sqrt();
        for w in params.w1_mut().iter_mut() {
            *w = rng.random_range(-limit1..limit1);
        }
        for w in params.w2_mut().iter_mut() {
            *w = rng.random_range(-limit2..limit2);
        }
        Ok(params)
    }

    pub(crate) fn from_parts(d: usize, h: usize, k: usize, data: Vec<f64>) -> Result<Self> {
        let zeros = Self::zeros(d, h, k)?;
        if data.len() != zeros.data.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} parameters for shape d={d}, H={h}, K={k}",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite parameter".into()));
        }
        Ok(Self { data, ..zeros })
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            data: vec![0.0; self.data.len()],
            ..*self
        }
    }

    pub fn input_dim(&self) -> usize {
        self.d
    }

    pub fn hidden(&self) -> usize {
        self.h
    }

    pub fn classes(&self) -> usize {
        self.k
    }

    pub fn space(&self) -> ClassSpace {
        ClassSpace::new(self.k).expect("validated at construction")
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    fn offsets(&self) -> [usize; 4] {
        let b1 = self.d * self.h;
        let w2 = b1 + self.h;
        let b2 = w2 + self.h * self.k;
        [0, b1, w2, b2]
    }

    pub fn w1(&self) -> ArrayView2<'_, f64> {
        let [w1, b1, ..] = self.offsets();
        ArrayView2::from_shape((self.d, self.h), &self.data[w1..b1]).expect("layout")
    }

    pub fn b1(&self) -> ArrayView1<'_, f64> {
        let [_, b1, w2, _] = self.offsets();
        ArrayView1::from(&self.data[b1..w2])
    }

    pub fn w2(&self) -> ArrayView2<'_, f64> {
        let [.., w2, b2] = self.offsets();
        ArrayView2::from_shape((self.h, self.k), &self.data[w2..b2]).expect("layout")
    }

    pub fn b2(&self) -> ArrayView1<'_, f64> {
        let [.., b2] = self.offsets();
        ArrayView1::from(&self.data[b2..])
    }

    fn split_mut(
        &mut self,
    ) -> (
        ArrayViewMut2<'_, f64>,
        ArrayViewMut1<'_, f64>,
        ArrayViewMut2<'_, f64>,
        ArrayViewMut1<'_, f64>,
    ) {
        let (d, h, k) = (self.d, self.h, self.k);
        let (w1, rest) = self.data.split_at_mut(d * h);
        let (b1, rest) = rest.split_at_mut(h);
        let (w2, b2) = rest.split_at_mut(h * k);
        (
            ArrayViewMut2::from_shape((d, h), w1).expect("layout"),
            ArrayViewMut1::from(b1),
            ArrayViewMut2::from_shape((h, k), w2).expect("layout"),
            ArrayViewMut1::from(b2),
        )
    }

    pub fn w1_mut(&mut self) -> ArrayViewMut2<'_, f64> {
        self.split_mut().0
    }

    pub fn b1_mut(&mut self) -> ArrayViewMut1<'_, f64> {
        self.split_mut().1
    }

    pub fn w2_mut(&mut self) -> ArrayViewMut2<'_, f64> {
        self.split_mut().2
    }

    pub fn b2_mut(&mut self) -> ArrayViewMut1<'_, f64> {
        self.split_mut().3
    }

    fn check_input(&self, cols: usize) -> Result<()> {
        if cols != self.d {
            return Err(Error::ShapeMismatch(format!(
                "input has {cols} features, model expects {}",
                self.d
            )));
        }
        Ok(())
    }

    /// Class probabilities for one instance.
    pub fn forward(&self, x: &[f64]) -> Result<ScoreVector> {
        self.check_input(x.len())?;
        let batch = ArrayView2::from_shape((1, x.len()), x).expect("row");
        let probs = self.forward_batch(batch)?;
        ScoreVector::new(probs.row(0).to_vec())
    }

    /// Class probabilities for each row of `x`.
    pub fn forward_batch(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.check_input(x.ncols())?;
        Ok(self.activations(x).probs)
    }

    fn activations(&self, x: ArrayView2<'_, f64>) -> Activations {
        let mut pre_hidden = x.dot(&self.w1());
        pre_hidden += &self.b1();
        let hidden = pre_hidden.mapv(|v| v.max(0.0));
        let mut logits = hidden.dot(&self.w2());
        logits += &self.b2();
        softmax_rows(&mut logits);
        Activations {
            pre_hidden,
            hidden,
            probs: logits,
        }
    }

    /// Mean loss over a batch and its exact gradient.
    ///
    /// Labels are interpreted through `supervision`; with MAE as the base
    /// loss, the subgradient of `|t|` at 0 is 0.
    pub fn loss_and_grad(
        &self,
        x: ArrayView2<'_, f64>,
        labels: &[LabelSubset],
        supervision: Supervision,
        base: BaseLoss,
    ) -> Result<(f64, MlpParams)> {
        if labels.len() != x.nrows() {
            return Err(Error::ShapeMismatch(format!(
                "{} labels for {} rows",
                labels.len(),
                x.nrows()
            )));
        }
        let weights = class_weight_matrix(labels, supervision, self.space())?;
        self.loss_and_grad_weighted(x, weights.view(), base)
    }

    /// As [`MlpParams::loss_and_grad`], with labels already turned into
    /// per-class loss weights (one row per instance).
    pub fn loss_and_grad_weighted(
        &self,
        x: ArrayView2<'_, f64>,
        weights: ArrayView2<'_, f64>,
        base: BaseLoss,
    ) -> Result<(f64, MlpParams)> {
        self.check_input(x.ncols())?;
        let n = x.nrows();
        if n == 0 || weights.dim() != (n, self.k) {
            return Err(Error::ShapeMismatch(format!(
                "batch of {n} rows with weight matrix {:?}",
                weights.dim()
            )));
        }
        let act = self.activations(x);
        let scale = 1.0 / n as f64;
        let mut total = 0.0;
        let mut d_logits = Array2::<f64>::zeros((n, self.k));
        for ((f, w), mut out) in act
            .probs
            .outer_iter()
            .zip(weights.outer_iter())
            .zip(d_logits.outer_iter_mut())
        {
            let f = f.as_slice().expect("standard layout");
            let w = w.to_vec();
            let losses = base.class_losses(f);
            total += losses.iter().zip(&w).map(|(l, wy)| l * wy).sum::<f64>();
            let g = base.weighted_grad(f, &w);
            // softmax Jacobian: dz_j = f_j (g_j - <f, g>)
            let dot: f64 = f.iter().zip(&g).map(|(a, b)| a * b).sum();
            for ((o, &fj), &gj) in out.iter_mut().zip(f).zip(&g) {
                *o = fj * (gj - dot) * scale;
            }
        }

        let mut grad = self.zeros_like();
        {
            let (mut gw1, mut gb1, mut gw2, mut gb2) = grad.split_mut();
            gw2.assign(&act.hidden.t().dot(&d_logits));
            gb2.assign(&d_logits.sum_axis(Axis(0)));
            let mut d_hidden = d_logits.dot(&self.w2().t());
            d_hidden.zip_mut_with(&act.pre_hidden, |g, &z| {
                if z <= 0.0 {
                    *g = 0.0;
                }
            });
            gw1.assign(&x.t().dot(&d_hidden));
            gb1.assign(&d_hidden.sum_axis(Axis(0)));
        }
        Ok((total * scale, grad))
    }
}

struct Activations {
    pre_hidden: Array2<f64>,
    hidden: Array2<f64>,
    probs: Array2<f64>,
}

fn softmax_rows(logits: &mut Array2<f64>) {
    for mut row in logits.outer_iter_mut() {
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        row.mapv_inplace(|v| (v - max).exp());
        let total = row.sum();
        row.mapv_inplace(|v| v / total);
    }
}

/// Per-class loss weights for each label, stacked as rows.
pub fn class_weight_matrix(
    labels: &[LabelSubset],
    supervision: Supervision,
    space: ClassSpace,
) -> Result<Array2<f64>> {
    supervision.validate(space)?;
    let mut out = Array2::zeros((labels.len(), space.k()));
    for (label, mut row) in labels.iter().zip(out.outer_iter_mut()) {
        row.assign(&Array1::from(supervision.class_weights(label, space)?));
    }
    Ok(out)
}

/// Index of the largest score, ties going to the lowest index (0-based).
pub fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::labeling::{rng_from_seed, QuestionType};
    use crate::losses::coeff_whichone;
    use ndarray::Array2;
    use rand::seq::IndexedRandom;

    fn random_batch(n: usize, d: usize, seed: u64) -> Array2<f64> {
        let mut rng = rng_from_seed(seed);
        Array2::from_shape_fn((n, d), |_| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn zero_params_give_uniform_output() {
        let params = MlpParams::zeros(4, 3, 5).unwrap();
        let f = params.forward(&[0.3, -1.0, 2.0, 0.0]).unwrap();
        for p in f.as_slice() {
            assert!((p - 0.2).abs() < 1e-15);
        }
    }

    #[test]
    fn outputs_on_simplex_and_shift_invariant() {
        let mut rng = rng_from_seed(1);
        let mut params = MlpParams::init(6, 8, 4, &mut rng).unwrap();
        for b in params.b2_mut().iter_mut() {
            *b = rng.random_range(-2.0..2.0);
        }
        let x = random_batch(10, 6, 2);
        let probs = params.forward_batch(x.view()).unwrap();
        for row in probs.outer_iter() {
            assert!((row.sum() - 1.0).abs() < 1e-9);
            assert!(row.iter().all(|&p| p >= 0.0));
        }
        let mut shifted = params.clone();
        shifted.b2_mut().mapv_inplace(|b| b + 3.7);
        let again = shifted.forward_batch(x.view()).unwrap();
        for (a, b) in probs.iter().zip(again.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_wrong_input_width() {
        let params = MlpParams::zeros(4, 3, 5).unwrap();
        assert!(matches!(
            params.forward(&[1.0, 2.0]),
            Err(Error::ShapeMismatch(_))
        ));
    }

    #[test]
    fn argmax_ties_go_low() {
        assert_eq!(argmax(&[0.2, 0.4, 0.4]), 1);
        assert_eq!(argmax(&[0.5, 0.5]), 0);
        assert_eq!(argmax(&[0.1, 0.2, 0.7]), 2);
    }

    fn fd_max_rel_error(
        params: &MlpParams,
        x: &Array2<f64>,
        labels: &[LabelSubset],
        sup: Supervision,
    ) -> f64 {
        let (_, grad) = params
            .loss_and_grad(x.view(), labels, sup, BaseLoss::Mae)
            .unwrap();
        let h = 1e-5;
        let mut worst: f64 = 0.0;
        for idx in 0..params.as_slice().len() {
            let mut plus = params.clone();
            plus.as_mut_slice()[idx] += h;
            let mut minus = params.clone();
            minus.as_mut_slice()[idx] -= h;
            let lp = plus
                .loss_and_grad(x.view(), labels, sup, BaseLoss::Mae)
                .unwrap()
                .0;
            let lm = minus
                .loss_and_grad(x.view(), labels, sup, BaseLoss::Mae)
                .unwrap()
                .0;
            let numeric = (lp - lm) / (2.0 * h);
            let analytic = grad.as_slice()[idx];
            let rel = (numeric - analytic).abs() / analytic.abs().max(numeric.abs()).max(1e-6);
            worst = worst.max(rel);
        }
        worst
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = rng_from_seed(5);
        let params = MlpParams::init(8, 6, 4, &mut rng).unwrap();
        let x = random_batch(5, 8, 6);
        let space = params.space();
        let labels: Vec<LabelSubset> = (1..=5)
            .map(|i| {
                let q = crate::labeling::draw_question_set(
                    &mut rng,
                    &crate::labeling::QuestionSpec::new(QuestionType::WhichOne, 2, space).unwrap(),
                );
                if q.contains(i % 4 + 1) {
                    LabelSubset::singleton(i % 4 + 1).unwrap()
                } else {
                    crate::combinatorics::complement(space, &q).unwrap()
                }
            })
            .collect();
        let sup = Supervision::Qa {
            qtype: QuestionType::WhichOne,
            items: 2,
        };
        let err = fd_max_rel_error(&params, &x, &labels, sup);
        assert!(err < 1e-4, "max relative error {err}");
    }

    #[test]
    fn zero_coefficient_gradient_equals_ordinary() {
        assert_eq!(coeff_whichone(4, 3).unwrap(), 0.0);
        let mut rng = rng_from_seed(8);
        let params = MlpParams::init(5, 7, 4, &mut rng).unwrap();
        let x = random_batch(9, 5, 9);
        let labels: Vec<LabelSubset> = (0..9)
            .map(|_| LabelSubset::singleton(*[1, 2, 3, 4].choose(&mut rng).unwrap()).unwrap())
            .collect();
        let qa = params
            .loss_and_grad(
                x.view(),
                &labels,
                Supervision::Qa {
                    qtype: QuestionType::WhichOne,
                    items: 3,
                },
                BaseLoss::Mae,
            )
            .unwrap();
        let ordinary = params
            .loss_and_grad(x.view(), &labels, Supervision::Ordinary, BaseLoss::Mae)
            .unwrap();
        assert_eq!(qa.0, ordinary.0);
        assert_eq!(qa.1, ordinary.1);
    }

    #[test]
    fn identical_batch_rows_match_single_sample() {
        let mut rng = rng_from_seed(10);
        let params = MlpParams::init(3, 4, 3, &mut rng).unwrap();
        let one = random_batch(1, 3, 11);
        let many = Array2::from_shape_fn((6, 3), |(_, j)| one[[0, j]]);
        let label = vec![LabelSubset::new([2, 3]).unwrap()];
        let sup = Supervision::Qa {
            qtype: QuestionType::IsIn,
            items: 1,
        };
        let (l1, g1) = params
            .loss_and_grad(one.view(), &label, sup, BaseLoss::Mae)
            .unwrap();
        let (l6, g6) = params
            .loss_and_grad(many.view(), &vec![label[0].clone(); 6], sup, BaseLoss::Mae)
            .unwrap();
        assert!((l1 - l6).abs() < 1e-12);
        for (a, b) in g1.as_slice().iter().zip(g6.as_slice()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn invalid_label_sizes_rejected() {
        let params = MlpParams::zeros(2, 2, 4).unwrap();
        let x = random_batch(1, 2, 0);
        let labels = vec![LabelSubset::new([1, 2]).unwrap()];
        let sup = Supervision::Qa {
            qtype: QuestionType::WhichOne,
            items: 1,
        };
        assert!(matches!(
            params.loss_and_grad(x.view(), &labels, sup, BaseLoss::Mae),
            Err(Error::InvalidLabel(_))
        ));
    }
}
