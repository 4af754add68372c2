//! Base losses, the Q&A risk-rewriting losses, and risk evaluators.
//!
//! For a Q&A label `l`, the rewritten loss is
//! `sum_{y in l} L(f, y) - c * sum_{y not in l} L(f, y)`, where the
//! coefficient `c` depends on the procedure. Its expectation under the
//! Q&A label distribution equals the ordinary risk, so negative values are
//! kept as they are.

use serde::{Deserialize, Serialize};

use crate::combinatorics::{ClassId, ClassSpace, LabelSubset, PosteriorVector};
use crate::error::{invalid, Error, Result};
use crate::generative::{qa_pmf, Procedure};
use crate::labeling::{check_items, LabelingEvent, QuestionType};

/// Tolerance on the total mass of a [`ScoreVector`].
pub const SCORE_TOL: f64 = 1e-9;

/// Classifier output after softmax.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreVector {
    probs: Vec<f64>,
}

impl ScoreVector {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.len() < 2 {
            return invalid("score vector needs at least 2 classes");
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return invalid("scores must be finite and nonnegative");
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > SCORE_TOL {
            return invalid(format!("scores sum to {total}, not 1"));
        }
        Ok(Self { probs })
    }

    pub fn uniform(space: ClassSpace) -> Self {
        Self {
            probs: vec![1.0 / space.k() as f64; space.k()],
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.probs
    }

    pub fn k(&self) -> usize {
        self.probs.len()
    }

    pub fn space(&self) -> ClassSpace {
        ClassSpace::new(self.probs.len()).expect("at least two classes")
    }
}

/// Per-class loss `L(f, y)` plugged into the rewritten losses.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseLoss {
    /// `sum_k |f_k - onehot(y)_k|`, bounded by 2 on the simplex.
    #[default]
    Mae,
    /// `-ln f_y`. Unbounded, so the bound calculators do not apply to it.
    CrossEntropy,
}

const CE_FLOOR: f64 = 1e-300;

impl BaseLoss {
    /// `L(f, y)` for a 1-based class `y`.
    pub fn class_loss(self, f: &[f64], y: ClassId) -> f64 {
        match self {
            BaseLoss::Mae => f
                .iter()
                .enumerate()
                .map(|(k, &fk)| {
                    if k + 1 == y {
                        (fk - 1.0).abs()
                    } else {
                        fk.abs()
                    }
                })
                .sum(),
            BaseLoss::CrossEntropy => -f[y - 1].max(CE_FLOOR).ln(),
        }
    }

    /// `L(f, y)` for every class.
    pub fn class_losses(self, f: &[f64]) -> Vec<f64> {
        match self {
            BaseLoss::Mae => {
                let abs_total: f64 = f.iter().map(|v| v.abs()).sum();
                f.iter()
                    .map(|&fy| abs_total - fy.abs() + (fy - 1.0).abs())
                    .collect()
            }
            BaseLoss::CrossEntropy => f.iter().map(|&fy| -fy.max(CE_FLOOR).ln()).collect(),
        }
    }

    /// Gradient with respect to `f` of `sum_y weights[y] * L(f, y)`.
    ///
    /// The MAE subgradient of `|t|` at `t = 0` is taken to be 0.
    pub fn weighted_grad(self, f: &[f64], weights: &[f64]) -> Vec<f64> {
        debug_assert_eq!(f.len(), weights.len());
        match self {
            BaseLoss::Mae => {
                let total: f64 = weights.iter().sum();
                f.iter()
                    .zip(weights)
                    .map(|(&fk, &wk)| {
                        // d|f_k - [k = y]| / df_k summed over y with weights
                        (total - wk) * sign(fk) + wk * sign(fk - 1.0)
                    })
                    .collect()
            }
            BaseLoss::CrossEntropy => f
                .iter()
                .zip(weights)
                .map(|(&fk, &wk)| {
                    if wk == 0.0 {
                        0.0
                    } else {
                        -wk / fk.max(CE_FLOOR)
                    }
                })
                .collect(),
        }
    }
}

#[inline]
fn sign(t: f64) -> f64 {
    if t > 0.0 {
        1.0
    } else if t < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Mean absolute error against the one-hot encoding of `y`.
pub fn mae(f: &ScoreVector, y: ClassId) -> Result<f64> {
    f.space().check_class(y)?;
    Ok(BaseLoss::Mae.class_loss(f.as_slice(), y))
}

/// Negative-term coefficient of the which-one loss:
/// `(K-I)(K-I-1) / (I(2K-I-1))`.
pub fn coeff_whichone(k: usize, items: usize) -> Result<f64> {
    check_items(ClassSpace::new(k)?, items)?;
    let (k, i) = (k as f64, items as f64);
    Ok((k - i) * (k - i - 1.0) / (i * (2.0 * k - i - 1.0)))
}

/// Negative-term coefficient of the is-in loss:
/// `(2I^2 + K^2 - K(2I+1)) / (2I(K-I))`.
pub fn coeff_isin(k: usize, items: usize) -> Result<f64> {
    check_items(ClassSpace::new(k)?, items)?;
    let (k, i) = (k as f64, items as f64);
    Ok((2.0 * i * i + k * k - k * (2.0 * i + 1.0)) / (2.0 * i * (k - i)))
}

pub fn qa_coefficient(qtype: QuestionType, k: usize, items: usize) -> Result<f64> {
    match qtype {
        QuestionType::WhichOne => coeff_whichone(k, items),
        QuestionType::IsIn => coeff_isin(k, items),
    }
}

fn check_label_size(
    qtype: QuestionType,
    space: ClassSpace,
    items: usize,
    label: &LabelSubset,
) -> Result<()> {
    label.check_space(space)?;
    let sizes = Procedure::qa(qtype, items).support_sizes(space);
    if !sizes.contains(&label.len()) {
        return Err(Error::InvalidLabel(format!(
            "{qtype} label {label} has size {}, expected one of {sizes:?} for I={items}",
            label.len()
        )));
    }
    Ok(())
}

/// Rewritten loss from precomputed per-class base losses.
pub fn qa_loss_from_class_losses(
    qtype: QuestionType,
    class_losses: &[f64],
    label: &LabelSubset,
    items: usize,
) -> Result<f64> {
    let space = ClassSpace::new(class_losses.len())?;
    check_items(space, items)?;
    check_label_size(qtype, space, items, label)?;
    let coeff = qa_coefficient(qtype, space.k(), items)?;
    let mut inside = 0.0;
    let mut outside = 0.0;
    for (idx, &l) in class_losses.iter().enumerate() {
        if label.contains(idx + 1) {
            inside += l;
        } else {
            outside += l;
        }
    }
    Ok(inside - coeff * outside)
}

/// The Q&A loss of scores `f` for label `label`.
pub fn qa_loss(
    qtype: QuestionType,
    f: &ScoreVector,
    label: &LabelSubset,
    items: usize,
    base: BaseLoss,
) -> Result<f64> {
    qa_loss_from_class_losses(qtype, &base.class_losses(f.as_slice()), label, items)
}

/// How training labels are interpreted by the loss.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Supervision {
    /// Singleton ground-truth labels with the plain base loss.
    Ordinary,
    /// Q&A labels with the rewritten loss.
    Qa {
        qtype: QuestionType,
        #[serde(rename = "I")]
        items: usize,
    },
}

impl Supervision {
    pub fn validate(self, space: ClassSpace) -> Result<()> {
        match self {
            Supervision::Ordinary => Ok(()),
            Supervision::Qa { items, .. } => check_items(space, items),
        }
    }

    /// Per-class weights `w` such that the loss is `sum_y w[y] L(f, y)`.
    pub fn class_weights(self, label: &LabelSubset, space: ClassSpace) -> Result<Vec<f64>> {
        match self {
            Supervision::Ordinary => {
                if label.len() != 1 {
                    return Err(Error::InvalidLabel(format!(
                        "ordinary label {label} is not a singleton"
                    )));
                }
                label.check_space(space)?;
                let mut w = vec![0.0; space.k()];
                w[label.as_slice()[0] - 1] = 1.0;
                Ok(w)
            }
            Supervision::Qa { qtype, items } => {
                check_label_size(qtype, space, items, label)?;
                let outside = -qa_coefficient(qtype, space.k(), items)?;
                let mut w = vec![outside; space.k()];
                for c in label.iter() {
                    w[c - 1] = 1.0;
                }
                Ok(w)
            }
        }
    }
}

/// Ordinary risk and Q&A risk for one instance, each by enumeration.
///
/// Returns `(sum_y P(y|x) L_y, sum_l P(l|x) Lqa(l))`; the two coincide.
pub fn exact_risk_identity_check(
    qtype: QuestionType,
    posterior: &PosteriorVector,
    class_losses: &[f64],
    items: usize,
) -> Result<(f64, f64)> {
    risk_identity_with_coefficient(qtype, posterior, class_losses, items, None)
}

/// As [`exact_risk_identity_check`], optionally with a substituted
/// coefficient; used to confirm the checks catch a wrong one.
pub(crate) fn risk_identity_with_coefficient(
    qtype: QuestionType,
    posterior: &PosteriorVector,
    class_losses: &[f64],
    items: usize,
    coeff_override: Option<f64>,
) -> Result<(f64, f64)> {
    if class_losses.len() != posterior.k() {
        return Err(Error::ShapeMismatch(format!(
            "{} losses for {} classes",
            class_losses.len(),
            posterior.k()
        )));
    }
    posterior.space().ensure_enumerable()?;
    let ordinary = posterior
        .as_slice()
        .iter()
        .zip(class_losses)
        .map(|(p, l)| p * l)
        .sum();
    let pmf = qa_pmf(qtype, posterior, items)?;
    let mut rewritten = 0.0;
    for (label, p) in pmf.iter() {
        rewritten += p * qa_loss_from_class_losses(qtype, class_losses, label, items)?;
    }
    if let Some(coeff) = coeff_override {
        // shift every outside term from the true coefficient to `coeff`
        let true_coeff = qa_coefficient(qtype, posterior.k(), items)?;
        for (label, p) in pmf.iter() {
            let outside: f64 = class_losses
                .iter()
                .enumerate()
                .filter(|(idx, _)| !label.contains(idx + 1))
                .map(|(_, l)| l)
                .sum();
            rewritten -= p * (coeff - true_coeff) * outside;
        }
    }
    Ok((ordinary, rewritten))
}

/// Mean Q&A loss over labeled events; `scores` maps an instance id to `f(x)`.
pub fn empirical_qa_risk<F>(
    events: &[LabelingEvent],
    qtype: QuestionType,
    items: usize,
    base: BaseLoss,
    mut scores: F,
) -> Result<f64>
where
    F: FnMut(&str) -> Result<ScoreVector>,
{
    if events.is_empty() {
        return invalid("empirical risk of an empty event set");
    }
    let mut total = 0.0;
    for event in events {
        if event.qtype != qtype || event.items != items {
            return invalid(format!(
                "event for `{}` is {}/I={}, expected {qtype}/I={items}",
                event.instance_id, event.qtype, event.items
            ));
        }
        let f = scores(&event.instance_id)?;
        total += qa_loss(qtype, &f, &event.qa_label, items, base)?;
    }
    Ok(total / events.len() as f64)
}

/// Mean base loss over ordinary-labeled test pairs.
pub fn empirical_test_risk<'a, I>(pairs: I, base: BaseLoss) -> Result<f64>
where
    I: IntoIterator<Item = (&'a ScoreVector, ClassId)>,
{
    let mut total = 0.0;
    let mut n = 0usize;
    for (f, y) in pairs {
        f.space().check_class(y)?;
        total += base.class_loss(f.as_slice(), y);
        n += 1;
    }
    if n == 0 {
        return invalid("empirical risk of an empty test set");
    }
    Ok(total / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::labeling::rng_from_seed;
    use proptest::prelude::*;
    use rand::Rng;

    fn set(ids: &[ClassId]) -> LabelSubset {
        LabelSubset::new(ids.iter().copied()).unwrap()
    }

    fn scores(v: &[f64]) -> ScoreVector {
        ScoreVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn mae_values() {
        let f = scores(&[0.7, 0.2, 0.1]);
        assert!((mae(&f, 1).unwrap() - 0.6).abs() < 1e-12);
        assert_eq!(mae(&scores(&[0.0, 1.0, 0.0]), 2).unwrap(), 0.0);
        assert!(mae(&f, 4).is_err());
    }

    #[test]
    fn coefficients() {
        assert!((coeff_whichone(10, 3).unwrap() - 0.875).abs() < 1e-15);
        for k in 2..=12 {
            assert_eq!(coeff_whichone(k, k - 1).unwrap(), 0.0);
        }
        assert!((coeff_isin(10, 5).unwrap() - 0.8).abs() < 1e-15);
        for k in 2..=12 {
            for i in 1..k {
                assert!((coeff_isin(k, i).unwrap() - coeff_isin(k, k - i).unwrap()).abs() < 1e-12);
            }
        }
        for k in 3..=12 {
            for i in 1..k - 1 {
                assert!(coeff_whichone(k, i).unwrap() > coeff_whichone(k, i + 1).unwrap());
            }
        }
        assert!(coeff_whichone(10, 10).is_err());
        assert!(coeff_isin(10, 0).is_err());
    }

    #[test]
    fn qa_loss_worked_example() {
        let f = scores(&[0.7, 0.2, 0.1]);
        let v = qa_loss(QuestionType::WhichOne, &f, &set(&[2, 3]), 1, BaseLoss::Mae).unwrap();
        assert!((v - 3.1).abs() < 1e-12, "{v}");
    }

    #[test]
    fn qa_loss_reduces_to_base_at_k_minus_one() {
        let f = scores(&[0.1, 0.6, 0.2, 0.1]);
        for y in 1..=4 {
            let v = qa_loss(QuestionType::WhichOne, &f, &set(&[y]), 3, BaseLoss::Mae).unwrap();
            assert!((v - mae(&f, y).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn qa_loss_rejects_bad_sizes() {
        let f = scores(&[0.25; 4]);
        let err = qa_loss(QuestionType::WhichOne, &f, &set(&[1, 2]), 1, BaseLoss::Mae).unwrap_err();
        assert!(matches!(err, Error::InvalidLabel(_)));
        let err = qa_loss(QuestionType::IsIn, &f, &set(&[1]), 2, BaseLoss::Mae).unwrap_err();
        assert!(matches!(err, Error::InvalidLabel(_)));
    }

    #[test]
    fn risk_identity_worked_example() {
        let p = PosteriorVector::new(vec![0.5, 0.3, 0.2]).unwrap();
        for qtype in QuestionType::ALL {
            let (a, b) = exact_risk_identity_check(qtype, &p, &[0.2, 0.5, 0.9], 1).unwrap();
            assert!((a - 0.43).abs() < 1e-12);
            assert!((b - 0.43).abs() < 1e-12, "{qtype}: {b}");
            let (a, b) = exact_risk_identity_check(qtype, &p, &[0.0; 3], 1).unwrap();
            assert_eq!((a, b), (0.0, 0.0));
        }
    }

    #[test]
    fn empirical_risks() {
        let space = ClassSpace::new(3).unwrap();
        let f = scores(&[0.7, 0.2, 0.1]);
        let event = LabelingEvent {
            instance_id: "a".into(),
            qtype: QuestionType::WhichOne,
            items: 1,
            question_set: set(&[1]),
            answer: crate::labeling::Answer::NotIncluded,
            qa_label: set(&[2, 3]),
            seed: 0,
        };
        event.validate(space).unwrap();
        let single = empirical_qa_risk(
            std::slice::from_ref(&event),
            QuestionType::WhichOne,
            1,
            BaseLoss::Mae,
            |_| Ok(f.clone()),
        )
        .unwrap();
        assert!((single - 3.1).abs() < 1e-12);
        let many = vec![event.clone(); 7];
        let mean = empirical_qa_risk(&many, QuestionType::WhichOne, 1, BaseLoss::Mae, |_| {
            Ok(f.clone())
        })
        .unwrap();
        assert!((mean - single).abs() < 1e-12);
        assert!(
            empirical_qa_risk(&[], QuestionType::WhichOne, 1, BaseLoss::Mae, |_| Ok(
                f.clone()
            ))
            .is_err()
        );
        assert!(
            empirical_qa_risk(&many, QuestionType::IsIn, 1, BaseLoss::Mae, |_| Ok(
                f.clone()
            ))
            .is_err()
        );

        let hot = scores(&[0.0, 1.0, 0.0]);
        assert_eq!(
            empirical_test_risk([(&hot, 2)], BaseLoss::Mae).unwrap(),
            0.0
        );
        let uniform = ScoreVector::uniform(ClassSpace::new(10).unwrap());
        let r = empirical_test_risk((1..=10).map(|y| (&uniform, y)), BaseLoss::Mae).unwrap();
        assert!((r - 1.8).abs() < 1e-12);
        // two points: mae((0.7,0.2,0.1),1) = 0.6 and mae((0.7,0.2,0.1),3) = 1.8
        let r = empirical_test_risk([(&f, 1), (&f, 3)], BaseLoss::Mae).unwrap();
        assert!((r - 1.2).abs() < 1e-12);
        assert!(empirical_test_risk(std::iter::empty(), BaseLoss::Mae).is_err());
    }

    #[test]
    fn weights_reproduce_qa_loss() {
        let mut rng = rng_from_seed(9);
        let space = ClassSpace::new(5).unwrap();
        for qtype in QuestionType::ALL {
            for items in 1..5 {
                let p = PosteriorVector::random(space, &mut rng);
                let f = scores(p.as_slice());
                let sup = Supervision::Qa { qtype, items };
                for (label, _) in qa_pmf(qtype, &PosteriorVector::uniform(space), items)
                    .unwrap()
                    .iter()
                {
                    let w = sup.class_weights(label, space).unwrap();
                    let losses = BaseLoss::Mae.class_losses(f.as_slice());
                    let via_w: f64 = w.iter().zip(&losses).map(|(a, b)| a * b).sum();
                    let direct = qa_loss(qtype, &f, label, items, BaseLoss::Mae).unwrap();
                    assert!((via_w - direct).abs() < 1e-12);
                }
            }
        }
        assert!(Supervision::Ordinary
            .class_weights(&set(&[1, 2]), space)
            .is_err());
    }

    #[test]
    fn cross_entropy_gradient() {
        let f = [0.5, 0.3, 0.2];
        let g = BaseLoss::CrossEntropy.weighted_grad(&f, &[1.0, 0.0, -0.5]);
        assert!((g[0] + 2.0).abs() < 1e-12);
        assert_eq!(g[1], 0.0);
        assert!((g[2] - 2.5).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn mae_on_simplex(raw in proptest::collection::vec(0.01f64..1.0, 2..12), pick in 0usize..12) {
            let total: f64 = raw.iter().sum();
            let f = scores(&raw.iter().map(|v| v / total).collect::<Vec<_>>());
            let y = pick % f.k() + 1;
            let v = mae(&f, y).unwrap();
            prop_assert!((v - 2.0 * (1.0 - f.as_slice()[y - 1])).abs() < 1e-12);
            let all = BaseLoss::Mae.class_losses(f.as_slice());
            prop_assert!((all[y - 1] - v).abs() < 1e-12);
        }

        #[test]
        fn constant_losses_closed_form(k in 2usize..10, seed in any::<u64>(), l0 in 0.0f64..3.0) {
            let space = ClassSpace::new(k).unwrap();
            let mut rng = rng_from_seed(seed);
            let items = rng.random_range(1..k);
            let size_pick = rng.random_bool(0.5);
            for qtype in QuestionType::ALL {
                let sizes = Procedure::qa(qtype, items).support_sizes(space);
                let size = if size_pick { sizes[0] } else { *sizes.last().unwrap() };
                let label = LabelSubset::new(1..=size).unwrap();
                let losses = vec![l0; k];
                let v = qa_loss_from_class_losses(qtype, &losses, &label, items).unwrap();
                let c = qa_coefficient(qtype, k, items).unwrap();
                let expected = l0 * (size as f64 - c * (k - size) as f64);
                prop_assert!((v - expected).abs() < 1e-10);
            }
        }
    }
}
