use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{argmax, class_weight_matrix, AdamConfig, AdamState, MlpParams};
use crate::combinatorics::{ClassId, ClassSpace, LabelSubset};
use crate::error::{invalid, Error, Result};
use crate::labeling::rng_stream;
use crate::losses::{BaseLoss, Supervision};

/// Training hyperparameters. Defaults follow the reference experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub hidden: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub seed: u64,
    pub repetitions: usize,
    pub supervision: Supervision,
    pub base_loss: BaseLoss,
    /// Evaluate on the test set every this many epochs (and after the last).
    pub eval_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 800,
            batch_size: 500,
            hidden: 500,
            learning_rate: 1e-2,
            weight_decay: 1e-3,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            seed: 0,
            repetitions: 5,
            supervision: Supervision::Ordinary,
            base_loss: BaseLoss::Mae,
            eval_every: 1,
        }
    }
}

impl TrainConfig {
    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.adam_beta1,
            beta2: self.adam_beta2,
            eps: self.adam_eps,
            weight_decay: self.weight_decay,
        }
    }

    pub fn validate(&self, space: ClassSpace) -> Result<()> {
        if self.batch_size == 0 || self.hidden == 0 || self.repetitions == 0 || self.eval_every == 0
        {
            return invalid("batch_size, hidden, repetitions and eval_every must be positive");
        }
        let positive = [self.learning_rate, self.adam_eps];
        if positive.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return invalid("learning_rate and adam_eps must be positive");
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return invalid("weight_decay must be nonnegative");
        }
        for beta in [self.adam_beta1, self.adam_beta2] {
            if !(0.0..1.0).contains(&beta) {
                return invalid(format!("Adam beta {beta} outside [0, 1)"));
            }
        }
        self.supervision.validate(space)
    }
}

/// Features with (possibly set-valued) training labels.
#[derive(Clone, Debug)]
pub struct TrainingData {
    pub features: Array2<f64>,
    pub labels: Vec<LabelSubset>,
    pub space: ClassSpace,
}

impl TrainingData {
    pub fn new(features: Array2<f64>, labels: Vec<LabelSubset>, space: ClassSpace) -> Result<Self> {
        if features.nrows() != labels.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} feature rows for {} labels",
                features.nrows(),
                labels.len()
            )));
        }
        if labels.is_empty() || features.ncols() == 0 {
            return invalid("training set is empty");
        }
        for label in &labels {
            label.check_space(space)?;
        }
        Ok(Self {
            features,
            labels,
            space,
        })
    }
}

/// Features with ordinary labels.
#[derive(Clone, Debug)]
pub struct TestData {
    pub features: Array2<f64>,
    pub labels: Vec<ClassId>,
    pub space: ClassSpace,
}

impl TestData {
    pub fn new(features: Array2<f64>, labels: Vec<ClassId>, space: ClassSpace) -> Result<Self> {
        if features.nrows() != labels.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} feature rows for {} labels",
                features.nrows(),
                labels.len()
            )));
        }
        for &y in &labels {
            space.check_class(y)?;
        }
        Ok(Self {
            features,
            labels,
            space,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Evaluation {
    pub mae: f64,
    pub accuracy: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    /// Batch-size weighted mean of the training loss over the epoch.
    pub train_qa_risk: f64,
    pub test: Option<Evaluation>,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub params: MlpParams,
    pub metrics: Vec<EpochMetrics>,
    /// Parameters after every optimizer step, when requested.
    pub trajectory: Vec<MlpParams>,
}

/// Mean MAE and argmax accuracy on ordinary-labeled data.
pub fn evaluate(params: &MlpParams, test: &TestData) -> Result<Evaluation> {
    if test.labels.is_empty() {
        return invalid("empty test set");
    }
    if test.space.k() != params.classes() {
        return Err(Error::ShapeMismatch(format!(
            "test set has {} classes, model {}",
            test.space.k(),
            params.classes()
        )));
    }
    let probs = params.forward_batch(test.features.view())?;
    let mut mae = 0.0;
    let mut hits = 0usize;
    for (row, &y) in probs.outer_iter().zip(&test.labels) {
        let f = row.as_slice().expect("standard layout");
        mae += BaseLoss::Mae.class_loss(f, y);
        if argmax(f) + 1 == y {
            hits += 1;
        }
    }
    let n = test.labels.len() as f64;
    Ok(Evaluation {
        mae: mae / n,
        accuracy: hits as f64 / n,
    })
}

/// Mini-batch Adam training. Initialization and shuffling draw from two
/// streams of `cfg.seed`, so a run is a pure function of its inputs.
pub fn train(
    data: &TrainingData,
    test: Option<&TestData>,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    train_impl(data, test, cfg, false)
}

/// As [`train`], additionally recording parameters after every step.
pub fn train_with_trajectory(
    data: &TrainingData,
    test: Option<&TestData>,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    train_impl(data, test, cfg, true)
}

fn train_impl(
    data: &TrainingData,
    test: Option<&TestData>,
    cfg: &TrainConfig,
    record: bool,
) -> Result<TrainOutcome> {
    cfg.validate(data.space)?;
    if let Some(test) = test {
        if test.features.ncols() != data.features.ncols() || test.space != data.space {
            return Err(Error::ShapeMismatch(
                "test set does not match training data".into(),
            ));
        }
    }
    let weights = class_weight_matrix(&data.labels, cfg.supervision, data.space)?;
    let mut init_rng = rng_stream(cfg.seed, 0);
    let mut shuffle_rng = rng_stream(cfg.seed, 1);
    let mut params = MlpParams::init(
        data.features.ncols(),
        cfg.hidden,
        data.space.k(),
        &mut init_rng,
    )?;
    let mut state = AdamState::new(&params);
    let adam = cfg.adam();
    let n = data.labels.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut metrics = Vec::with_capacity(cfg.epochs);
    let mut trajectory = Vec::new();

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let x = data.features.select(Axis(0), batch);
            let w = weights.select(Axis(0), batch);
            let (loss, grad) = params.loss_and_grad_weighted(x.view(), w.view(), cfg.base_loss)?;
            total += loss * batch.len() as f64;
            state.step(&mut params, &grad, &adam)?;
            if record {
                trajectory.push(params.clone());
            }
        }
        let evaluate_now = epoch % cfg.eval_every == 0 || epoch == cfg.epochs;
        let test_eval = match test {
            Some(test) if evaluate_now => Some(evaluate(&params, test)?),
            _ => None,
        };
        metrics.push(EpochMetrics {
            epoch,
            train_qa_risk: total / n as f64,
            test: test_eval,
        });
    }
    Ok(TrainOutcome {
        params,
        metrics,
        trajectory,
    })
}

/// Mean loss of `params` over a whole labeled set.
pub fn dataset_loss(
    params: &MlpParams,
    features: ArrayView2<'_, f64>,
    labels: &[LabelSubset],
    supervision: Supervision,
    base: BaseLoss,
) -> Result<f64> {
    Ok(params.loss_and_grad(features, labels, supervision, base)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::labeling::{rng_from_seed, QuestionType};
    use ndarray::Array2;
    use rand::Rng;

    fn tiny_data(seed: u64) -> (TrainingData, TestData) {
        let space = ClassSpace::new(3).unwrap();
        let mut rng = rng_from_seed(seed);
        let n = 60;
        let labels: Vec<ClassId> = (0..n).map(|i| i % 3 + 1).collect();
        let features = Array2::from_shape_fn((n, 4), |(i, j)| {
            let center = if j == labels[i] - 1 { 1.0 } else { 0.0 };
            center + rng.random_range(-0.2..0.2)
        });
        let train = TrainingData::new(
            features.clone(),
            labels
                .iter()
                .map(|&y| LabelSubset::singleton(y).unwrap())
                .collect(),
            space,
        )
        .unwrap();
        let test = TestData::new(features, labels, space).unwrap();
        (train, test)
    }

    fn quick_cfg() -> TrainConfig {
        TrainConfig {
            epochs: 30,
            batch_size: 16,
            hidden: 8,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn zero_epochs_returns_initial_params() {
        let (train_set, _) = tiny_data(0);
        let cfg = TrainConfig {
            epochs: 0,
            ..quick_cfg()
        };
        let out = train(&train_set, None, &cfg).unwrap();
        let init = MlpParams::init(4, 8, 3, &mut rng_stream(cfg.seed, 0)).unwrap();
        assert_eq!(out.params, init);
        assert!(out.metrics.is_empty());
    }

    #[test]
    fn learns_separable_data() {
        let (train_set, test) = tiny_data(1);
        let out = train(&train_set, Some(&test), &quick_cfg()).unwrap();
        let last = out.metrics.last().unwrap().test.unwrap();
        assert!(last.accuracy > 0.95, "{last:?}");
        assert!(last.mae < 4.0 / 3.0);
        assert_eq!(out.metrics.len(), 30);
    }

    #[test]
    fn training_is_deterministic() {
        let (train_set, test) = tiny_data(2);
        let a = train(&train_set, Some(&test), &quick_cfg()).unwrap();
        let b = train(&train_set, Some(&test), &quick_cfg()).unwrap();
        assert_eq!(a.params, b.params);
        assert_eq!(a.metrics, b.metrics);
    }

    #[test]
    fn evaluation_hand_checked() {
        // zero params: uniform scores, argmax ties to class 1
        let params = MlpParams::zeros(2, 2, 3).unwrap();
        let space = ClassSpace::new(3).unwrap();
        let test = TestData::new(Array2::zeros((3, 2)), vec![1, 2, 1], space).unwrap();
        let ev = evaluate(&params, &test).unwrap();
        assert!((ev.mae - 4.0 / 3.0).abs() < 1e-12);
        assert!((ev.accuracy - 2.0 / 3.0).abs() < 1e-12);

        // b2 pushes everything to class 2 with f = softmax(0, ln 8, 0) = (0.1, 0.8, 0.1)
        let mut params = MlpParams::zeros(2, 2, 3).unwrap();
        params.b2_mut()[1] = 8f64.ln();
        let ev = evaluate(&params, &test).unwrap();
        // maes: 1.8, 0.4, 1.8
        assert!((ev.mae - 4.0 / 3.0).abs() < 1e-12);
        assert!((ev.accuracy - 1.0 / 3.0).abs() < 1e-12);

        let empty = TestData::new(Array2::zeros((0, 2)), vec![], space).unwrap();
        assert!(evaluate(&params, &empty).is_err());
    }

    #[test]
    fn rejects_invalid_configs() {
        let (train_set, _) = tiny_data(3);
        let cfg = TrainConfig {
            batch_size: 0,
            ..quick_cfg()
        };
        assert!(train(&train_set, None, &cfg).is_err());
        let cfg = TrainConfig {
            supervision: Supervision::Qa {
                qtype: QuestionType::IsIn,
                items: 3,
            },
            ..quick_cfg()
        };
        assert!(train(&train_set, None, &cfg).is_err());
        assert!(
            TrainingData::new(Array2::zeros((2, 2)), vec![], ClassSpace::new(3).unwrap()).is_err()
        );
    }

    #[test]
    fn config_json_defaults_and_unknown_keys() {
        let cfg: TrainConfig = serde_json::from_str(r#"{"epochs": 3}"#).unwrap();
        assert_eq!(cfg.epochs, 3);
        assert_eq!(cfg.batch_size, 500);
        assert_eq!(cfg.weight_decay, 1e-3);
        assert!(serde_json::from_str::<TrainConfig>(r#"{"epoch": 3}"#).is_err());
    }
}
