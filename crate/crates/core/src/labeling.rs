//! The three-step Q&A labeling procedure.
//!
//! 1. A question generator draws a uniformly random question set `Q` of
//!    `I` classes.
//! 2. The annotator is asked either "Which one in Q is X?" or "Is X in Q?".
//! 3. The answer, made from the annotator's inferred class `Z`, is turned
//!    into a Q&A label: `{Z}`, `Q`, or `Y \ Q`.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::combinatorics::{complement, ClassId, ClassSpace, LabelSubset, PosteriorVector};
use crate::error::{invalid, Error, Result};

/// Counter-based generator used for every randomized routine in the crate.
pub type QaRng = ChaCha8Rng;

/// A generator seeded from `seed`.
pub fn rng_from_seed(seed: u64) -> QaRng {
    QaRng::seed_from_u64(seed)
}

/// An independent stream of the generator seeded from `seed`.
pub fn rng_stream(seed: u64, stream: u64) -> QaRng {
    let mut rng = QaRng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Mixes a base seed and an index into a well-spread child seed.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = base ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuestionType {
    /// "Which one in Q is X?"
    WhichOne,
    /// "Is X in Q?"
    IsIn,
}

impl QuestionType {
    pub const ALL: [QuestionType; 2] = [QuestionType::WhichOne, QuestionType::IsIn];

    pub fn as_str(self) -> &'static str {
        match self {
            QuestionType::WhichOne => "which_one",
            QuestionType::IsIn => "is_in",
        }
    }
}

impl fmt::Display for QuestionType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for QuestionType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "which_one" | "which-one" => Ok(QuestionType::WhichOne),
            "is_in" | "is-in" => Ok(QuestionType::IsIn),
            other => invalid(format!("unknown question type `{other}`")),
        }
    }
}

/// Question type, number of question items `I`, and class set.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct QuestionSpec {
    qtype: QuestionType,
    items: usize,
    space: ClassSpace,
}

impl QuestionSpec {
    pub fn new(qtype: QuestionType, items: usize, space: ClassSpace) -> Result<Self> {
        check_items(space, items)?;
        Ok(Self {
            qtype,
            items,
            space,
        })
    }

    pub fn qtype(&self) -> QuestionType {
        self.qtype
    }

    pub fn items(&self) -> usize {
        self.items
    }

    pub fn space(&self) -> ClassSpace {
        self.space
    }
}

/// `1 <= items <= K - 1`.
pub fn check_items(space: ClassSpace, items: usize) -> Result<()> {
    if items == 0 || items >= space.k() {
        return invalid(format!(
            "number of question items must be in 1..={}, got {items}",
            space.k() - 1
        ));
    }
    Ok(())
}

/// An annotator's answer to a question.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Answer {
    /// which-one: the annotator picked class `z` from the question set.
    Chose(ClassId),
    /// which-one: the annotator's class is not in the question set.
    NotIncluded,
    /// is-in: the class is in the question set.
    Yes,
    /// is-in: the class is not in the question set.
    No,
}

impl Answer {
    pub fn matches(self, qtype: QuestionType) -> bool {
        matches!(
            (qtype, self),
            (
                QuestionType::WhichOne,
                Answer::Chose(_) | Answer::NotIncluded
            ) | (QuestionType::IsIn, Answer::Yes | Answer::No)
        )
    }
}

/// Draws `I` classes uniformly without replacement.
pub fn draw_question_set<R: Rng + ?Sized>(rng: &mut R, spec: &QuestionSpec) -> LabelSubset {
    let mut ids: Vec<ClassId> = index::sample(rng, spec.space.k(), spec.items)
        .into_iter()
        .map(|i| i + 1)
        .collect();
    ids.sort_unstable();
    LabelSubset::new(ids).expect("nonempty sample")
}

/// How an annotator whose inferred class is `z` answers.
pub fn answer_question(z: ClassId, qtype: QuestionType, question: &LabelSubset) -> Answer {
    let inside = question.contains(z);
    match (qtype, inside) {
        (QuestionType::WhichOne, true) => Answer::Chose(z),
        (QuestionType::WhichOne, false) => Answer::NotIncluded,
        (QuestionType::IsIn, true) => Answer::Yes,
        (QuestionType::IsIn, false) => Answer::No,
    }
}

/// Turns an answer into the Q&A label assigned to the instance.
pub fn assign_label(
    qtype: QuestionType,
    question: &LabelSubset,
    answer: Answer,
    space: ClassSpace,
) -> Result<LabelSubset> {
    question.check_space(space)?;
    if question.len() >= space.k() {
        return Err(Error::ProtocolViolation(format!(
            "question set {question} must be a proper subset"
        )));
    }
    if !answer.matches(qtype) {
        return Err(Error::ProtocolViolation(format!(
            "answer {answer:?} does not match question type {qtype}"
        )));
    }
    match answer {
        Answer::Chose(z) if question.contains(z) => LabelSubset::singleton(z),
        Answer::Chose(z) => Err(Error::ProtocolViolation(format!(
            "chose class {z}, which is not in question set {question}"
        ))),
        Answer::Yes => Ok(question.clone()),
        Answer::NotIncluded | Answer::No => complement(space, question),
    }
}

/// Source of the class `Z` an annotator infers for an instance.
pub trait Annotator {
    fn infer(&self, instance_id: &str, rng: &mut dyn RngCore) -> Result<ClassId>;
}

/// Built-in annotators.
#[derive(Clone, Debug)]
pub enum AnnotatorModel {
    /// Reads `Z` from ground-truth labels.
    Deterministic(HashMap<String, ClassId>),
    /// Draws `Z` from a per-instance posterior.
    Stochastic(HashMap<String, PosteriorVector>),
    /// Draws `Z` from one posterior shared by every instance.
    SharedPosterior(PosteriorVector),
}

impl AnnotatorModel {
    /// Deterministic annotator for instances named by their index.
    pub fn from_labels(labels: &[ClassId]) -> Self {
        AnnotatorModel::Deterministic(
            labels
                .iter()
                .enumerate()
                .map(|(i, &y)| (i.to_string(), y))
                .collect(),
        )
    }
}

impl Annotator for AnnotatorModel {
    fn infer(&self, instance_id: &str, rng: &mut dyn RngCore) -> Result<ClassId> {
        match self {
            AnnotatorModel::Deterministic(truth) => truth
                .get(instance_id)
                .copied()
                .ok_or_else(|| Error::MissingGroundTruth(instance_id.to_owned())),
            AnnotatorModel::Stochastic(posteriors) => posteriors
                .get(instance_id)
                .map(|p| sample_class(p, rng))
                .ok_or_else(|| Error::MissingGroundTruth(instance_id.to_owned())),
            AnnotatorModel::SharedPosterior(p) => Ok(sample_class(p, rng)),
        }
    }
}

fn sample_class(posterior: &PosteriorVector, rng: &mut dyn RngCore) -> ClassId {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last_positive = 1;
    for (i, &p) in posterior.as_slice().iter().enumerate() {
        if p > 0.0 {
            last_positive = i + 1;
        }
        acc += p;
        if u < acc {
            return i + 1;
        }
    }
    last_positive
}

/// One annotation record.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelingEvent {
    pub instance_id: String,
    pub qtype: QuestionType,
    #[serde(rename = "I")]
    pub items: usize,
    pub question_set: LabelSubset,
    pub answer: Answer,
    pub qa_label: LabelSubset,
    pub seed: u64,
}

impl LabelingEvent {
    /// Checks that the question set, answer and label are mutually consistent.
    pub fn validate(&self, space: ClassSpace) -> Result<()> {
        check_items(space, self.items)?;
        if self.question_set.len() != self.items {
            return Err(Error::ProtocolViolation(format!(
                "question set {} has size {}, expected {}",
                self.question_set,
                self.question_set.len(),
                self.items
            )));
        }
        let expected = assign_label(self.qtype, &self.question_set, self.answer, space)?;
        if expected != self.qa_label {
            return Err(Error::ProtocolViolation(format!(
                "qa_label {} inconsistent with answer {:?} to {}; expected {}",
                self.qa_label, self.answer, self.question_set, expected
            )));
        }
        Ok(())
    }
}

/// Runs the procedure for one instance with its own generator state.
pub fn label_instance(
    seed: u64,
    spec: &QuestionSpec,
    annotator: &dyn Annotator,
    instance_id: &str,
) -> Result<LabelingEvent> {
    let mut rng = rng_from_seed(seed);
    let question_set = draw_question_set(&mut rng, spec);
    let z = annotator.infer(instance_id, &mut rng)?;
    spec.space.check_class(z)?;
    let answer = answer_question(z, spec.qtype, &question_set);
    let qa_label = assign_label(spec.qtype, &question_set, answer, spec.space)?;
    Ok(LabelingEvent {
        instance_id: instance_id.to_owned(),
        qtype: spec.qtype,
        items: spec.items,
        question_set,
        answer,
        qa_label,
        seed,
    })
}

/// Labels every instance once; event `i` uses `derive_seed(seed, i)`.
pub fn simulate_dataset<S: AsRef<str>>(
    seed: u64,
    spec: &QuestionSpec,
    annotator: &dyn Annotator,
    instances: &[S],
) -> Result<Vec<LabelingEvent>> {
    instances
        .iter()
        .enumerate()
        .map(|(i, id)| label_instance(derive_seed(seed, i as u64), spec, annotator, id.as_ref()))
        .collect()
}
