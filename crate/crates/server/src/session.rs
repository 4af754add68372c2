use std::collections::{BTreeMap, HashSet};

use rand::seq::SliceRandom;
use serde::Serialize;

use qa_label::data::{Origin, StoredEvent};
use qa_label::labeling::{assign_label, derive_seed, draw_question_set, rng_from_seed, rng_stream};
use qa_label::{Answer, ClassId, LabelSubset, LabelingEvent, QuestionSpec, QuestionType};

use crate::png::encode_gray_png;
use crate::DatasetEntry;

/// What the annotator is shown for one instance.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QuestionPayload {
    pub instance_id: String,
    /// Base64 grayscale PNG.
    pub image: String,
    pub width: u32,
    pub height: u32,
    pub qtype: QuestionType,
    #[serde(rename = "I")]
    pub items: usize,
    pub question_classes: Vec<ClassId>,
    pub class_names: Option<Vec<String>>,
    /// Zero-based position in the session queue.
    pub position: usize,
    pub total: usize,
}

#[derive(Debug)]
pub(crate) enum AnswerError {
    UnknownInstance(String),
    Conflict(String),
    Protocol(String),
    Store(String),
}

struct Issued {
    index: usize,
    question_set: LabelSubset,
    seed: u64,
    payload: QuestionPayload,
}

pub(crate) struct Session {
    spec: QuestionSpec,
    entry: DatasetEntry,
    queue: Vec<usize>,
    cursor: usize,
    question_seed: u64,
    issued: Option<Issued>,
    answered: HashSet<usize>,
    histogram: BTreeMap<usize, usize>,
}

impl Session {
    /// The queue order and every question set are functions of `seed`.
    pub(crate) fn new(spec: QuestionSpec, entry: DatasetEntry, seed: u64) -> Self {
        let mut queue: Vec<usize> = (0..entry.dataset.len()).collect();
        queue.shuffle(&mut rng_stream(seed, 0));
        Self {
            spec,
            entry,
            queue,
            cursor: 0,
            question_seed: derive_seed(seed, 1),
            issued: None,
            answered: HashSet::new(),
            histogram: BTreeMap::new(),
        }
    }

    pub(crate) fn total(&self) -> usize {
        self.queue.len()
    }

    pub(crate) fn answered(&self) -> usize {
        self.answered.len()
    }

    pub(crate) fn remaining(&self) -> usize {
        self.queue.len() - self.cursor
    }

    pub(crate) fn histogram(&self) -> &BTreeMap<usize, usize> {
        &self.histogram
    }

    /// The pending question, issuing the next one if none is pending.
    /// `None` once the queue is exhausted.
    pub(crate) fn current_question(&mut self) -> Option<QuestionPayload> {
        if let Some(issued) = &self.issued {
            return Some(issued.payload.clone());
        }
        let index = *self.queue.get(self.cursor)?;
        let seed = derive_seed(self.question_seed, self.cursor as u64);
        let question_set = draw_question_set(&mut rng_from_seed(seed), &self.spec);
        let ds = &self.entry.dataset;
        let (height, width) = ds.meta.image_shape.unwrap_or((1, ds.dim()));
        let image = encode_gray_png(width as u32, height as u32, ds.pixels(index))
            .expect("dataset shape checked on load");
        let payload = QuestionPayload {
            instance_id: self.entry.id(index).to_owned(),
            image,
            width: width as u32,
            height: height as u32,
            qtype: self.spec.qtype(),
            items: self.spec.items(),
            question_classes: question_set.as_slice().to_vec(),
            class_names: self.entry.class_names.clone(),
            position: self.cursor,
            total: self.queue.len(),
        };
        self.issued = Some(Issued {
            index,
            question_set,
            seed,
            payload: payload.clone(),
        });
        Some(payload)
    }

    /// Labels the pending instance. `persist` runs before any state
    /// changes, so a failed write leaves the question pending.
    pub(crate) fn answer<F>(
        &mut self,
        instance_id: &str,
        answer: Answer,
        persist: F,
    ) -> Result<LabelSubset, AnswerError>
    where
        F: FnOnce(&StoredEvent) -> qa_label::Result<()>,
    {
        let index = self.entry.index(instance_id).ok_or_else(|| {
            AnswerError::UnknownInstance(format!("unknown instance `{instance_id}`"))
        })?;
        if self.answered.contains(&index) {
            return Err(AnswerError::Conflict(format!(
                "instance `{instance_id}` already answered"
            )));
        }
        let issued = match &self.issued {
            Some(issued) if issued.index == index => issued,
            _ => {
                return Err(AnswerError::Conflict(format!(
                    "instance `{instance_id}` is not the pending question"
                )))
            }
        };
        let qtype = self.spec.qtype();
        if !answer.matches(qtype) {
            return Err(AnswerError::Protocol(format!(
                "answer {answer:?} does not fit a {qtype} question"
            )));
        }
        let qa_label = assign_label(qtype, &issued.question_set, answer, self.spec.space())
            .map_err(|e| AnswerError::Protocol(e.to_string()))?;
        let event = LabelingEvent {
            instance_id: instance_id.to_owned(),
            qtype,
            items: self.spec.items(),
            question_set: issued.question_set.clone(),
            answer,
            qa_label: qa_label.clone(),
            seed: issued.seed,
        };
        event
            .validate(self.spec.space())
            .map_err(|e| AnswerError::Protocol(e.to_string()))?;
        persist(&StoredEvent::now(event, Origin::Human))
            .map_err(|e| AnswerError::Store(e.to_string()))?;

        self.answered.insert(index);
        *self.histogram.entry(qa_label.len()).or_default() += 1;
        self.cursor += 1;
        self.issued = None;
        Ok(qa_label)
    }
}
