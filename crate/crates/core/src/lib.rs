//! Q&A labeling toolkit.
//!
//! An annotator is shown a random set of `I` classes and asks either
//! "Which one in Q is X?" or "Is X in Q?". This crate provides the
//! labeling procedure itself, the exact distribution of the labels it
//! produces, the risk-rewriting losses that make learning from those
//! labels unbiased, generalization-bound calculators, and a small MLP
//! training harness.

pub mod bounds;
pub mod combinatorics;
pub mod data;
pub mod error;
pub mod generative;
pub mod labeling;
pub mod losses;
pub mod model;
pub mod verify;

pub use combinatorics::{
    binomial, complement, enumerate_subsets, ClassId, ClassSpace, LabelSubset, PosteriorVector,
};
pub use data::{ImageDataset, Origin, StoredEvent};
pub use error::{Error, Result};
pub use generative::{LabelPmf, Procedure, ReceiverConfidence};
pub use labeling::{Annotator, AnnotatorModel, Answer, LabelingEvent, QuestionSpec, QuestionType};
pub use losses::{BaseLoss, ScoreVector, Supervision};
pub use model::{MlpParams, TrainConfig};
pub use verify::{run_verification, VerifyConfig, VerifyReport};
