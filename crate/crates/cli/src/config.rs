//! Run configuration: a JSON file (optional) with command-line overrides.

use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};

use qa_label::data::{load_idx, subsample_indices, synthetic_blobs, ImageDataset};
use qa_label::labeling::rng_stream;
use qa_label::{BaseLoss, QuestionType, Supervision, TrainConfig};

/// Synthetic Gaussian blobs used when no IDX files are given.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticConfig {
    #[serde(rename = "K")]
    pub k: usize,
    pub d: usize,
    pub per_class: usize,
    pub test_per_class: usize,
    pub separation: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            k: 10,
            d: 10,
            per_class: 200,
            test_per_class: 100,
            separation: 4.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub dataset_images: Option<PathBuf>,
    pub dataset_labels: Option<PathBuf>,
    pub test_images: Option<PathBuf>,
    pub test_labels: Option<PathBuf>,
    pub synthetic: Option<SyntheticConfig>,
    pub per_class: Option<usize>,
    pub qtype: QuestionType,
    #[serde(rename = "I")]
    pub items: Option<usize>,
    /// Train on ground-truth labels instead of Q&A labels.
    pub ordinary: bool,
    /// Train on labels read from an event store instead of simulating them.
    pub events: Option<PathBuf>,
    pub seed: u64,
    pub out: PathBuf,
    pub epochs: usize,
    pub batch_size: usize,
    pub hidden: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub repetitions: usize,
    pub base_loss: BaseLoss,
    pub eval_every: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            dataset_images: None,
            dataset_labels: None,
            test_images: None,
            test_labels: None,
            synthetic: None,
            per_class: None,
            qtype: QuestionType::WhichOne,
            items: None,
            ordinary: false,
            events: None,
            seed: 0,
            out: PathBuf::from("out"),
            epochs: t.epochs,
            batch_size: t.batch_size,
            hidden: t.hidden,
            learning_rate: t.learning_rate,
            weight_decay: t.weight_decay,
            adam_beta1: t.adam_beta1,
            adam_beta2: t.adam_beta2,
            adam_eps: t.adam_eps,
            repetitions: t.repetitions,
            base_loss: t.base_loss,
            eval_every: t.eval_every,
        }
    }
}

/// Flags shared by the dataset-driven commands; each overrides the
/// matching config-file value.
#[derive(Clone, Debug, Default, Args)]
pub struct RunArgs {
    /// JSON run configuration; unknown keys are rejected.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// `which_one` or `is_in`.
    #[arg(long)]
    pub qtype: Option<QuestionType>,
    /// Number of classes in each question.
    #[arg(long = "I", value_parser = clap::value_parser!(u64).range(1..))]
    pub items: Option<u64>,
    /// IDX image file (optionally gzip-compressed).
    #[arg(long)]
    pub dataset_images: Option<PathBuf>,
    /// IDX label file (optionally gzip-compressed).
    #[arg(long)]
    pub dataset_labels: Option<PathBuf>,
    #[arg(long)]
    pub test_images: Option<PathBuf>,
    #[arg(long)]
    pub test_labels: Option<PathBuf>,
    /// Use synthetic Gaussian blobs (default shape) when no IDX files are given.
    #[arg(long)]
    pub synthetic: bool,
    /// Keep this many randomly chosen instances of every class.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub per_class: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub repetitions: Option<u64>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub hidden: Option<u64>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub batch_size: Option<u64>,
    /// Train on ground-truth labels instead of Q&A labels.
    #[arg(long)]
    pub ordinary: bool,
    /// Event store (JSONL) to train on instead of simulated labels.
    #[arg(long)]
    pub events: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// A configuration problem: reported as a usage error.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage<T>(msg: impl Into<String>) -> anyhow::Result<T> {
    Err(UsageError(msg.into()).into())
}

impl RunArgs {
    pub fn resolve(&self) -> anyhow::Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| {
                    UsageError(format!("cannot read config {}: {e}", path.display()))
                })?;
                serde_json::from_str(&text)
                    .map_err(|e| UsageError(format!("config {}: {e}", path.display())))?
            }
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($field:ident) => {
                if let Some(v) = &self.$field {
                    cfg.$field = v.clone().into();
                }
            };
        }
        set!(seed);
        set!(dataset_images);
        set!(dataset_labels);
        set!(test_images);
        set!(test_labels);
        set!(events);
        set!(out);
        if let Some(q) = self.qtype {
            cfg.qtype = q;
        }
        if let Some(i) = self.items {
            cfg.items = Some(i as usize);
        }
        if let Some(n) = self.per_class {
            cfg.per_class = Some(n as usize);
        }
        if let Some(e) = self.epochs {
            cfg.epochs = e;
        }
        if let Some(r) = self.repetitions {
            cfg.repetitions = r as usize;
        }
        if let Some(h) = self.hidden {
            cfg.hidden = h as usize;
        }
        if let Some(b) = self.batch_size {
            cfg.batch_size = b as usize;
        }
        if self.ordinary {
            cfg.ordinary = true;
        }
        if self.synthetic && cfg.synthetic.is_none() {
            cfg.synthetic = Some(SyntheticConfig::default());
        }
        cfg.check_sources()?;
        Ok(cfg)
    }
}

/// A dataset together with each row's position in its source.
pub struct Loaded {
    pub dataset: ImageDataset,
    pub source_rows: Vec<usize>,
}

impl Loaded {
    pub fn ids(&self) -> Vec<String> {
        self.source_rows.iter().map(|r| r.to_string()).collect()
    }
}

impl RunConfig {
    fn check_sources(&self) -> anyhow::Result<()> {
        match (&self.dataset_images, &self.dataset_labels) {
            (Some(_), None) | (None, Some(_)) => {
                return usage("--dataset-images and --dataset-labels must be given together")
            }
            (None, None) if self.synthetic.is_none() => {
                return usage("no dataset: pass --dataset-images/--dataset-labels or --synthetic")
            }
            _ => {}
        }
        if self.test_images.is_some() != self.test_labels.is_some() {
            return usage("--test-images and --test-labels must be given together");
        }
        Ok(())
    }

    fn idx_paths(&self) -> Option<(&Path, &Path)> {
        Some((
            self.dataset_images.as_deref()?,
            self.dataset_labels.as_deref()?,
        ))
    }

    /// Training data: IDX files if given, else synthetic blobs; then the
    /// per-class subsample drawn from stream `10` of `seed`.
    pub fn load_train(&self, seed: u64) -> anyhow::Result<Loaded> {
        let full = match self.idx_paths() {
            Some((images, labels)) => load_idx(images, labels)?,
            None => {
                let s = self.synthetic.clone().unwrap_or_default();
                synthetic_blobs(
                    s.k,
                    s.d,
                    s.per_class,
                    s.separation,
                    &mut rng_stream(self.seed, 100),
                )?
            }
        };
        match self.per_class {
            Some(n) => {
                let rows = subsample_indices(&full, n, &mut rng_stream(seed, 10))?;
                Ok(Loaded {
                    dataset: full.select(&rows)?,
                    source_rows: rows,
                })
            }
            None => Ok(Loaded {
                source_rows: (0..full.len()).collect(),
                dataset: full,
            }),
        }
    }

    /// Held-out data, if any: IDX test files, or a fresh blob sample.
    pub fn load_test(&self) -> anyhow::Result<Option<ImageDataset>> {
        if let (Some(images), Some(labels)) = (&self.test_images, &self.test_labels) {
            return Ok(Some(load_idx(images, labels)?));
        }
        if self.idx_paths().is_none() {
            let s = self.synthetic.clone().unwrap_or_default();
            return Ok(Some(synthetic_blobs(
                s.k,
                s.d,
                s.test_per_class,
                s.separation,
                &mut rng_stream(self.seed, 101),
            )?));
        }
        Ok(None)
    }

    pub fn items(&self) -> anyhow::Result<usize> {
        match self.items {
            Some(i) => Ok(i),
            None => usage("--I is required"),
        }
    }

    pub fn supervision(&self) -> anyhow::Result<Supervision> {
        if self.ordinary {
            return Ok(Supervision::Ordinary);
        }
        Ok(Supervision::Qa {
            qtype: self.qtype,
            items: self.items()?,
        })
    }

    pub fn train_config(&self, seed: u64) -> anyhow::Result<TrainConfig> {
        Ok(TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            hidden: self.hidden,
            learning_rate: self.learning_rate,
            weight_decay: self.weight_decay,
            adam_beta1: self.adam_beta1,
            adam_beta2: self.adam_beta2,
            adam_eps: self.adam_eps,
            seed,
            repetitions: self.repetitions,
            supervision: self.supervision()?,
            base_loss: self.base_loss,
            eval_every: self.eval_every,
        })
    }
}
