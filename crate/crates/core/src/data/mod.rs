//! Datasets and the labeling-event store.

mod idx;
mod store;

pub use idx::{
    load_idx, parse_idx_images, parse_idx_labels, write_idx_images, write_idx_labels, IdxImages,
};
pub use store::{append_events, read_events, EventWriter, Origin, StoredEvent};

use std::io::Write;
use std::path::Path;

use ndarray::{Array2, Axis};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::combinatorics::{ClassId, ClassSpace};
use crate::error::{invalid, Error, Result};
use crate::model::{EpochMetrics, TestData};

/// Where a dataset came from.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct DatasetMeta {
    pub source: String,
    /// `(rows, cols)` for image data.
    pub image_shape: Option<(usize, usize)>,
}

/// Features in `[0, 1]` with 1-based class labels.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageDataset {
    pub features: Array2<f64>,
    pub labels: Vec<ClassId>,
    pub space: ClassSpace,
    pub meta: DatasetMeta,
}

impl ImageDataset {
    pub fn new(
        features: Array2<f64>,
        labels: Vec<ClassId>,
        space: ClassSpace,
        meta: DatasetMeta,
    ) -> Result<Self> {
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
        if let Some(v) = features.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return invalid(format!("feature value {v} outside [0, 1]"));
        }
        if let Some((r, c)) = meta.image_shape {
            if r * c != features.ncols() {
                return Err(Error::ShapeMismatch(format!(
                    "image shape {r}x{c} does not match {} features",
                    features.ncols()
                )));
            }
        }
        Ok(Self {
            features,
            labels,
            space,
            meta,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    /// Instance ids are row indices rendered as strings.
    pub fn instance_ids(&self) -> Vec<String> {
        (0..self.len()).map(|i| i.to_string()).collect()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.space.k()];
        for &y in &self.labels {
            counts[y - 1] += 1;
        }
        counts
    }

    /// Rows in the given order.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        if let Some(&i) = indices.iter().find(|&&i| i >= self.len()) {
            return invalid(format!(
                "index {i} out of range for {} instances",
                self.len()
            ));
        }
        Ok(Self {
            features: self.features.select(Axis(0), indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            space: self.space,
            meta: self.meta.clone(),
        })
    }

    /// Row `i` as 8-bit grayscale pixels.
    pub fn pixels(&self, i: usize) -> Vec<u8> {
        self.features
            .row(i)
            .iter()
            .map(|v| (v * 255.0).round().clamp(0.0, 255.0) as u8)
            .collect()
    }

    pub fn to_test_data(&self) -> Result<TestData> {
        TestData::new(self.features.clone(), self.labels.clone(), self.space)
    }
}

/// Indices of `per_class` instances of every class, drawn uniformly
/// without replacement, returned in ascending order.
pub fn subsample_indices<R: Rng + ?Sized>(
    ds: &ImageDataset,
    per_class: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); ds.space.k()];
    for (i, &y) in ds.labels.iter().enumerate() {
        by_class[y - 1].push(i);
    }
    let mut chosen = Vec::with_capacity(per_class * ds.space.k());
    for (c, members) in by_class.iter().enumerate() {
        if members.len() < per_class {
            return invalid(format!(
                "class {} has {} instances, {per_class} requested",
                c + 1,
                members.len()
            ));
        }
        chosen.extend(
            rand::seq::index::sample(rng, members.len(), per_class)
                .iter()
                .map(|j| members[j]),
        );
    }
    chosen.sort_unstable();
    Ok(chosen)
}

pub fn subsample_per_class<R: Rng + ?Sized>(
    ds: &ImageDataset,
    per_class: usize,
    rng: &mut R,
) -> Result<ImageDataset> {
    ds.select(&subsample_indices(ds, per_class, rng)?)
}

/// Unit-variance Gaussian clusters, `per_class` points each, rows
/// interleaved by class.
///
/// When `d >= K` the means sit at `separation / sqrt(2) * e_k`, so every
/// pair is exactly `separation` apart; otherwise they are random
/// directions of the same norm. Features are mapped through
/// `x -> (x + a) / (2a)` with `a = separation / sqrt(2) + 4` and clipped
/// to `[0, 1]`.
pub fn synthetic_blobs<R: Rng + ?Sized>(
    k: usize,
    d: usize,
    per_class: usize,
    separation: f64,
    rng: &mut R,
) -> Result<ImageDataset> {
    let space = ClassSpace::new(k)?;
    if d < 2 {
        return invalid("blobs need d >= 2");
    }
    if !(separation >= 0.0 && separation.is_finite()) {
        return invalid(format!("separation must be nonnegative, got {separation}"));
    }
    let radius = separation / std::f64::consts::SQRT_2;
    let means: Vec<Vec<f64>> = (0..k)
        .map(|c| {
            if d >= k {
                let mut m = vec![0.0; d];
                m[c] = radius;
                m
            } else {
                let dir: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
                let norm = dir
                    .iter()
                    .map(|v| v * v)
                    .sum::<f64>()
                    .sqrt()
                    .max(f64::MIN_POSITIVE);
                dir.iter().map(|v| v / norm * radius).collect()
            }
        })
        .collect();
    let a = radius + 4.0;
    let n = k * per_class;
    let labels: Vec<ClassId> = (0..n).map(|i| i % k + 1).collect();
    let mut features = Array2::zeros((n, d));
    for (i, mut row) in features.outer_iter_mut().enumerate() {
        let mean = &means[labels[i] - 1];
        for (v, m) in row.iter_mut().zip(mean) {
            let noise: f64 = StandardNormal.sample(rng);
            *v = ((m + noise + a) / (2.0 * a)).clamp(0.0, 1.0);
        }
    }
    ImageDataset::new(
        features,
        labels,
        space,
        DatasetMeta {
            source: format!("synthetic_blobs(K={k}, d={d}, separation={separation})"),
            image_shape: None,
        },
    )
}

/// Per-epoch metrics as CSV with a header row; missing test metrics are
/// left empty.
pub fn write_metrics_csv<W: Write>(mut out: W, metrics: &[EpochMetrics]) -> Result<()> {
    writeln!(out, "epoch,train_qa_risk,test_mae,test_accuracy")?;
    for m in metrics {
        match m.test {
            Some(t) => writeln!(
                out,
                "{},{},{},{}",
                m.epoch, m.train_qa_risk, t.mae, t.accuracy
            )?,
            None => writeln!(out, "{},{},,", m.epoch, m.train_qa_risk)?,
        }
    }
    Ok(())
}

pub fn save_metrics_csv(path: &Path, metrics: &[EpochMetrics]) -> Result<()> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_metrics_csv(&mut file, metrics)?;
    file.flush()?;
    Ok(())
}
