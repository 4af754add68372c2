//! Shared fixtures for the benchmarks.

use ndarray::Array2;
use rand::Rng;

use qa_label::labeling::{rng_from_seed, simulate_dataset};
use qa_label::{AnnotatorModel, ClassSpace, LabelSubset, QuestionSpec, QuestionType};

/// `n` rows of uniform features in `[0, 1]` with simulated Q&A labels.
pub fn labeled_batch(
    n: usize,
    d: usize,
    k: usize,
    qtype: QuestionType,
    items: usize,
    seed: u64,
) -> (Array2<f64>, Vec<LabelSubset>) {
    let mut rng = rng_from_seed(seed);
    let x = Array2::from_shape_fn((n, d), |_| rng.random_range(0.0..1.0));
    let truth: Vec<usize> = (0..n).map(|_| rng.random_range(1..=k)).collect();
    let ids: Vec<String> = (0..n).map(|i| i.to_string()).collect();
    let spec =
        QuestionSpec::new(qtype, items, ClassSpace::new(k).expect("k >= 2")).expect("valid spec");
    let labels = simulate_dataset(seed, &spec, &AnnotatorModel::from_labels(&truth), &ids)
        .expect("ground truth in range")
        .into_iter()
        .map(|e| e.qa_label)
        .collect();
    (x, labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn batch_shapes() {
        let (x, labels) = labeled_batch(7, 3, 5, QuestionType::IsIn, 2, 0);
        assert_eq!(x.dim(), (7, 3));
        assert_eq!(labels.len(), 7);
        assert!(labels.iter().all(|l| l.len() == 2 || l.len() == 3));
    }
}
