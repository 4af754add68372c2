//! Label generative models of the Q&A procedures and the candidate-label
//! baseline, receiver-confidence mixtures, and posterior inversion.
//!
//! Every pmf is stored sparsely over its support. Where two answer
//! branches produce label sets of the same size (which-one with
//! `I = K - 1`, is-in with `2I = K`) their masses are accumulated per key.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::combinatorics::{
    binomial_f64, enumerate_subsets, ClassId, ClassSpace, LabelSubset, PosteriorVector, SubsetIter,
    SIMPLEX_TOL,
};
use crate::error::{invalid, Error, Result};
use crate::labeling::{answer_question, assign_label, check_items, QuestionType};

/// Tolerance for accepting a pmf whose inverse leaves the simplex slightly.
pub const INVERSION_TOL: f64 = 1e-9;

/// The labeling procedure a pmf describes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Procedure {
    WhichOne(usize),
    IsIn(usize),
    Candidate(usize),
    Ordinary,
}

impl Procedure {
    pub fn qa(qtype: QuestionType, items: usize) -> Self {
        match qtype {
            QuestionType::WhichOne => Procedure::WhichOne(items),
            QuestionType::IsIn => Procedure::IsIn(items),
        }
    }

    /// Label sizes the procedure can produce.
    pub fn support_sizes(self, space: ClassSpace) -> Vec<usize> {
        let k = space.k();
        let mut sizes = match self {
            Procedure::WhichOne(i) => vec![1, k - i],
            Procedure::IsIn(i) => vec![i, k - i],
            Procedure::Candidate(n) => vec![n],
            Procedure::Ordinary => vec![1],
        };
        sizes.sort_unstable();
        sizes.dedup();
        sizes
    }

    fn name(self) -> &'static str {
        match self {
            Procedure::WhichOne(_) => "which_one",
            Procedure::IsIn(_) => "is_in",
            Procedure::Candidate(_) => "candidate",
            Procedure::Ordinary => "ordinary",
        }
    }

    fn parameter(self) -> Option<usize> {
        match self {
            Procedure::WhichOne(i) | Procedure::IsIn(i) | Procedure::Candidate(i) => Some(i),
            Procedure::Ordinary => None,
        }
    }
}

/// A probability mass function over label subsets.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelPmf {
    space: ClassSpace,
    procedure: Procedure,
    entries: BTreeMap<LabelSubset, f64>,
}

impl LabelPmf {
    pub fn empty(space: ClassSpace, procedure: Procedure) -> Self {
        Self {
            space,
            procedure,
            entries: BTreeMap::new(),
        }
    }

    /// Adds `mass` to `label`, merging with any existing entry.
    pub fn accumulate(&mut self, label: LabelSubset, mass: f64) {
        *self.entries.entry(label).or_insert(0.0) += mass;
    }

    pub fn space(&self) -> ClassSpace {
        self.space
    }

    pub fn procedure(&self) -> Procedure {
        self.procedure
    }

    /// Mass of `label`; zero off the support.
    pub fn prob(&self, label: &LabelSubset) -> f64 {
        self.entries.get(label).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&LabelSubset, f64)> {
        self.entries.iter().map(|(k, &v)| (k, v))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.entries.values().sum()
    }

    /// `sum over labels containing class` of the label's mass.
    pub fn inclusion_mass(&self, class: ClassId) -> f64 {
        self.iter()
            .filter(|(l, _)| l.contains(class))
            .map(|(_, p)| p)
            .sum()
    }

    /// Checks nonnegativity, unit mass, and support sizes.
    pub fn validate(&self) -> Result<()> {
        let sizes = self.procedure.support_sizes(self.space);
        for (label, p) in self.iter() {
            label.check_space(self.space)?;
            if !(p >= 0.0 && p.is_finite()) {
                return Err(Error::InconsistentPmf(format!("mass {p} on {label}")));
            }
            if !sizes.contains(&label.len()) {
                return Err(Error::InconsistentPmf(format!(
                    "label {label} outside the support of {:?}",
                    self.procedure
                )));
            }
        }
        let total = self.total_mass();
        if (total - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::InconsistentPmf(format!("total mass {total}")));
        }
        Ok(())
    }

    /// Largest absolute difference over the union of both supports.
    pub fn max_abs_diff(&self, other: &LabelPmf) -> f64 {
        let mut worst: f64 = 0.0;
        for (label, p) in self.iter() {
            worst = worst.max((p - other.prob(label)).abs());
        }
        for (label, q) in other.iter() {
            worst = worst.max((q - self.prob(label)).abs());
        }
        worst
    }
}

#[derive(Serialize, Deserialize)]
struct PmfEntryWire {
    label: LabelSubset,
    p: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PmfWire {
    procedure: String,
    #[serde(rename = "K")]
    k: usize,
    #[serde(rename = "I")]
    items: Option<usize>,
    entries: Vec<PmfEntryWire>,
}

impl Serialize for LabelPmf {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        PmfWire {
            procedure: self.procedure.name().to_owned(),
            k: self.space.k(),
            items: self.procedure.parameter(),
            entries: self
                .iter()
                .map(|(label, p)| PmfEntryWire {
                    label: label.clone(),
                    p,
                })
                .collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for LabelPmf {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        use serde::de::Error as _;
        let wire = PmfWire::deserialize(deserializer)?;
        let space = ClassSpace::new(wire.k).map_err(D::Error::custom)?;
        let need = |items: Option<usize>| items.ok_or_else(|| D::Error::custom("missing `I`"));
        let procedure = match wire.procedure.as_str() {
            "which_one" => Procedure::WhichOne(need(wire.items)?),
            "is_in" => Procedure::IsIn(need(wire.items)?),
            "candidate" => Procedure::Candidate(need(wire.items)?),
            "ordinary" => Procedure::Ordinary,
            other => return Err(D::Error::custom(format!("unknown procedure `{other}`"))),
        };
        let mut pmf = LabelPmf::empty(space, procedure);
        for entry in wire.entries {
            pmf.accumulate(entry.label, entry.p);
        }
        Ok(pmf)
    }
}

/// Which-one label distribution:
/// `P({y}) = (I/K) P(y|x)` and `P(s) = mass(s) / C(K, I)` for `|s| = K - I`.
pub fn whichone_pmf(posterior: &PosteriorVector, items: usize) -> Result<LabelPmf> {
    let space = posterior.space();
    check_items(space, items)?;
    let k = space.k();
    let mut pmf = LabelPmf::empty(space, Procedure::WhichOne(items));
    let singleton_scale = items as f64 / k as f64;
    for y in space.classes() {
        pmf.accumulate(
            LabelSubset::from_sorted(vec![y]),
            singleton_scale * posterior.prob(y),
        );
    }
    let c = binomial_f64(k, items);
    for s in enumerate_subsets(space, k - items)? {
        let mass = posterior.mass(&s) / c;
        pmf.accumulate(s, mass);
    }
    Ok(pmf)
}

/// Is-in label distribution: `P(s) = mass(s) / C(K, I)` over sets of size
/// `I` and `K - I`.
pub fn isin_pmf(posterior: &PosteriorVector, items: usize) -> Result<LabelPmf> {
    let space = posterior.space();
    check_items(space, items)?;
    let k = space.k();
    let c = binomial_f64(k, items);
    let mut pmf = LabelPmf::empty(space, Procedure::IsIn(items));
    // "yes" answers label the question set, "no" answers its complement
    for size in [items, k - items] {
        for s in enumerate_subsets(space, size)? {
            let mass = posterior.mass(&s) / c;
            pmf.accumulate(s, mass);
        }
    }
    Ok(pmf)
}

/// Label distribution of the Q&A procedure `qtype`.
pub fn qa_pmf(qtype: QuestionType, posterior: &PosteriorVector, items: usize) -> Result<LabelPmf> {
    match qtype {
        QuestionType::WhichOne => whichone_pmf(posterior, items),
        QuestionType::IsIn => isin_pmf(posterior, items),
    }
}

/// Label distribution given the annotator's inferred class `z`.
pub fn conditional_pmf(
    qtype: QuestionType,
    z: ClassId,
    items: usize,
    space: ClassSpace,
) -> Result<LabelPmf> {
    space.check_class(z)?;
    check_items(space, items)?;
    let k = space.k();
    let c = binomial_f64(k, items);
    let mut pmf = LabelPmf::empty(space, Procedure::qa(qtype, items));
    match qtype {
        QuestionType::WhichOne => {
            pmf.accumulate(LabelSubset::from_sorted(vec![z]), items as f64 / k as f64);
            // "not included": Y \ q for each q avoiding z, i.e. each
            // (K - I)-set containing z
            for s in SubsetIter::new(space, k - items)?.filter(|s| s.contains(z)) {
                pmf.accumulate(s, 1.0 / c);
            }
        }
        QuestionType::IsIn => {
            for size in [items, k - items] {
                for s in SubsetIter::new(space, size)?.filter(|s| s.contains(z)) {
                    pmf.accumulate(s, 1.0 / c);
                }
            }
        }
    }
    Ok(pmf)
}

/// Brute-force reference pmf.
///
/// Enumerates every (inferred class, question set) pair, weights it by
/// `P(z|x) / C(K, I)`, and applies the answering and labeling rules
/// directly. Shares no formula with [`whichone_pmf`] or [`isin_pmf`].
pub fn oracle_pmf(
    qtype: QuestionType,
    posterior: &PosteriorVector,
    items: usize,
) -> Result<LabelPmf> {
    let space = posterior.space();
    space.ensure_enumerable()?;
    check_items(space, items)?;
    let questions = enumerate_subsets(space, items)?;
    let weight = 1.0 / questions.len() as f64;
    let mut pmf = LabelPmf::empty(space, Procedure::qa(qtype, items));
    for z in space.classes() {
        let pz = posterior.prob(z);
        for q in &questions {
            let answer = answer_question(z, qtype, q);
            let label = assign_label(qtype, q, answer, space)?;
            pmf.accumulate(label, pz * weight);
        }
    }
    Ok(pmf)
}

/// Candidate-label model: `P(s) = mass(s) / C(K-1, N-1)` over sets of size `N`.
pub fn candidate_pmf(posterior: &PosteriorVector, n: usize) -> Result<LabelPmf> {
    let space = posterior.space();
    check_candidate_size(space, n)?;
    let c = binomial_f64(space.k() - 1, n - 1);
    let mut pmf = LabelPmf::empty(space, Procedure::Candidate(n));
    for s in enumerate_subsets(space, n)? {
        let mass = posterior.mass(&s) / c;
        pmf.accumulate(s, mass);
    }
    Ok(pmf)
}

fn check_candidate_size(space: ClassSpace, n: usize) -> Result<()> {
    if n == 0 || n >= space.k() {
        return invalid(format!(
            "candidate size must be in 1..={}, got {n}",
            space.k() - 1
        ));
    }
    Ok(())
}

/// The receiver's belief `Pr{Yhat = a | x} = beta P(a|x) + (1 - beta) / K`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReceiverConfidence {
    pub beta: f64,
    pub mixture: PosteriorVector,
}

impl ReceiverConfidence {
    pub fn from_beta(beta: f64, posterior: &PosteriorVector) -> Result<Self> {
        if !(0.0..=1.0).contains(&beta) {
            return invalid(format!("beta {beta} outside [0, 1]"));
        }
        let uniform = (1.0 - beta) / posterior.k() as f64;
        let mixture = posterior
            .as_slice()
            .iter()
            .map(|&p| beta * p + uniform)
            .collect();
        Ok(Self {
            beta,
            mixture: PosteriorVector::normalized(mixture)?,
        })
    }
}

/// Noise-mixture weight of a Q&A procedure.
pub fn receiver_beta(qtype: QuestionType, space: ClassSpace, items: usize) -> Result<f64> {
    check_items(space, items)?;
    let km1 = (space.k() - 1) as f64;
    Ok(match qtype {
        QuestionType::WhichOne => items as f64 / km1,
        QuestionType::IsIn => 1.0 / km1,
    })
}

/// Noise-mixture weight of the size-`N` candidate-label model.
pub fn candidate_beta(space: ClassSpace, n: usize) -> Result<f64> {
    check_candidate_size(space, n)?;
    let k = space.k() as f64;
    let n = n as f64;
    Ok((k - n) / (n * (k - 1.0)))
}

pub fn receiver_confidence(
    qtype: QuestionType,
    posterior: &PosteriorVector,
    items: usize,
) -> Result<ReceiverConfidence> {
    let beta = receiver_beta(qtype, posterior.space(), items)?;
    ReceiverConfidence::from_beta(beta, posterior)
}

pub fn receiver_confidence_candidate(
    posterior: &PosteriorVector,
    n: usize,
) -> Result<ReceiverConfidence> {
    let beta = candidate_beta(posterior.space(), n)?;
    ReceiverConfidence::from_beta(beta, posterior)
}

/// `Pr{Yhat = a | x}` computed straight from a label pmf, assuming the
/// receiver spreads belief uniformly over the classes of each label.
pub fn receiver_confidence_direct(pmf: &LabelPmf) -> Vec<f64> {
    let mut belief = vec![0.0; pmf.space().k()];
    for (label, p) in pmf.iter() {
        let share = p / label.len() as f64;
        for c in label.iter() {
            belief[c - 1] += share;
        }
    }
    belief
}

/// Recovers `P(.|x)` from a Q&A label pmf.
///
/// With `s_y` the total mass of labels containing `y`:
/// which-one: `P(y) = K(K-1) s_y / (I(2K-I-1)) - (K-I)(K-I-1) / (I(2K-I-1))`;
/// is-in: `P(y) = K(K-1) s_y / (2I(K-I)) + 1 - K(K-1) / (2I(K-I))`.
pub fn invert_to_posterior(
    qtype: QuestionType,
    pmf: &LabelPmf,
    items: usize,
) -> Result<PosteriorVector> {
    let space = pmf.space();
    check_items(space, items)?;
    let k = space.k() as f64;
    let i = items as f64;
    let (scale, offset) = match qtype {
        QuestionType::WhichOne => {
            let d = i * (2.0 * k - i - 1.0);
            (k * (k - 1.0) / d, -(k - i) * (k - i - 1.0) / d)
        }
        QuestionType::IsIn => {
            let a = k * (k - 1.0) / (2.0 * i * (k - i));
            (a, 1.0 - a)
        }
    };
    let mut inclusion = vec![0.0; space.k()];
    for (label, p) in pmf.iter() {
        for c in label.iter() {
            inclusion[c - 1] += p;
        }
    }
    let mut probs = Vec::with_capacity(space.k());
    for (idx, s) in inclusion.into_iter().enumerate() {
        let p = scale * s + offset;
        let p = if (-INVERSION_TOL..0.0).contains(&p) {
            0.0
        } else if p > 1.0 && p <= 1.0 + INVERSION_TOL {
            1.0
        } else {
            p
        };
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InconsistentPmf(format!(
                "recovered P({}|x) = {p} outside [0, 1]",
                idx + 1
            )));
        }
        probs.push(p);
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > INVERSION_TOL {
        return Err(Error::InconsistentPmf(format!(
            "recovered posterior sums to {total}"
        )));
    }
    PosteriorVector::normalized(probs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::labeling::rng_from_seed;

    const TOL: f64 = 1e-12;

    fn space(k: usize) -> ClassSpace {
        ClassSpace::new(k).unwrap()
    }

    fn set(ids: &[ClassId]) -> LabelSubset {
        LabelSubset::new(ids.iter().copied()).unwrap()
    }

    fn p532() -> PosteriorVector {
        PosteriorVector::new(vec![0.5, 0.3, 0.2]).unwrap()
    }

    #[test]
    fn which_one_small_cases() {
        let uniform = PosteriorVector::uniform(space(3));
        let pmf = whichone_pmf(&uniform, 1).unwrap();
        for y in 1..=3 {
            assert!((pmf.prob(&set(&[y])) - 1.0 / 9.0).abs() < TOL);
        }
        for pair in [[1, 2], [1, 3], [2, 3]] {
            assert!((pmf.prob(&set(&pair)) - 2.0 / 9.0).abs() < TOL);
        }
        let pmf = whichone_pmf(&p532(), 1).unwrap();
        assert!((pmf.prob(&set(&[1])) - 1.0 / 6.0).abs() < TOL);
        assert!((pmf.prob(&set(&[2, 3])) - 1.0 / 6.0).abs() < TOL);
        pmf.validate().unwrap();
    }

    #[test]
    fn which_one_at_k_minus_one_is_ordinary() {
        let mut rng = rng_from_seed(1);
        for k in 2..=7 {
            let p = PosteriorVector::random(space(k), &mut rng);
            let pmf = whichone_pmf(&p, k - 1).unwrap();
            assert_eq!(pmf.len(), k);
            for y in 1..=k {
                assert!((pmf.prob(&set(&[y])) - p.prob(y)).abs() < TOL);
            }
        }
    }

    #[test]
    fn is_in_small_cases() {
        let pmf = isin_pmf(&PosteriorVector::uniform(space(4)), 2).unwrap();
        assert_eq!(pmf.len(), 6);
        for (_, p) in pmf.iter() {
            assert!((p - 1.0 / 6.0).abs() < TOL);
        }
        let pmf = isin_pmf(&p532(), 1).unwrap();
        assert!((pmf.prob(&set(&[1])) - 1.0 / 6.0).abs() < TOL);
        assert!((pmf.prob(&set(&[1, 2])) - 0.8 / 3.0).abs() < TOL);
        pmf.validate().unwrap();
    }

    #[test]
    fn is_in_symmetric_in_items() {
        let mut rng = rng_from_seed(2);
        for k in 2..=7 {
            for _ in 0..10 {
                let p = PosteriorVector::random(space(k), &mut rng);
                for i in 1..k {
                    let a = isin_pmf(&p, i).unwrap();
                    let b = isin_pmf(&p, k - i).unwrap();
                    assert!(a.iter().eq(b.iter()));
                }
            }
        }
    }

    #[test]
    fn invalid_items_rejected() {
        assert!(whichone_pmf(&p532(), 0).is_err());
        assert!(whichone_pmf(&p532(), 3).is_err());
        assert!(isin_pmf(&p532(), 3).is_err());
        assert!(candidate_pmf(&p532(), 3).is_err());
        assert!(conditional_pmf(QuestionType::IsIn, 4, 1, space(3)).is_err());
    }

    #[test]
    fn conditional_matches_lemma_values() {
        let pmf = conditional_pmf(QuestionType::WhichOne, 1, 1, space(3)).unwrap();
        assert_eq!(pmf.len(), 3);
        for label in [set(&[1]), set(&[1, 2]), set(&[1, 3])] {
            assert!((pmf.prob(&label) - 1.0 / 3.0).abs() < TOL);
        }
        for qtype in QuestionType::ALL {
            for k in 2..=6 {
                for i in 1..k {
                    for z in 1..=k {
                        let pmf = conditional_pmf(qtype, z, i, space(k)).unwrap();
                        assert!((pmf.total_mass() - 1.0).abs() < TOL);
                        assert!(pmf.iter().all(|(l, _)| l.contains(z)));
                    }
                }
            }
        }
    }

    #[test]
    fn marginalized_conditionals_give_procedure_pmf() {
        let mut rng = rng_from_seed(3);
        for qtype in QuestionType::ALL {
            for k in 2..=6 {
                let p = PosteriorVector::random(space(k), &mut rng);
                for i in 1..k {
                    let mut mixed = LabelPmf::empty(space(k), Procedure::qa(qtype, i));
                    for z in 1..=k {
                        for (label, m) in conditional_pmf(qtype, z, i, space(k)).unwrap().iter() {
                            mixed.accumulate(label.clone(), p.prob(z) * m);
                        }
                    }
                    let direct = qa_pmf(qtype, &p, i).unwrap();
                    assert!(mixed.max_abs_diff(&direct) < TOL, "{qtype} K={k} I={i}");
                }
            }
        }
    }

    #[test]
    fn oracle_rejects_large_k() {
        let p = PosteriorVector::uniform(space(25));
        assert!(matches!(
            oracle_pmf(QuestionType::IsIn, &p, 2),
            Err(Error::Capacity(_))
        ));
    }

    #[test]
    fn oracle_uniform_is_relabeling_invariant() {
        for qtype in QuestionType::ALL {
            let pmf = oracle_pmf(qtype, &PosteriorVector::uniform(space(5)), 2).unwrap();
            // mass depends only on label size
            let mut by_size: BTreeMap<usize, f64> = BTreeMap::new();
            for (label, p) in pmf.iter() {
                let first = *by_size.entry(label.len()).or_insert(p);
                assert!((first - p).abs() < TOL);
            }
        }
    }

    #[test]
    fn receiver_betas() {
        let k10 = space(10);
        assert!((receiver_beta(QuestionType::WhichOne, k10, 3).unwrap() - 1.0 / 3.0).abs() < TOL);
        for i in 1..10 {
            assert!((receiver_beta(QuestionType::IsIn, k10, i).unwrap() - 1.0 / 9.0).abs() < TOL);
        }
        let p = PosteriorVector::random(k10, &mut rng_from_seed(4));
        let rc = receiver_confidence(QuestionType::WhichOne, &p, 9).unwrap();
        assert_eq!(rc.beta, 1.0);
        for (a, b) in rc.mixture.as_slice().iter().zip(p.as_slice()) {
            assert!((a - b).abs() < TOL);
        }
        // N = K/(I+1): K=10, I=4 gives N=2, both 4/9
        let cand = candidate_beta(k10, 2).unwrap();
        assert!((cand - 4.0 / 9.0).abs() < TOL);
        assert!((receiver_beta(QuestionType::WhichOne, k10, 4).unwrap() - cand).abs() < TOL);
    }

    #[test]
    fn candidate_special_cases() {
        let mut rng = rng_from_seed(5);
        for k in 2..=7 {
            let p = PosteriorVector::random(space(k), &mut rng);
            let ordinary = candidate_pmf(&p, 1).unwrap();
            for y in 1..=k {
                assert!((ordinary.prob(&set(&[y])) - p.prob(y)).abs() < TOL);
            }
            // complementary labels: P(Y \ {y}) = (1 - P(y)) / (K - 1)
            let comp = candidate_pmf(&p, k - 1).unwrap();
            comp.validate().unwrap();
            for y in 1..=k {
                let label = crate::combinatorics::complement(space(k), &set(&[y])).unwrap();
                let expected = (1.0 - p.prob(y)) / (k - 1) as f64;
                assert!((comp.prob(&label) - expected).abs() < TOL);
            }
            for n in 1..k {
                let pmf = candidate_pmf(&p, n).unwrap();
                let direct = receiver_confidence_direct(&pmf);
                let mixed = receiver_confidence_candidate(&p, n).unwrap();
                for (a, b) in direct.iter().zip(mixed.mixture.as_slice()) {
                    assert!((a - b).abs() < TOL);
                }
            }
        }
    }

    #[test]
    fn inversion_round_trips() {
        let mut rng = rng_from_seed(6);
        for qtype in QuestionType::ALL {
            for k in 3..=6 {
                for _ in 0..20 {
                    let p = PosteriorVector::random(space(k), &mut rng);
                    for i in 1..k {
                        let back =
                            invert_to_posterior(qtype, &qa_pmf(qtype, &p, i).unwrap(), i).unwrap();
                        for (a, b) in back.as_slice().iter().zip(p.as_slice()) {
                            assert!((a - b).abs() < TOL);
                        }
                    }
                }
            }
        }
        let uniform = PosteriorVector::uniform(space(4));
        let back =
            invert_to_posterior(QuestionType::IsIn, &isin_pmf(&uniform, 1).unwrap(), 1).unwrap();
        for p in back.as_slice() {
            assert!((p - 0.25).abs() < TOL);
        }
    }

    #[test]
    fn inversion_rejects_inconsistent_pmf() {
        let mut pmf = LabelPmf::empty(space(3), Procedure::WhichOne(1));
        pmf.accumulate(set(&[1]), 1.0);
        // every label is a singleton of class 1: s_1 = 1, recovered P(1) = 2 - 1/2
        assert!(matches!(
            invert_to_posterior(QuestionType::WhichOne, &pmf, 1),
            Err(Error::InconsistentPmf(_))
        ));
    }

    #[test]
    fn pmf_json_round_trip() {
        let pmf = whichone_pmf(&p532(), 1).unwrap();
        let json = serde_json::to_value(&pmf).unwrap();
        assert_eq!(json["procedure"], "which_one");
        assert_eq!(json["K"], 3);
        assert_eq!(json["I"], 1);
        assert_eq!(json["entries"][0]["label"], serde_json::json!([1]));
        let back: LabelPmf = serde_json::from_value(json).unwrap();
        assert_eq!(back, pmf);
    }
}
