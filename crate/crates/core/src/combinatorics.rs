//! Class-set arithmetic and fixed-size subset enumeration.
//!
//! Class ids are 1-based throughout: the class set of a [`ClassSpace`] with
//! `k` classes is `{1, ..., k}`.

use std::fmt;

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// A class id in `1..=K`.
pub type ClassId = usize;

/// Largest class count accepted by exhaustive enumeration paths.
pub const MAX_ENUMERABLE_K: usize = 24;

/// Tolerance on the total mass of a [`PosteriorVector`].
pub const SIMPLEX_TOL: f64 = 1e-12;

/// The total class set `{1, ..., K}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub struct ClassSpace {
    k: usize,
}

impl ClassSpace {
    pub fn new(k: usize) -> Result<Self> {
        if k < 2 {
            return invalid(format!("class count must be at least 2, got {k}"));
        }
        Ok(Self { k })
    }

    #[inline]
    pub fn k(self) -> usize {
        self.k
    }

    pub fn classes(self) -> impl Iterator<Item = ClassId> {
        1..=self.k
    }

    pub fn contains(self, class: ClassId) -> bool {
        (1..=self.k).contains(&class)
    }

    pub fn check_class(self, class: ClassId) -> Result<()> {
        if self.contains(class) {
            Ok(())
        } else {
            invalid(format!("class {class} outside 1..={}", self.k))
        }
    }

    /// The full class set as a subset.
    pub fn full(self) -> LabelSubset {
        LabelSubset {
            classes: (1..=self.k).collect(),
        }
    }

    pub(crate) fn ensure_enumerable(self) -> Result<()> {
        if self.k > MAX_ENUMERABLE_K {
            return Err(Error::Capacity(format!(
                "exhaustive enumeration supports K <= {MAX_ENUMERABLE_K}, got {}",
                self.k
            )));
        }
        Ok(())
    }
}

impl TryFrom<usize> for ClassSpace {
    type Error = Error;

    fn try_from(k: usize) -> Result<Self> {
        Self::new(k)
    }
}

impl From<ClassSpace> for usize {
    fn from(space: ClassSpace) -> usize {
        space.k
    }
}

/// A nonempty, strictly increasing set of class ids.
///
/// Holds ordinary labels (size 1), Q&A labels, question sets and
/// candidate labels alike. Equality and ordering are structural.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<ClassId>", into = "Vec<ClassId>")]
pub struct LabelSubset {
    classes: Vec<ClassId>,
}

impl LabelSubset {
    /// Builds a canonical subset: ids are sorted and deduplicated.
    ///
    /// Only checks that the set is nonempty and ids are positive; use
    /// [`LabelSubset::in_space`] to also bound ids by `K`.
    pub fn new(classes: impl IntoIterator<Item = ClassId>) -> Result<Self> {
        let mut classes: Vec<ClassId> = classes.into_iter().collect();
        classes.sort_unstable();
        classes.dedup();
        match classes.first() {
            None => invalid("label subset must be nonempty"),
            Some(0) => invalid("class ids are 1-based"),
            Some(_) => Ok(Self { classes }),
        }
    }

    pub fn in_space(space: ClassSpace, classes: impl IntoIterator<Item = ClassId>) -> Result<Self> {
        let subset = Self::new(classes)?;
        subset.check_space(space)?;
        Ok(subset)
    }

    pub fn singleton(class: ClassId) -> Result<Self> {
        Self::new([class])
    }

    /// `classes` must already be strictly increasing and nonempty.
    pub(crate) fn from_sorted(classes: Vec<ClassId>) -> Self {
        debug_assert!(!classes.is_empty());
        debug_assert!(classes.windows(2).all(|w| w[0] < w[1]));
        Self { classes }
    }

    pub fn check_space(&self, space: ClassSpace) -> Result<()> {
        match self.classes.last() {
            Some(&max) if max <= space.k() => Ok(()),
            _ => invalid(format!("{self} has ids outside 1..={}", space.k())),
        }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.classes.len()
    }

    /// Always false; present for API symmetry with collections.
    #[inline]
    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    #[inline]
    pub fn contains(&self, class: ClassId) -> bool {
        self.classes.binary_search(&class).is_ok()
    }

    pub fn iter(&self) -> impl Iterator<Item = ClassId> + '_ {
        self.classes.iter().copied()
    }

    pub fn as_slice(&self) -> &[ClassId] {
        &self.classes
    }

    /// Membership mask over `1..=K`, indexed by `class - 1`.
    pub fn mask(&self, space: ClassSpace) -> Vec<bool> {
        let mut mask = vec![false; space.k()];
        for c in self.iter() {
            mask[c - 1] = true;
        }
        mask
    }
}

impl TryFrom<Vec<ClassId>> for LabelSubset {
    type Error = Error;

    fn try_from(classes: Vec<ClassId>) -> Result<Self> {
        Self::new(classes)
    }
}

impl From<LabelSubset> for Vec<ClassId> {
    fn from(subset: LabelSubset) -> Self {
        subset.classes
    }
}

impl fmt::Debug for LabelSubset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for LabelSubset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, c) in self.classes.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{c}")?;
        }
        f.write_str("}")
    }
}

/// Class posterior `P(.|x)`, a point on the simplex.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(transparent)]
pub struct PosteriorVector {
    probs: Vec<f64>,
}

impl PosteriorVector {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.len() < 2 {
            return invalid("posterior needs at least 2 classes");
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return invalid("posterior entries must be finite and nonnegative");
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > SIMPLEX_TOL {
            return invalid(format!("posterior sums to {total}, not 1"));
        }
        Ok(Self { probs })
    }

    /// Rescales nonnegative weights onto the simplex.
    pub fn normalized(weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0 && total.is_finite()) {
            return invalid("weights must have positive finite total");
        }
        Self::new(weights.into_iter().map(|w| w / total).collect())
    }

    pub fn uniform(space: ClassSpace) -> Self {
        Self {
            probs: vec![1.0 / space.k() as f64; space.k()],
        }
    }

    /// One-hot posterior on `class`.
    pub fn one_hot(space: ClassSpace, class: ClassId) -> Result<Self> {
        space.check_class(class)?;
        let mut probs = vec![0.0; space.k()];
        probs[class - 1] = 1.0;
        Ok(Self { probs })
    }

    /// Draws a posterior uniformly from the simplex (flat Dirichlet).
    pub fn random<R: Rng + ?Sized>(space: ClassSpace, rng: &mut R) -> Self {
        let weights: Vec<f64> = (0..space.k())
            .map(|_| {
                let w: f64 = Exp1.sample(rng);
                w.max(f64::MIN_POSITIVE)
            })
            .collect();
        Self::normalized(weights).expect("positive weights")
    }

    pub fn space(&self) -> ClassSpace {
        ClassSpace {
            k: self.probs.len(),
        }
    }

    #[inline]
    pub fn k(&self) -> usize {
        self.probs.len()
    }

    /// Probability of a 1-based class id.
    #[inline]
    pub fn prob(&self, class: ClassId) -> f64 {
        self.probs[class - 1]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.probs
    }

    /// Mass of the classes in `subset`.
    pub fn mass(&self, subset: &LabelSubset) -> f64 {
        subset.iter().map(|c| self.prob(c)).sum()
    }
}

impl<'de> Deserialize<'de> for PosteriorVector {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let probs = Vec::<f64>::deserialize(deserializer)?;
        Self::new(probs).map_err(serde::de::Error::custom)
    }
}

/// Exact binomial coefficient for `0 <= k <= n <= 64`.
pub fn binomial(n: u64, k: u64) -> Result<u64> {
    if k > n || n > 64 {
        return invalid(format!("binomial({n}, {k}) outside 0 <= k <= n <= 64"));
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // Each partial product is itself a binomial coefficient, so the
        // division is exact.
        acc = acc * u128::from(n - i) / u128::from(i + 1);
    }
    Ok(acc as u64)
}

/// `binomial` as a float, for class counts already validated elsewhere.
pub(crate) fn binomial_f64(n: usize, k: usize) -> f64 {
    binomial(n as u64, k as u64).expect("validated binomial arguments") as f64
}

/// All size-`size` subsets of the class set, in lexicographic order.
pub fn enumerate_subsets(space: ClassSpace, size: usize) -> Result<Vec<LabelSubset>> {
    space.ensure_enumerable()?;
    Ok(SubsetIter::new(space, size)?.collect())
}

/// Lexicographic iterator over the size-`size` subsets of `{1..K}`.
#[derive(Clone, Debug)]
pub struct SubsetIter {
    k: usize,
    current: Option<Vec<ClassId>>,
}

impl SubsetIter {
    pub fn new(space: ClassSpace, size: usize) -> Result<Self> {
        if size == 0 || size > space.k() {
            return invalid(format!("subset size {size} outside 1..={}", space.k()));
        }
        Ok(Self {
            k: space.k(),
            current: Some((1..=size).collect()),
        })
    }
}

impl Iterator for SubsetIter {
    type Item = LabelSubset;

    fn next(&mut self) -> Option<LabelSubset> {
        let current = self.current.take()?;
        let out = LabelSubset::from_sorted(current.clone());

        let mut next = current;
        let size = next.len();
        // Rightmost position that can still be incremented.
        let pivot = (0..size).rev().find(|&i| next[i] < self.k - (size - 1 - i));
        if let Some(i) = pivot {
            next[i] += 1;
            for j in i + 1..size {
                next[j] = next[j - 1] + 1;
            }
            self.current = Some(next);
        }
        Some(out)
    }
}

/// `Y \ s`, sorted. Fails when `s` is the full class set.
pub fn complement(space: ClassSpace, subset: &LabelSubset) -> Result<LabelSubset> {
    subset.check_space(space)?;
    let rest: Vec<ClassId> = space.classes().filter(|&c| !subset.contains(c)).collect();
    if rest.is_empty() {
        return invalid("complement of the full class set is empty");
    }
    Ok(LabelSubset::from_sorted(rest))
}
