//! Self-contained consistency checks over small class spaces.
//!
//! Every check compares two independent routes to the same quantity on
//! random posteriors, for every `K` in a range, every valid `I` and both
//! question types, and reports the largest deviation seen.

use serde::Serialize;

use crate::combinatorics::{ClassSpace, PosteriorVector};
use crate::error::{invalid, Result};
use crate::generative::{
    candidate_beta, candidate_pmf, conditional_pmf, invert_to_posterior, oracle_pmf, qa_pmf,
    receiver_beta, receiver_confidence, receiver_confidence_candidate, receiver_confidence_direct,
    LabelPmf, Procedure,
};
use crate::labeling::{derive_seed, rng_from_seed, QuestionType};
use crate::losses::{qa_coefficient, risk_identity_with_coefficient};
use rand::Rng;

pub const PMF_TOL: f64 = 1e-12;
pub const RISK_TOL: f64 = 1e-10;
pub const INVERSION_CHECK_TOL: f64 = 1e-12;
pub const MIXTURE_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerifyConfig {
    pub k_min: usize,
    pub k_max: usize,
    /// Random posteriors per `K`.
    pub posteriors: usize,
    pub seed: u64,
    /// Relative error injected into the risk-rewriting coefficient. Zero
    /// in normal use; nonzero values must make the unbiasedness check fail.
    pub coefficient_fault: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            k_min: 2,
            k_max: 6,
            posteriors: 100,
            seed: 0,
            coefficient_fault: 0.0,
        }
    }
}

/// Where a check saw its largest deviation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Case {
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "I")]
    pub items: usize,
    pub qtype: Option<QuestionType>,
    /// Seed of the posterior.
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub max_deviation: f64,
    pub tolerance: f64,
    pub cases: usize,
    pub worst: Option<Case>,
}

impl CheckResult {
    fn new(name: &'static str, tolerance: f64) -> Self {
        Self {
            name,
            max_deviation: 0.0,
            tolerance,
            cases: 0,
            worst: None,
        }
    }

    fn record(&mut self, deviation: f64, case: Case) {
        self.cases += 1;
        // NaN counts as a failure
        if deviation.is_nan() || deviation > self.max_deviation {
            self.max_deviation = deviation;
            self.worst = Some(case);
        }
    }

    pub fn passed(&self) -> bool {
        self.max_deviation <= self.tolerance
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerifyReport {
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(CheckResult::passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckResult> {
        self.checks.iter().filter(|c| !c.passed())
    }
}

fn max_abs(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn marginalized(
    qtype: QuestionType,
    posterior: &PosteriorVector,
    items: usize,
) -> Result<LabelPmf> {
    let space = posterior.space();
    let mut pmf = LabelPmf::empty(space, Procedure::qa(qtype, items));
    for z in space.classes() {
        for (label, p) in conditional_pmf(qtype, z, items, space)?.iter() {
            pmf.accumulate(label.clone(), posterior.prob(z) * p);
        }
    }
    Ok(pmf)
}

pub fn run_verification(cfg: &VerifyConfig) -> Result<VerifyReport> {
    if cfg.k_min < 2 || cfg.k_min > cfg.k_max {
        return invalid(format!("invalid K range {}..={}", cfg.k_min, cfg.k_max));
    }
    if cfg.posteriors == 0 {
        return invalid("at least one posterior is required");
    }
    ClassSpace::new(cfg.k_max)?.ensure_enumerable()?;

    let mut exact = CheckResult::new("pmf_exactness", PMF_TOL);
    let mut marginal = CheckResult::new("marginal_consistency", PMF_TOL);
    let mut unbiased = CheckResult::new("risk_unbiasedness", RISK_TOL);
    let mut inversion = CheckResult::new("inversion_round_trip", INVERSION_CHECK_TOL);
    let mut mixture = CheckResult::new("receiver_mixture", MIXTURE_TOL);
    let mut candidate = CheckResult::new("candidate_equivalence", MIXTURE_TOL);

    for k in cfg.k_min..=cfg.k_max {
        let space = ClassSpace::new(k)?;
        for j in 0..cfg.posteriors {
            let seed = derive_seed(cfg.seed, (k * cfg.posteriors + j) as u64);
            let mut rng = rng_from_seed(seed);
            let posterior = PosteriorVector::random(space, &mut rng);
            let losses: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..2.0)).collect();

            for items in 1..k {
                for qtype in QuestionType::ALL {
                    let case = Case {
                        k,
                        items,
                        qtype: Some(qtype),
                        seed,
                    };
                    let pmf = qa_pmf(qtype, &posterior, items)?;
                    pmf.validate()?;
                    exact.record(
                        pmf.max_abs_diff(&oracle_pmf(qtype, &posterior, items)?),
                        case,
                    );
                    marginal.record(
                        pmf.max_abs_diff(&marginalized(qtype, &posterior, items)?),
                        case,
                    );

                    let coeff = qa_coefficient(qtype, k, items)? * (1.0 + cfg.coefficient_fault);
                    let (ordinary, rewritten) = risk_identity_with_coefficient(
                        qtype,
                        &posterior,
                        &losses,
                        items,
                        Some(coeff),
                    )?;
                    unbiased.record((ordinary - rewritten).abs(), case);

                    let recovered = invert_to_posterior(qtype, &pmf, items)?;
                    inversion.record(max_abs(recovered.as_slice(), posterior.as_slice()), case);

                    let direct = receiver_confidence_direct(&pmf);
                    let closed = receiver_confidence(qtype, &posterior, items)?;
                    mixture.record(max_abs(&direct, closed.mixture.as_slice()), case);
                }

                // candidate-label noise of matching size
                let case = Case {
                    k,
                    items,
                    qtype: None,
                    seed,
                };
                let cand = receiver_confidence_candidate(&posterior, items)?;
                let direct = receiver_confidence_direct(&candidate_pmf(&posterior, items)?);
                candidate.record(max_abs(&direct, cand.mixture.as_slice()), case);
                if k % (items + 1) == 0 {
                    let n = k / (items + 1);
                    let a = receiver_beta(QuestionType::WhichOne, space, items)?;
                    candidate.record(
                        (a - candidate_beta(space, n)?).abs(),
                        Case {
                            qtype: Some(QuestionType::WhichOne),
                            ..case
                        },
                    );
                }
                if 2 * items == k {
                    let a = receiver_beta(QuestionType::IsIn, space, items)?;
                    candidate.record(
                        (a - candidate_beta(space, items)?).abs(),
                        Case {
                            qtype: Some(QuestionType::IsIn),
                            ..case
                        },
                    );
                }
            }
        }
    }
    Ok(VerifyReport {
        checks: vec![exact, marginal, unbiased, inversion, mixture, candidate],
    })
}
