//! Generalization-bound calculators for learning from Q&A labels.
//!
//! The Rademacher complexity term `sum_y R_n(G_y)` is an input; it can be
//! taken from [`kernel_rademacher_bound`] for kernel models (times `K`).
//!
//! Note on the which-one estimation-error constant: the bound uses
//! `K^2 + (I-2)K - I^2 + 1`, which is what the McDiarmid step produces
//! (it makes the coefficient exactly 1 at `I = K - 1`). A `-1` variant of
//! this constant is sometimes quoted; it is not used here.
//!
//! The Rademacher variables are taken as the formulas are written; no
//! reinterpretation of their `{0, 1}` vs `{-1, +1}` definition is made.

use serde::{Deserialize, Serialize};

use crate::combinatorics::ClassSpace;
use crate::error::{invalid, Result};
use crate::labeling::{check_items, QuestionType};

/// Inputs shared by the which-one and is-in error bounds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "I")]
    pub items: usize,
    /// Lipschitz coefficient of the rewritten loss.
    pub rho: f64,
    /// Supremum of the base loss.
    pub c_l: f64,
    /// Confidence parameter in (0, 1).
    pub delta: f64,
    /// Training sample count.
    pub n: u64,
    /// `sum_y R_n(G_y)`.
    pub rad_sum: f64,
}

impl BoundInputs {
    pub fn validate(&self) -> Result<()> {
        check_items(ClassSpace::new(self.k)?, self.items)?;
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return invalid(format!("rho must be positive, got {}", self.rho));
        }
        if !(self.c_l > 0.0 && self.c_l.is_finite()) {
            return invalid(format!("C_L must be positive, got {}", self.c_l));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return invalid(format!("delta must lie in (0, 1), got {}", self.delta));
        }
        if self.n == 0 {
            return invalid("n must be positive");
        }
        if !(self.rad_sum >= 0.0 && self.rad_sum.is_finite()) {
            return invalid(format!("rad_sum must be nonnegative, got {}", self.rad_sum));
        }
        Ok(())
    }

    fn confidence_term(&self) -> f64 {
        (2.0 * (2.0 / self.delta).ln() / self.n as f64).sqrt()
    }
}

/// Inputs of the kernel-model Rademacher bound.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelBoundInputs {
    /// `sup_x sqrt(k(x, x))`.
    pub r: f64,
    /// Bound on the RKHS weight norm.
    pub lambda: f64,
    pub n: u64,
}

/// Multiplier of `sum_y R_n(G_y)` in the Rademacher complexity of the
/// rewritten-loss class.
pub fn rademacher_coeff(qtype: QuestionType, k: usize, items: usize, rho: f64) -> Result<f64> {
    check_items(ClassSpace::new(k)?, items)?;
    let (k, i) = (k as f64, items as f64);
    let numerator = std::f64::consts::SQRT_2 * rho * k * k * (k - 1.0);
    Ok(match qtype {
        QuestionType::WhichOne => numerator / (i * (2.0 * k - i - 1.0)),
        QuestionType::IsIn => numerator / (2.0 * i * (k - i)),
    })
}

/// Estimation-error bound for which-one labels, holding with
/// probability at least `1 - delta`.
pub fn error_bound_whichone(inp: &BoundInputs) -> Result<f64> {
    inp.validate()?;
    let (k, i) = (inp.k as f64, inp.items as f64);
    let denom = i * (2.0 * k - i - 1.0);
    let complexity =
        4.0 * rademacher_coeff(QuestionType::WhichOne, inp.k, inp.items, inp.rho)? * inp.rad_sum;
    let spread = (k - i) * (k * k + (i - 2.0) * k - i * i + 1.0) / denom;
    Ok(complexity + spread * inp.c_l * inp.confidence_term())
}

/// Estimation-error bound for is-in labels, holding with probability at
/// least `1 - delta`. Smallest at `I = K/2`.
pub fn error_bound_isin(inp: &BoundInputs) -> Result<f64> {
    inp.validate()?;
    let (k, i) = (inp.k as f64, inp.items as f64);
    let complexity =
        2.0 * rademacher_coeff(QuestionType::IsIn, inp.k, inp.items, inp.rho)? * inp.rad_sum;
    let spread = k * (k - 1.0) / (2.0 * i.min(k - i));
    Ok(complexity + spread * inp.c_l * inp.confidence_term())
}

pub fn error_bound(qtype: QuestionType, inp: &BoundInputs) -> Result<f64> {
    match qtype {
        QuestionType::WhichOne => error_bound_whichone(inp),
        QuestionType::IsIn => error_bound_isin(inp),
    }
}

/// `R_n(G_y) <= r * Lambda / sqrt(n)` for norm-bounded kernel models.
pub fn kernel_rademacher_bound(inp: &KernelBoundInputs) -> Result<f64> {
    if inp.n == 0 {
        return invalid("n must be at least 1");
    }
    if !(inp.r >= 0.0 && inp.lambda >= 0.0) {
        return invalid("r and lambda must be nonnegative");
    }
    Ok(inp.r * inp.lambda / (inp.n as f64).sqrt())
}

/// One row of a bound sweep over `I`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BoundRow {
    #[serde(rename = "I")]
    pub items: usize,
    pub bound_whichone: f64,
    pub bound_isin: f64,
}

/// Both bounds for `I = 1..K-1`; `base.items` is ignored.
pub fn bound_sweep(base: &BoundInputs) -> Result<Vec<BoundRow>> {
    (1..base.k)
        .map(|items| {
            let inp = BoundInputs { items, ..*base };
            Ok(BoundRow {
                items,
                bound_whichone: error_bound_whichone(&inp)?,
                bound_isin: error_bound_isin(&inp)?,
            })
        })
        .collect()
}
