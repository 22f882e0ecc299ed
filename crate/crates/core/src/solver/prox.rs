//! Proximal maps of the link-prediction penalties.
//!
//! Every penalty is separable over the stored lower-triangle entries of `Λ`,
//! so each one is described by a rule per entry and applied coordinatewise.

use crate::error::{Error, Result};
use crate::symmat::{lower_indices, SupportPattern, SymmetricMatrix};

/// `sign(v) · max(|v| − τ, 0)`.
#[inline]
pub fn soft_threshold(v: f64, tau: f64) -> f64 {
    if v > tau {
        v - tau
    } else if v < -tau {
        v + tau
    } else {
        0.0
    }
}

/// Minimizer of `½(x − v)² + τ|x + anchor|`.
#[inline]
pub fn shifted_soft_threshold(v: f64, anchor: f64, tau: f64) -> f64 {
    let shrunk = soft_threshold(v + anchor, tau);
    if shrunk == 0.0 {
        -anchor
    } else {
        shrunk - anchor
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) enum EntryRule {
    Free,
    /// Held at exactly zero.
    Fixed,
    /// Penalized by `weight · |x + anchor|`.
    Shrink { weight: f64, anchor: f64 },
}

impl EntryRule {
    #[inline]
    pub(crate) fn prox(self, v: f64, step: f64) -> f64 {
        match self {
            EntryRule::Free => v,
            EntryRule::Fixed => 0.0,
            EntryRule::Shrink { weight, anchor } => shifted_soft_threshold(v, anchor, step * weight),
        }
    }

    #[inline]
    pub(crate) fn penalty(self, x: f64) -> f64 {
        match self {
            EntryRule::Shrink { weight, anchor } => weight * (x + anchor).abs(),
            _ => 0.0,
        }
    }
}

pub(crate) fn plp_rules(prior_support: &SupportPattern, gamma: f64) -> Vec<EntryRule> {
    lower_indices(prior_support.dim())
        .map(|(r, c)| {
            if r == c || prior_support.contains_index(r, c) {
                EntryRule::Free
            } else {
                EntryRule::Shrink { weight: gamma, anchor: 0.0 }
            }
        })
        .collect()
}

pub(crate) fn nlp_rules(prior_precision: &SymmetricMatrix, prior_support: &SupportPattern, gamma: f64) -> Vec<EntryRule> {
    lower_indices(prior_support.dim())
        .map(|(r, c)| {
            if !prior_support.contains_index(r, c) {
                EntryRule::Fixed
            } else if r == c {
                EntryRule::Free
            } else {
                EntryRule::Shrink { weight: gamma, anchor: prior_precision.get(r, c) }
            }
        })
        .collect()
}

pub(crate) fn mixed_rules(
    prior_precision: &SymmetricMatrix,
    prior_support: &SupportPattern,
    eta_p: f64,
    eta_n: f64,
) -> Vec<EntryRule> {
    lower_indices(prior_support.dim())
        .map(|(r, c)| {
            if r == c {
                EntryRule::Free
            } else if prior_support.contains_index(r, c) {
                EntryRule::Shrink { weight: eta_n, anchor: prior_precision.get(r, c) }
            } else {
                EntryRule::Shrink { weight: eta_p, anchor: 0.0 }
            }
        })
        .collect()
}

pub(crate) fn known_support_rules(omega: &SupportPattern) -> Vec<EntryRule> {
    omega.mask().iter().map(|&m| if m { EntryRule::Free } else { EntryRule::Fixed }).collect()
}

pub(crate) fn apply_rules(lambda: &SymmetricMatrix, rules: &[EntryRule], step: f64) -> SymmetricMatrix {
    let data = lambda.packed().iter().zip(rules).map(|(&v, rule)| rule.prox(v, step)).collect();
    SymmetricMatrix::from_packed(lambda.dim(), data).expect("packed length")
}

fn check_step(step: f64) -> Result<()> {
    if step > 0.0 && step.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid("prox step must be positive and finite"))
    }
}

/// Soft-thresholds off-diagonal entries outside the prior support by
/// `step · gamma`; other entries pass through.
pub fn prox_plp(lambda: &SymmetricMatrix, step: f64, gamma: f64, prior_support: &SupportPattern) -> Result<SymmetricMatrix> {
    check_step(step)?;
    Error::check_dim(lambda.dim(), prior_support.dim())?;
    Ok(apply_rules(lambda, &plp_rules(prior_support, gamma), step))
}

/// Zeroes entries outside the prior support and shrinks off-diagonal entries
/// inside it towards `−(S⁻¹)_ij`.
pub fn prox_nlp(
    lambda: &SymmetricMatrix,
    step: f64,
    gamma: f64,
    prior_precision: &SymmetricMatrix,
    prior_support: &SupportPattern,
) -> Result<SymmetricMatrix> {
    check_step(step)?;
    Error::check_dim(lambda.dim(), prior_support.dim())?;
    Error::check_dim(lambda.dim(), prior_precision.dim())?;
    Ok(apply_rules(lambda, &nlp_rules(prior_precision, prior_support, gamma), step))
}

/// PLP shrinkage outside the prior support with weight `eta_p`, NLP
/// shrinkage inside it with weight `eta_n`.
pub fn prox_mixed(
    lambda: &SymmetricMatrix,
    step: f64,
    eta_p: f64,
    eta_n: f64,
    prior_precision: &SymmetricMatrix,
    prior_support: &SupportPattern,
) -> Result<SymmetricMatrix> {
    check_step(step)?;
    Error::check_dim(lambda.dim(), prior_support.dim())?;
    Error::check_dim(lambda.dim(), prior_precision.dim())?;
    Ok(apply_rules(lambda, &mixed_rules(prior_precision, prior_support, eta_p, eta_n), step))
}
