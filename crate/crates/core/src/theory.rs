//! Closed-form accuracy predictions for dual and multi-step dual learning.
//!
//! Everything here is a direct formula over [`DualOutcomeParams`] /
//! [`TripleOutcomeParams`]; the independent check lives in [`crate::oracle`].

use serde::Serialize;

use crate::error::{check_prob, Error, Result};
use crate::outcome_model::{DualOutcomeParams, RedistributionPolicy, TripleOutcomeParams};

/// Prediction for the dual-trained forward translator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DualPrediction {
    /// Loop closes and the forward hop is correct.
    pub p_case11: f64,
    /// Loop closes through two wrong hops (alignment).
    pub p_case12: f64,
    /// Loop does not close; this mass is redistributed by the policy.
    pub p_case2: f64,
    pub p_d12: f64,
    /// `gamma * p_case2`, the mass left unreconstructed after training.
    pub gamma_cap: f64,
    /// `p_d12 - p12`.
    pub improvement: f64,
}

/// Prediction for the multi-step-trained forward translator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TriplePrediction {
    pub p_case11: f64,
    pub p_case12: f64,
    pub p_case2: f64,
    pub q_m12: f64,
    /// `None` when the M-factor denominator vanishes.
    pub m_factor: Option<f64>,
    pub gamma_cap_prime: f64,
}

/// Probability that a wrong forward translation is mapped back into the
/// source cluster.
pub fn p_align(params: &DualOutcomeParams) -> f64 {
    params.delta * ((1.0 - params.p12) * (1.0 - params.p21r) + params.lambda)
}

/// `(Pr(Case 1.1), Pr(Case 1.2), Pr(Case 2))` for the vanilla pair.
pub fn dual_case_probs(params: &DualOutcomeParams) -> (f64, f64, f64) {
    let c11 = params.p12 * params.p21r + params.lambda;
    let c12 = p_align(params);
    (c11, c12, 1.0 - c11 - c12)
}

pub fn dual_accuracy(params: &DualOutcomeParams, policy: &RedistributionPolicy) -> Result<DualPrediction> {
    params.validate()?;
    policy.validate()?;
    let DualOutcomeParams { p12, p21r, lambda, delta } = *params;
    let alpha = policy.alpha;
    let (c11, c12, c2) = dual_case_probs(params);
    let p_d12 = (1.0 - alpha) * (p12 * p21r + lambda)
        + alpha * delta * (p12 + p21r - p12 * p21r - lambda)
        + alpha * (1.0 - delta);
    Ok(DualPrediction {
        p_case11: c11,
        p_case12: c12,
        p_case2: c2,
        p_d12,
        gamma_cap: policy.gamma * c2,
        improvement: p_d12 - p12,
    })
}

/// Policy whose `alpha : beta` ratio matches `Pr(Case 1.1) : Pr(Case 1.2)`
/// and whose `alpha + beta` is `1 - gamma`.
pub fn proportional_policy(params: &DualOutcomeParams, gamma: f64) -> Result<RedistributionPolicy> {
    params.validate()?;
    let (c11, c12, _) = dual_case_probs(params);
    proportional_split(c11, c12, gamma)
}

fn proportional_split(c11: f64, c12: f64, gamma: f64) -> Result<RedistributionPolicy> {
    check_prob("gamma", gamma)?;
    let closed = c11 + c12;
    if closed <= 0.0 {
        return Err(Error::ZeroDenominator("proportional policy (both Case 1 masses are zero)"));
    }
    let alpha = (1.0 - gamma) * c11 / closed;
    let beta = if c12 == 0.0 { 0.0 } else { (1.0 - gamma) * c12 / closed };
    Ok(RedistributionPolicy { alpha, beta, gamma })
}

/// Dual accuracy under the proportional hypothesis, evaluated in its
/// closed ratio form rather than through [`dual_accuracy`].
pub fn proportional_accuracy(params: &DualOutcomeParams, gamma: f64) -> Result<f64> {
    params.validate()?;
    check_prob("gamma", gamma)?;
    let DualOutcomeParams { p12, p21r, lambda, delta } = *params;
    let closed_correct = p12 * p21r + lambda;
    let aligned = delta * ((1.0 - p12) * (1.0 - p21r) + lambda);
    let gamma_cap = gamma * (1.0 - p12 * p21r - lambda - aligned);
    let denominator = closed_correct + aligned;
    if denominator <= 0.0 {
        return Err(Error::ZeroDenominator("proportional-hypothesis accuracy"));
    }
    Ok(closed_correct * (1.0 - gamma_cap) / denominator)
}

/// `proportional_accuracy - p12`. With `gamma = lambda = 0` its sign is the sign of
/// `p21r - delta / (1 + delta)`.
pub fn dual_improvement(params: &DualOutcomeParams, gamma: f64) -> Result<f64> {
    Ok(proportional_accuracy(params, gamma)? - params.p12)
}

/// The mild condition `p21r > delta / (1 + delta)`.
pub fn dual_improvement_condition(p21r: f64, delta: f64) -> bool {
    p21r > delta / (1.0 + delta)
}

/// `(Pr(Case 1.1), Pr(Case 1.2), Pr(Case 2))` for the dual-trained cycle,
/// from the algebraically consistent cell sums:
///
/// - Case 1.1 = `Pr(1,1,1) + delta * Pr(1,0,0)`
/// - Case 1.2 = `delta * (Pr(0,0,0) + Pr(0,0,1) + Pr(0,1,0))`
pub fn triple_case_probs(params: &TripleOutcomeParams) -> (f64, f64, f64) {
    let TripleOutcomeParams { q12, q23, q31, lambda1, lambda2, delta } = *params;
    let c11 = q12 * q23 * q31 + lambda2 + delta * (q12 * (1.0 - q23) * (1.0 - q31) - 2.0 * lambda1 + lambda2);
    let c12 = delta * ((1.0 - q12) * (1.0 - q23 * q31) - lambda1 + lambda2);
    (c11, c12, 1.0 - c11 - c12)
}

pub fn multistep_accuracy(params: &TripleOutcomeParams, policy: &RedistributionPolicy) -> Result<TriplePrediction> {
    params.validate()?;
    policy.validate()?;
    let (c11, c12, c2) = triple_case_probs(params);
    Ok(TriplePrediction {
        p_case11: c11,
        p_case12: c12,
        p_case2: c2,
        q_m12: c11 + policy.alpha * c2,
        m_factor: m_factor(params.q23, params.q31, params.delta).ok(),
        gamma_cap_prime: policy.gamma * c2,
    })
}

/// The published closed form, with the unbalanced parenthesis read
/// as `alpha' * (1 - delta (1 - q12)(1 - q23 q31 - lambda1 + lambda2))`.
/// Agrees with [`multistep_accuracy`] when `lambda1 = lambda2 = 0`.
pub fn multistep_displayed_accuracy(params: &TripleOutcomeParams, alpha_prime: f64) -> f64 {
    let TripleOutcomeParams { q12, q23, q31, lambda1, lambda2, delta } = *params;
    (1.0 - alpha_prime) * (q12 * q23 * q31 + delta * q12 * (1.0 - q23) * (1.0 - q31) + (1.0 + delta) * lambda2)
        + alpha_prime * (1.0 - delta * (1.0 - q12) * (1.0 - q23 * q31 - lambda1 + lambda2))
}

/// Multi-step analogue of [`proportional_policy`].
pub fn proportional_policy_triple(params: &TripleOutcomeParams, gamma_prime: f64) -> Result<RedistributionPolicy> {
    params.validate()?;
    let (c11, c12, _) = triple_case_probs(params);
    proportional_split(c11, c12, gamma_prime)
}

/// `M = delta (1 - q23 q31) / (q23 q31 + delta (1 - q23)(1 - q31))`.
pub fn m_factor(q23: f64, q31: f64, delta: f64) -> Result<f64> {
    let denominator = q23 * q31 + delta * (1.0 - q23) * (1.0 - q31);
    if denominator <= 0.0 {
        return Err(Error::ZeroDenominator("M-factor"));
    }
    Ok(delta * (1.0 - q23 * q31) / denominator)
}

/// `(1 - Gamma') / (1 + M (1 - q12) / q12)`.
pub fn simplified_multistep_accuracy(q12: f64, m: f64, gamma_cap_prime: f64) -> Result<f64> {
    if q12 <= 0.0 {
        return Err(Error::ZeroDenominator("simplified multi-step accuracy (q12 = 0)"));
    }
    Ok((1.0 - gamma_cap_prime) / (1.0 + m * (1.0 - q12) / q12))
}

/// `M < 1`, evaluated division-free as
/// `delta (q23 + q31 - 2 q23 q31) < q23 q31`.
pub fn multistep_condition(q23: f64, q31: f64, delta: f64) -> bool {
    delta * (q23 + q31 - 2.0 * q23 * q31) < q23 * q31
}

/// Symmetric threshold `delta / (delta + 0.5)` above which `M < 1`.
pub fn multistep_symmetric_threshold(delta: f64) -> f64 {
    delta / (delta + 0.5)
}
