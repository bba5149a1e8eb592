//! Correctness-indicator outcome models.
//!
//! For a sentence drawn from the source language, the two-translator chain
//! yields indicators `(Y12, Y21)` (forward correct, backward correct on the
//! forward output) and the three-translator cycle yields `(Z12, Z23, Z31)`.
//! Their joint laws are pinned down by the marginal accuracies plus additive
//! dependence corrections over the product form: `lambda` for the pair,
//! `lambda1` (every pair) and `lambda2` (the triple) for the cycle.

use serde::{Deserialize, Serialize};

use crate::error::{check_prob, Error, Result};
use crate::PROB_TOL;

/// Marginal accuracies and dependence of the vanilla forward/backward pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DualOutcomeParams {
    /// Forward accuracy `Pr(Y12 = 1)`.
    pub p12: f64,
    /// Backward accuracy under the pushforward of the forward translator.
    pub p21r: f64,
    /// Additive dependence: `Pr(Y12 = 1, Y21 = 1) = p12 * p21r + lambda`.
    pub lambda: f64,
    /// Fraction of the both-wrong mass whose loop still closes (alignment).
    pub delta: f64,
}

impl DualOutcomeParams {
    pub fn new(p12: f64, p21r: f64, lambda: f64, delta: f64) -> Result<Self> {
        let params = Self { p12, p21r, lambda, delta };
        params.validate()?;
        Ok(params)
    }

    /// Checks the probability ranges and that every joint cell is nonnegative.
    pub fn validate(&self) -> Result<()> {
        check_prob("p12", self.p12)?;
        check_prob("p21r", self.p21r)?;
        check_prob("delta", self.delta)?;
        if !self.lambda.is_finite() {
            return Err(Error::InvalidArgument(format!("lambda = {} is not finite", self.lambda)));
        }
        dual_cells(self).map(|_| ())
    }

    /// Whether `lambda` also lies inside the loose interval
    /// `-min(p12 p21r, (1-p12)(1-p21r)) <= lambda <= min(p12, p21r)`.
    pub fn satisfies_loose_bound(&self) -> bool {
        let (lo, hi) = loose_lambda_bound(self.p12, self.p21r);
        self.lambda >= lo - PROB_TOL && self.lambda <= hi + PROB_TOL
    }
}

/// Exact joint law of `(Y12, Y21)`, indexed `[y12][y21]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DualJointTable {
    pub cells: [[f64; 2]; 2],
}

impl DualJointTable {
    pub fn cell(&self, y12: usize, y21: usize) -> f64 {
        self.cells[y12][y21]
    }

    pub fn total(&self) -> f64 {
        self.cells.iter().flatten().sum()
    }

    pub fn marginal_y12(&self) -> f64 {
        self.cells[1][0] + self.cells[1][1]
    }

    pub fn marginal_y21(&self) -> f64 {
        self.cells[0][1] + self.cells[1][1]
    }
}

fn dual_cells(params: &DualOutcomeParams) -> Result<[[f64; 2]; 2]> {
    let DualOutcomeParams { p12, p21r, lambda, .. } = *params;
    let mut cells = [[0.0; 2]; 2];
    cells[1][1] = p12 * p21r + lambda;
    cells[1][0] = p12 * (1.0 - p21r) - lambda;
    cells[0][1] = (1.0 - p12) * p21r - lambda;
    cells[0][0] = (1.0 - p12) * (1.0 - p21r) + lambda;
    for (y12, y21) in [(1, 1), (1, 0), (0, 1), (0, 0)] {
        let value = cells[y12][y21];
        if value < -PROB_TOL {
            return Err(Error::InfeasibleCell { cell: format!("Pr(Y12={y12}, Y21={y21})"), value });
        }
    }
    Ok(cells)
}

/// Builds the four-cell joint table, rejecting dependence values that would
/// make any cell negative.
pub fn build_dual_joint(params: &DualOutcomeParams) -> Result<DualJointTable> {
    check_prob("p12", params.p12)?;
    check_prob("p21r", params.p21r)?;
    check_prob("delta", params.delta)?;
    Ok(DualJointTable { cells: dual_cells(params)? })
}

/// Tight feasible interval for `lambda` (every cell nonnegative).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaRange {
    pub low: f64,
    pub high: f64,
}

impl LambdaRange {
    pub fn contains(&self, lambda: f64) -> bool {
        lambda >= self.low - PROB_TOL && lambda <= self.high + PROB_TOL
    }

    pub fn width(&self) -> f64 {
        self.high - self.low
    }
}

pub fn lambda_feasible_range(p12: f64, p21r: f64) -> LambdaRange {
    LambdaRange {
        low: -(p12 * p21r).min((1.0 - p12) * (1.0 - p21r)),
        high: (p12 * (1.0 - p21r)).min((1.0 - p12) * p21r),
    }
}

/// The looser interval whose upper end is `min(p12, p21r)`. Always contains
/// [`lambda_feasible_range`].
pub fn loose_lambda_bound(p12: f64, p21r: f64) -> (f64, f64) {
    (-(p12 * p21r).min((1.0 - p12) * (1.0 - p21r)), p12.min(p21r))
}

/// What training does with the failed-reconstruction mass: `alpha` of it
/// becomes correct and reconstructed, `beta` wrong but reconstructed, and
/// `gamma` stays unreconstructed. Used for both the dual and the multi-step
/// redistribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RedistributionPolicy {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl RedistributionPolicy {
    pub fn new(alpha: f64, beta: f64, gamma: f64) -> Result<Self> {
        let policy = Self { alpha, beta, gamma };
        policy.validate()?;
        Ok(policy)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta), ("gamma", self.gamma)] {
            if !(v.is_finite() && v >= -PROB_TOL) {
                return Err(Error::InvalidPolicy(format!("{name} = {v} is negative or not finite")));
            }
        }
        let total = self.alpha + self.beta + self.gamma;
        if (total - 1.0).abs() > PROB_TOL {
            return Err(Error::InvalidPolicy(format!("alpha + beta + gamma = {total}, expected 1")));
        }
        Ok(())
    }
}

/// Marginals and dependence of the three dual-trained translators on the
/// cycle `S1 -> S2 -> S3 -> S1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TripleOutcomeParams {
    pub q12: f64,
    pub q23: f64,
    pub q31: f64,
    /// Shared pairwise dependence: `Pr(Zi = Zj = 1) = qi qj + lambda1`.
    pub lambda1: f64,
    /// Triple dependence: `Pr(Z12 = Z23 = Z31 = 1) = q12 q23 q31 + lambda2`.
    pub lambda2: f64,
    pub delta: f64,
}

impl TripleOutcomeParams {
    pub fn new(q12: f64, q23: f64, q31: f64, lambda1: f64, lambda2: f64, delta: f64) -> Result<Self> {
        let params = Self { q12, q23, q31, lambda1, lambda2, delta };
        params.validate()?;
        Ok(params)
    }

    pub fn independent(q12: f64, q23: f64, q31: f64, delta: f64) -> Result<Self> {
        Self::new(q12, q23, q31, 0.0, 0.0, delta)
    }

    pub fn validate(&self) -> Result<()> {
        build_triple_joint(self).map(|_| ())
    }

    pub fn marginals(&self) -> [f64; 3] {
        [self.q12, self.q23, self.q31]
    }
}

/// Exact joint law of `(Z12, Z23, Z31)`; index is `z12 << 2 | z23 << 1 | z31`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TripleJointTable {
    pub cells: [f64; 8],
}

impl TripleJointTable {
    pub const fn index(z12: usize, z23: usize, z31: usize) -> usize {
        (z12 << 2) | (z23 << 1) | z31
    }

    pub fn cell(&self, z12: usize, z23: usize, z31: usize) -> f64 {
        self.cells[Self::index(z12, z23, z31)]
    }

    pub fn total(&self) -> f64 {
        self.cells.iter().sum()
    }

    /// `Pr(Z_axis = 1)` with axis 0, 1, 2 for `Z12`, `Z23`, `Z31`.
    pub fn marginal(&self, axis: usize) -> f64 {
        (0..8).filter(|i| bit(*i, axis) == 1).map(|i| self.cells[i]).sum()
    }

    /// `Pr(Z_a = Z_b = 1)`.
    pub fn pair_both(&self, a: usize, b: usize) -> f64 {
        (0..8).filter(|i| bit(*i, a) == 1 && bit(*i, b) == 1).map(|i| self.cells[i]).sum()
    }
}

/// Bit of `index` for axis 0 (`Z12`), 1 (`Z23`) or 2 (`Z31`).
pub(crate) fn bit(index: usize, axis: usize) -> usize {
    (index >> (2 - axis)) & 1
}

pub fn build_triple_joint(params: &TripleOutcomeParams) -> Result<TripleJointTable> {
    check_prob("q12", params.q12)?;
    check_prob("q23", params.q23)?;
    check_prob("q31", params.q31)?;
    check_prob("delta", params.delta)?;
    if !params.lambda1.is_finite() || !params.lambda2.is_finite() {
        return Err(Error::InvalidArgument("lambda1/lambda2 must be finite".into()));
    }
    let q = params.marginals();
    let (l1, l2) = (params.lambda1, params.lambda2);
    let mut cells = [0.0; 8];
    for (index, cell) in cells.iter_mut().enumerate() {
        let product: f64 = (0..3)
            .map(|axis| if bit(index, axis) == 1 { q[axis] } else { 1.0 - q[axis] })
            .product();
        // Inclusion-exclusion over the pairwise/triple corrections: a cell
        // with `ones` correct indicators picks up lambda1 once per pair it
        // shares with the all-ones pattern, signed by the number of zeros.
        let ones = (0..3).filter(|axis| bit(index, *axis) == 1).count();
        let correction = match ones {
            3 => l2,
            2 => l1 - l2,
            1 => -2.0 * l1 + l2,
            _ => 3.0 * l1 - l2,
        };
        *cell = product + correction;
    }
    for (index, value) in cells.iter().enumerate() {
        if *value < -PROB_TOL {
            return Err(Error::InfeasibleCell {
                cell: format!(
                    "Pr(Z12={}, Z23={}, Z31={})",
                    bit(index, 0),
                    bit(index, 1),
                    bit(index, 2)
                ),
                value: *value,
            });
        }
    }
    Ok(TripleJointTable { cells })
}
