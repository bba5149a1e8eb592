//! Randomised comparisons of the closed forms against the exact oracles,
//! plus the sign-agreement grids for the improvement conditions.

use serde::Serialize;

use crate::error::Result;
use crate::oracle::{self, GenerativeSpec, ReconstructionRule};
use crate::outcome_model::{DualOutcomeParams, RedistributionPolicy};
use crate::par::{self, Execution};
use crate::rng::{derive_seed, stream_rng};
use crate::theory;

/// Worst absolute disagreement over a sweep of random draws.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub name: &'static str,
    pub draws: usize,
    pub max_abs_diff: f64,
    pub worst_draw: usize,
    pub worst_case: String,
}

impl SweepReport {
    pub fn passes(&self, tolerance: f64) -> bool {
        self.max_abs_diff <= tolerance
    }
}

fn sweep<F>(name: &'static str, draws: usize, exec: Execution, f: F) -> Result<SweepReport>
where
    F: Fn(usize) -> Result<(f64, String)> + Sync + Send,
{
    let results = par::map_range(exec, draws, f);
    let mut report = SweepReport { name, draws, max_abs_diff: 0.0, worst_draw: 0, worst_case: String::new() };
    for (i, r) in results.into_iter().enumerate() {
        let (diff, case) = r?;
        if i == 0 || diff > report.max_abs_diff || diff.is_nan() {
            report.max_abs_diff = if diff.is_nan() { f64::INFINITY } else { diff };
            report.worst_draw = i;
            report.worst_case = case;
        }
    }
    Ok(report)
}

/// Dual closed form against the dual event tree, arbitrary policies.
pub fn dual_sweep(draws: usize, seed: u64, exec: Execution) -> Result<SweepReport> {
    sweep("dual_closed_form_vs_enumeration", draws, exec, |i| {
        let mut rng = stream_rng(derive_seed(seed, 1), i as u64);
        let params = oracle::random_dual_params(&mut rng);
        let policy = oracle::random_policy(&mut rng);
        let predicted = theory::dual_accuracy(&params, &policy)?.p_d12;
        let exact = oracle::enumerate_dual(&GenerativeSpec::Dual { params, policy })?.accuracy;
        Ok(((predicted - exact).abs(), format!("{params:?} {policy:?}")))
    })
}

/// Ratio form of the proportional-policy accuracy against the general
/// closed form evaluated at the proportional policy.
pub fn proportional_sweep(draws: usize, seed: u64, exec: Execution) -> Result<SweepReport> {
    sweep("proportional_ratio_vs_closed_form", draws, exec, |i| {
        let mut rng = stream_rng(derive_seed(seed, 2), i as u64);
        let params = oracle::random_dual_params(&mut rng);
        let gamma = oracle::random_policy(&mut rng).gamma;
        let policy = theory::proportional_policy(&params, gamma)?;
        let general = theory::dual_accuracy(&params, &policy)?.p_d12;
        let ratio = theory::proportional_accuracy(&params, gamma)?;
        Ok(((general - ratio).abs(), format!("{params:?} gamma={gamma}")))
    })
}

/// Cycle closed form against the cycle event tree. With `dependent` the
/// dependence terms are nonzero.
pub fn triple_sweep(draws: usize, seed: u64, dependent: bool, exec: Execution) -> Result<SweepReport> {
    let name = if dependent { "cycle_closed_form_vs_enumeration_dependent" } else { "cycle_closed_form_vs_enumeration" };
    sweep(name, draws, exec, move |i| {
        let mut rng = stream_rng(derive_seed(seed, 3 + u64::from(dependent)), i as u64);
        let params = oracle::random_triple_params(&mut rng, dependent);
        let policy = oracle::random_policy(&mut rng);
        let predicted = theory::multistep_accuracy(&params, &policy)?.q_m12;
        let spec = GenerativeSpec::Triple { params, policy, rule: ReconstructionRule::SingleWrongHopFails };
        let exact = oracle::enumerate_triple(&spec)?.accuracy;
        Ok(((predicted - exact).abs(), format!("{params:?} {policy:?}")))
    })
}

/// Displayed cycle closed form against the consistent one, using the
/// policy's `alpha`. The two only coincide without dependence terms.
pub fn triple_display_sweep(draws: usize, seed: u64, dependent: bool, exec: Execution) -> Result<SweepReport> {
    let name = if dependent { "cycle_display_form_vs_closed_form_dependent" } else { "cycle_display_form_vs_closed_form" };
    sweep(name, draws, exec, move |i| {
        let mut rng = stream_rng(derive_seed(seed, 5 + 2 * u64::from(dependent)), i as u64);
        let params = oracle::random_triple_params(&mut rng, dependent);
        let policy = oracle::random_policy(&mut rng);
        let consistent = theory::multistep_accuracy(&params, &policy)?.q_m12;
        let display = theory::multistep_displayed_accuracy(&params, policy.alpha);
        Ok(((consistent - display).abs(), format!("{params:?} {policy:?}")))
    })
}

/// One quantity of one Monte Carlo run compared with its exact value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McCheck {
    pub spec_index: usize,
    pub quantity: &'static str,
    pub exact: f64,
    pub estimate: f64,
    pub stderr: f64,
    pub z: f64,
}

/// Monte Carlo estimates of random specs (half dual, half cycle) against the
/// enumerators. Every quantity is a binomial proportion.
pub fn monte_carlo_checks(n_specs: usize, samples: u64, seed: u64, exec: Execution) -> Result<Vec<McCheck>> {
    let mut checks = Vec::new();
    for idx in 0..n_specs {
        let mut rng = stream_rng(derive_seed(seed, 6), idx as u64);
        let policy = oracle::random_policy(&mut rng);
        let spec = if idx % 2 == 0 {
            GenerativeSpec::Dual { params: oracle::random_dual_params(&mut rng), policy }
        } else {
            let rule = if idx % 4 == 1 { ReconstructionRule::SingleWrongHopFails } else { ReconstructionRule::Blanket };
            GenerativeSpec::Triple { params: oracle::random_triple_params(&mut rng, true), policy, rule }
        };
        let exact = oracle::enumerate(&spec)?;
        let mc = oracle::monte_carlo_with(&spec, samples, derive_seed(seed, 100 + idx as u64), exec)?;
        let pairs: [(&'static str, f64, f64); 4] = [
            ("accuracy", exact.accuracy, mc.accuracy),
            ("case_1_1", exact.case_masses[0], mc.case_masses[0]),
            ("case_1_2", exact.case_masses[1], mc.case_masses[1]),
            ("case_2", exact.case_masses[2], mc.case_masses[2]),
        ];
        for (quantity, exact_value, estimate) in pairs {
            let stderr = (exact_value * (1.0 - exact_value) / samples as f64).sqrt();
            let diff = (estimate - exact_value).abs();
            let z = if stderr > 0.0 { diff / stderr } else if diff == 0.0 { 0.0 } else { f64::INFINITY };
            checks.push(McCheck { spec_index: idx, quantity, exact: exact_value, estimate, stderr, z });
        }
    }
    Ok(checks)
}

/// Agreement between a computed sign and a predicate over a grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridReport {
    pub name: &'static str,
    pub points: usize,
    pub boundary_skipped: usize,
    pub disagreements: usize,
    pub first_disagreement: Option<(f64, f64)>,
}

const BOUNDARY_BAND: f64 = 1e-9;

fn grid_point(i: usize, n: usize) -> f64 {
    (i as f64 + 0.5) / n as f64
}

/// Sign of the dual improvement at zero dependence and zero `gamma` against
/// `p21r > delta / (1 + delta)`, on an `n x n` grid of `(p21r, delta)`.
pub fn dual_condition_grid(n: usize, p12: f64) -> Result<GridReport> {
    let mut report =
        GridReport { name: "dual_improvement_sign", points: 0, boundary_skipped: 0, disagreements: 0, first_disagreement: None };
    for i in 0..n {
        for j in 0..n {
            let (p21r, delta) = (grid_point(i, n), grid_point(j, n));
            report.points += 1;
            let improvement = theory::dual_improvement(&DualOutcomeParams { p12, p21r, lambda: 0.0, delta }, 0.0)?;
            if (p21r - delta / (1.0 + delta)).abs() < BOUNDARY_BAND || improvement.abs() < BOUNDARY_BAND {
                report.boundary_skipped += 1;
                continue;
            }
            if (improvement > 0.0) != theory::dual_improvement_condition(p21r, delta) {
                report.disagreements += 1;
                report.first_disagreement.get_or_insert((p21r, delta));
            }
        }
    }
    Ok(report)
}

/// `M < 1` computed from the M-factor against `t > delta / (delta + 0.5)`
/// on an `n x n` grid of `(t, delta)` with both pivot accuracies equal to `t`.
pub fn multistep_condition_grid(n: usize) -> Result<GridReport> {
    let mut report =
        GridReport { name: "multistep_symmetric_threshold", points: 0, boundary_skipped: 0, disagreements: 0, first_disagreement: None };
    for i in 0..n {
        for j in 0..n {
            let (t, delta) = (grid_point(i, n), grid_point(j, n));
            report.points += 1;
            let m = theory::m_factor(t, t, delta)?;
            let threshold = theory::multistep_symmetric_threshold(delta);
            if (t - threshold).abs() < BOUNDARY_BAND || (m - 1.0).abs() < BOUNDARY_BAND {
                report.boundary_skipped += 1;
                continue;
            }
            if (m < 1.0) != (t > threshold) {
                report.disagreements += 1;
                report.first_disagreement.get_or_insert((t, delta));
            }
        }
    }
    Ok(report)
}

/// Counts drawn from the generative simulator with a fixed policy, for
/// checking the estimators against the configured redistribution.
pub fn estimator_recovery(
    params: DualOutcomeParams,
    policy: RedistributionPolicy,
    samples: u64,
    seed: u64,
    exec: Execution,
) -> Result<crate::metrics::EstimatorReport> {
    let counts = oracle::simulate_counts(&GenerativeSpec::Dual { params, policy }, samples, seed, exec)?;
    Ok(counts.estimator.report())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_sweeps_agree() {
        for r in [
            dual_sweep(50, 1, Execution::Sequential).unwrap(),
            proportional_sweep(50, 1, Execution::Sequential).unwrap(),
            triple_sweep(50, 1, false, Execution::Sequential).unwrap(),
            triple_sweep(50, 1, true, Execution::Sequential).unwrap(),
            triple_display_sweep(50, 1, false, Execution::Sequential).unwrap(),
        ] {
            assert!(r.passes(1e-12), "{r:?}");
        }
    }

    #[test]
    fn display_form_drifts_with_dependence() {
        assert!(!triple_display_sweep(50, 1, true, Execution::Sequential).unwrap().passes(1e-6));
    }

    #[test]
    fn sweep_is_backend_independent() {
        let a = dual_sweep(64, 9, Execution::Sequential).unwrap();
        let b = dual_sweep(64, 9, Execution::Parallel).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn grids_agree_with_predicates() {
        let d = dual_condition_grid(20, 0.4).unwrap();
        assert_eq!(d.disagreements, 0);
        assert_eq!(d.points, 400);
        let m = multistep_condition_grid(20).unwrap();
        assert_eq!(m.disagreements, 0);
    }
}
