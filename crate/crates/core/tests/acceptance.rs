//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each,
//! and exits nonzero if any fails.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use dualsim::cli::{run_experiment, ExperimentConfig};
use dualsim::learner::{loop_log_prob_exact, loop_log_prob_lower_bound, TabularTranslator};
use dualsim::oracle::{self, errata_report};
use dualsim::outcome_model::{DualOutcomeParams, RedistributionPolicy, TripleOutcomeParams};
use dualsim::par::Execution;
use dualsim::rng::stream_rng;
use dualsim::synth_lang::generate_world;
use dualsim::verify;

const DRAWS: usize = 1000;
const TOL: f64 = 1e-12;

type Criterion = (&'static str, Option<Duration>, fn() -> Verdict);

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn closed_form_dual() -> Verdict {
    let r = verify::dual_sweep(DRAWS, 1, Execution::default()).unwrap();
    verdict(r.passes(TOL), format!("{} draws, max |diff| = {:e}", r.draws, r.max_abs_diff))
}

fn proportional_identity() -> Verdict {
    let r = verify::proportional_sweep(DRAWS, 1, Execution::default()).unwrap();
    verdict(r.passes(TOL), format!("{} draws, max |diff| = {:e}", r.draws, r.max_abs_diff))
}

fn closed_form_cycle_and_errata() -> Verdict {
    let r = verify::triple_sweep(DRAWS, 1, false, Execution::default()).unwrap();
    let mut worst_errata: f64 = 0.0;
    let mut rng = stream_rng(99, 0);
    let mut params: Vec<TripleOutcomeParams> = vec![TripleOutcomeParams::new(0.5, 0.5, 0.5, 0.05, 0.0, 0.1).unwrap()];
    while params.len() < 200 {
        let p = oracle::random_triple_params(&mut rng, true);
        if p.lambda1.abs() > 1e-3 {
            params.push(p);
        }
    }
    for p in &params {
        let rec = errata_report(p).unwrap();
        let diff = rec.record("cell(1,0,0)").unwrap().abs_difference;
        worst_errata = worst_errata.max((diff - 2.0 * p.lambda1.abs()).abs());
    }
    verdict(
        r.passes(TOL) && worst_errata <= TOL,
        format!(
            "{} draws, max |diff| = {:e}; displayed cell (1,0,0) off by 2|lambda1| within {:e} over {} dependent draws",
            r.draws,
            r.max_abs_diff,
            worst_errata,
            params.len()
        ),
    )
}

fn monte_carlo_consistency() -> Verdict {
    let checks = verify::monte_carlo_checks(20, 1_000_000, 4, Execution::default()).unwrap();
    let accuracy: Vec<_> = checks.iter().filter(|c| c.quantity == "accuracy").collect();
    let excursions = checks.iter().filter(|c| c.z > 4.0).count();
    let worst = checks.iter().map(|c| c.z).fold(0.0, f64::max);
    verdict(
        accuracy.len() == 20 && excursions <= 1,
        format!("{} estimates over 20 specs, {excursions} beyond 4 stderr, worst z = {worst:.2}", checks.len()),
    )
}

fn improvement_conditions() -> Verdict {
    let mut dual_bad = 0;
    let mut skipped = 0;
    for p12 in [0.2, 0.5, 0.8] {
        let g = verify::dual_condition_grid(100, p12).unwrap();
        dual_bad += g.disagreements;
        skipped += g.boundary_skipped;
    }
    let m = verify::multistep_condition_grid(100).unwrap();
    verdict(
        dual_bad == 0 && m.disagreements == 0,
        format!(
            "dual grid disagreements {dual_bad} (boundary skipped {skipped}); symmetric grid disagreements {} (skipped {})",
            m.disagreements, m.boundary_skipped
        ),
    )
}

fn gradient_correctness() -> Verdict {
    let worst = common::worst_gradient_error(25, 2024);
    verdict(worst <= 1e-6, format!("25 configurations, worst relative error {worst:e}"))
}

fn end_to_end_learning() -> Verdict {
    let config = ExperimentConfig::default();
    let out = run_experiment(&config, Execution::default()).unwrap();
    let v = out.mean_p_hat("vanilla", 0, 1).unwrap();
    let d = out.mean_p_hat("dual", 0, 1).unwrap();
    let m = out.mean_p_hat("multistep", 0, 1).unwrap();
    verdict(
        d >= v + 0.02 && m >= d + 0.01,
        format!("{} seeds, greedy 0->1 accuracy vanilla {v:.4}, dual {d:.4}, multi-step {m:.4}", config.seeds.len()),
    )
}

fn estimator_recovery() -> Verdict {
    let params = DualOutcomeParams::new(0.6, 0.6, 0.0, 0.1).unwrap();
    let policy = RedistributionPolicy::new(0.30, 0.28, 0.42).unwrap();
    let r = verify::estimator_recovery(params, policy, 100_000, 8, Execution::default()).unwrap();
    let n = r.counts.vanilla_failed as f64;
    let se = |p: f64| (p * (1.0 - p) / n).sqrt();
    let (a, g) = (r.alpha_hat.unwrap(), r.gamma_hat.unwrap());
    let za = (a - 0.30).abs() / se(0.30);
    let zg = (g - 0.42).abs() / se(0.42);
    verdict(
        za <= 3.0 && zg <= 3.0,
        format!("alpha_hat {a:.4} (z {za:.2}), gamma_hat {g:.4} (z {zg:.2}) over {} failed items", r.counts.vanilla_failed),
    )
}

fn loop_lower_bound() -> Verdict {
    let world = generate_world(3, 2, 2, 0.5, 5).unwrap();
    let n = world.n_sentences();
    let mut rng = stream_rng(17, 0);
    let mut worst_gap = f64::INFINITY;
    let mut violations = 0;
    for _ in 0..50 {
        let t_2k = TabularTranslator::random(1, 2, n, n, 3.0, &mut rng);
        let t_k1 = TabularTranslator::random(2, 0, n, n, 3.0, &mut rng);
        let t_12 = TabularTranslator::random(0, 1, n, n, 3.0, &mut rng);
        for x2 in 0..n {
            let gap = loop_log_prob_exact(&t_2k, &t_k1, &t_12, x2) - loop_log_prob_lower_bound(&t_2k, &t_k1, &t_12, x2);
            worst_gap = worst_gap.min(gap);
            if gap < -1e-10 {
                violations += 1;
            }
        }
    }
    verdict(violations == 0, format!("50 parameter points x {n} sentences, smallest exact - bound = {worst_gap:e}"))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("1 dual closed form equals enumeration", Some(Duration::from_secs(1)), closed_form_dual),
        ("2 proportional ratio identity", Some(Duration::from_secs(1)), proportional_identity),
        ("3 cycle closed form equals enumeration; errata", Some(Duration::from_secs(1)), closed_form_cycle_and_errata),
        ("4 Monte Carlo consistency", None, monte_carlo_consistency),
        ("5 improvement conditions on grids", None, improvement_conditions),
        ("6 gradient correctness", None, gradient_correctness),
        ("7 end-to-end learning ordering", Some(Duration::from_secs(300)), end_to_end_learning),
        ("8 estimator recovery", None, estimator_recovery),
        ("9 loop lower bound", None, loop_lower_bound),
    ];
    let mut failures = 0;
    for (name, budget, check) in criteria {
        let start = Instant::now();
        let v = check();
        let elapsed = start.elapsed();
        let in_budget = budget.is_none_or(|b| elapsed <= b);
        let pass = v.pass && in_budget;
        failures += usize::from(!pass);
        let budget_note = match budget {
            Some(b) if !in_budget => format!(", over budget of {:.0?}", b),
            _ => String::new(),
        };
        println!("{} criterion {name}: {} [{:.2?}{budget_note}]", if pass { "PASS" } else { "FAIL" }, v.detail, elapsed);
    }
    println!("{} of 9 criteria passed", 9 - failures);
    if failures == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE }
}
