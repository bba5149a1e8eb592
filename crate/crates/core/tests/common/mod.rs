#![allow(dead_code)]

use dualsim::learner::{
    dual_reconstruction_step, loop_log_prob_lower_bound, loop_lower_bound_grad, multistep_step, TabularTranslator,
    TrainConfig, TranslatorSet,
};
use dualsim::rng::stream_rng;
use dualsim::synth_lang::generate_world;
use rand::Rng;

const STEP: f64 = 1e-5;

/// Central differences of `f` with respect to every entry of `theta`.
pub fn central_diff(t: &TabularTranslator, entries: impl Iterator<Item = usize>, f: impl Fn(&TabularTranslator) -> f64) -> Vec<(usize, f64)> {
    entries
        .map(|i| {
            let mut plus = t.clone();
            plus.theta_mut()[i] += STEP;
            let mut minus = t.clone();
            minus.theta_mut()[i] -= STEP;
            (i, (f(&plus) - f(&minus)) / (2.0 * STEP))
        })
        .collect()
}

/// `|a - b| / max(|a|, |b|)` over whole vectors.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let scale = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(b.iter().map(|x| x * x).sum::<f64>().sqrt());
    if scale == 0.0 { diff } else { diff / scale }
}

fn row_entries(t: &TabularTranslator, x: usize) -> std::ops::Range<usize> {
    x * t.n_tgt()..(x + 1) * t.n_tgt()
}

/// Observed change of row `x` divided by the learning rate, next to the
/// finite-difference gradient of `ln Pr(y | x)` at the old scores.
fn step_vs_fd(before: &TabularTranslator, after: &TabularTranslator, x: usize, y: usize, lr: f64) -> f64 {
    let observed: Vec<f64> = row_entries(before, x).map(|i| (after.theta()[i] - before.theta()[i]) / lr).collect();
    let fd: Vec<f64> = central_diff(before, row_entries(before, x), |t| t.log_prob(x, y)).into_iter().map(|(_, g)| g).collect();
    relative_error(&observed, &fd)
}

/// Worst relative error of every sampled update direction (supervised,
/// dual reconstruction, multi-step) and of the lower-bound gradient over
/// `configs` random configurations.
pub fn worst_gradient_error(configs: usize, seed: u64) -> f64 {
    let mut worst: f64 = 0.0;
    for c in 0..configs {
        let mut rng = stream_rng(seed, c as u64);
        let m = rng.random_range(2..4);
        let s = rng.random_range(1..3);
        let world = generate_world(3, m, s, 0.5, c as u64).unwrap();
        let n = world.n_sentences();
        let lr = rng.random_range(0.05..2.0);
        let cfg = TrainConfig { learning_rate: lr, supervised_batch: 1, reconstruction_batch: 1, ..Default::default() };

        let mut set = TranslatorSet::uniform(&world);
        for t in set.translators.values_mut() {
            *t = TabularTranslator::random(t.source, t.target, n, n, 2.0, &mut rng);
        }

        // Supervised term.
        let t = set.get(0, 1).clone();
        let (x, y) = (rng.random_range(0..n), rng.random_range(0..n));
        let analytic = t.log_prob_row_grad(x, y);
        let fd: Vec<f64> = central_diff(&t, row_entries(&t, x), |t| t.log_prob(x, y)).into_iter().map(|(_, g)| g).collect();
        worst = worst.max(relative_error(&analytic, &fd));
        let mut stepped = t.clone();
        stepped.ascend(&[(x, y)], lr);
        worst = worst.max(step_vs_fd(&t, &stepped, x, y, lr));

        // Dual reconstruction terms.
        let mono: Vec<usize> = (0..n).collect();
        let (f0, b0) = (set.get(0, 1).clone(), set.get(1, 0).clone());
        let (mut fwd, mut bwd) = (f0.clone(), b0.clone());
        let [bwd_trace, fwd_trace] = dual_reconstruction_step(&mut fwd, &mut bwd, &mono, &mono, &cfg, &mut rng);
        let (row, target) = bwd_trace.terms[0];
        worst = worst.max(step_vs_fd(&b0, &bwd, row, target, lr));
        let (row, target) = fwd_trace.terms[0];
        worst = worst.max(step_vs_fd(&f0, &fwd, row, target, lr));

        // Multi-step terms.
        let before = set.clone();
        let trace = multistep_step(&mut set, 0, 1, 2, &mono, &mono, &cfg, &mut rng);
        let (x2, _, x1t) = trace.backward_paths[0];
        worst = worst.max(step_vs_fd(before.get(0, 1), set.get(0, 1), x1t, x2, lr));
        let (x1, _, x2t) = trace.forward_paths[0];
        worst = worst.max(step_vs_fd(before.get(1, 0), set.get(1, 0), x2t, x1, lr));

        // Expected multi-step objective.
        let (t_bp, t_pa, t_ab) = (before.get(1, 2), before.get(2, 0), before.get(0, 1));
        let x2 = rng.random_range(0..n);
        let analytic = loop_lower_bound_grad(t_bp, t_pa, t_ab, x2);
        let fd: Vec<f64> = central_diff(t_ab, 0..n * n, |t| loop_log_prob_lower_bound(t_bp, t_pa, t, x2)).into_iter().map(|(_, g)| g).collect();
        worst = worst.max(relative_error(&analytic, &fd));
    }
    worst
}
