mod common;

use dualsim::learner::{loop_log_prob_exact, loop_log_prob_lower_bound, TabularTranslator};
use dualsim::rng::stream_rng;
use rand::Rng;

#[test]
fn update_directions_match_finite_differences() {
    let worst = common::worst_gradient_error(25, 31);
    assert!(worst <= 1e-6, "worst relative error {worst}");
}

#[test]
fn sampled_multistep_gradient_is_unbiased() {
    let mut rng = stream_rng(5, 0);
    let n = 3;
    let t_bp = TabularTranslator::random(1, 2, n, n, 1.0, &mut rng);
    let t_pa = TabularTranslator::random(2, 0, n, n, 1.0, &mut rng);
    let t_ab = TabularTranslator::random(0, 1, n, n, 1.0, &mut rng);
    let x2 = 1;
    let exact = dualsim::learner::loop_lower_bound_grad(&t_bp, &t_pa, &t_ab, x2);
    let draws = 200_000;
    let mut mean = vec![0.0; n * n];
    for _ in 0..draws {
        let mid = t_bp.sample(x2, &mut rng);
        let x1 = t_pa.sample(mid, &mut rng);
        for (y, g) in t_ab.log_prob_row_grad(x1, x2).into_iter().enumerate() {
            mean[x1 * n + y] += g / draws as f64;
        }
    }
    for (a, b) in mean.iter().zip(&exact) {
        assert!((a - b).abs() < 5e-3, "{a} vs {b}");
    }
}

#[test]
fn lower_bound_never_exceeds_exact_loop_probability() {
    let mut rng = stream_rng(12, 0);
    for _ in 0..200 {
        let n = rng.random_range(2..6);
        let scale = rng.random_range(0.1..5.0);
        let a = TabularTranslator::random(1, 2, n, n, scale, &mut rng);
        let b = TabularTranslator::random(2, 0, n, n, scale, &mut rng);
        let c = TabularTranslator::random(0, 1, n, n, scale, &mut rng);
        for x2 in 0..n {
            assert!(loop_log_prob_lower_bound(&a, &b, &c, x2) <= loop_log_prob_exact(&a, &b, &c, x2) + 1e-10);
        }
    }
}
