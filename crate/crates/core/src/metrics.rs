//! Exact accuracies of tabular translators and the empirical redistribution
//! estimators.
//!
//! Correctness is exact cluster membership in the synthetic world. Every
//! deterministic use of a translator (`T(x)`) means greedy decoding with
//! ties broken by the lowest sentence id.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::learner::TabularTranslator;
use crate::synth_lang::{LangId, SentenceId, World};

/// Decoding tag carried by every report.
pub const DECODING: &str = "greedy";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AccuracyReport {
    pub source: LangId,
    pub target: LangId,
    pub decoding: &'static str,
    /// `mu`-weighted accuracy of greedy decoding.
    pub p_hat: f64,
    /// `mu`-weighted probability mass on the correct cluster.
    pub p_expected: f64,
}

fn check_shape(t: &TabularTranslator, world: &World) -> Result<()> {
    let n = world.n_sentences();
    if t.source >= world.k || t.target >= world.k || t.n_src() != n || t.n_tgt() != n {
        return Err(Error::InvalidArgument(format!(
            "translator {}->{} ({} x {}) does not fit a world with {} languages of {n} sentences",
            t.source,
            t.target,
            t.n_src(),
            t.n_tgt(),
            world.k
        )));
    }
    Ok(())
}

fn correct_mass(t: &TabularTranslator, world: &World, x: SentenceId) -> f64 {
    t.row_probs(x)
        .iter()
        .enumerate()
        .filter(|&(y, _)| world.is_correct(t.source, t.target, x, y))
        .map(|(_, p)| p)
        .sum()
}

/// Exact greedy and expected accuracy. Panics if the translator does not
/// fit the world; use [`try_accuracy`] to get an error instead.
pub fn accuracy(t: &TabularTranslator, world: &World) -> AccuracyReport {
    try_accuracy(t, world).expect("translator fits world")
}

pub fn try_accuracy(t: &TabularTranslator, world: &World) -> Result<AccuracyReport> {
    check_shape(t, world)?;
    let mu = world.mu(t.source);
    let mut p_hat = 0.0;
    let mut p_expected = 0.0;
    for (x, &w) in mu.iter().enumerate() {
        if world.is_correct(t.source, t.target, x, t.greedy(x)) {
            p_hat += w;
        }
        p_expected += w * correct_mass(t, world, x);
    }
    Ok(AccuracyReport {
        source: t.source,
        target: t.target,
        decoding: DECODING,
        p_hat: p_hat.clamp(0.0, 1.0),
        p_expected: p_expected.clamp(0.0, 1.0),
    })
}

/// Exact probability that the greedy backward translator lands in the
/// correct cluster of a forward output, with the forward output drawn from
/// the stochastic forward translator applied to `mu`-distributed sources.
pub fn reconstruction_accuracy(fwd: &TabularTranslator, bwd: &TabularTranslator, world: &World) -> Result<f64> {
    check_shape(fwd, world)?;
    check_shape(bwd, world)?;
    if fwd.target != bwd.source {
        return Err(Error::InvalidArgument(format!(
            "forward translator targets language {} but backward translator reads language {}",
            fwd.target, bwd.source
        )));
    }
    let bwd_ok: Vec<bool> =
        (0..world.n_sentences()).map(|y| world.is_correct(bwd.source, bwd.target, y, bwd.greedy(y))).collect();
    let mut total = 0.0;
    for (x, &w) in world.mu(fwd.source).iter().enumerate() {
        let probs = fwd.row_probs(x);
        total += w * probs.iter().zip(&bwd_ok).filter(|(_, &ok)| ok).map(|(p, _)| p).sum::<f64>();
    }
    Ok(total.clamp(0.0, 1.0))
}

/// Integer counts behind the estimators. Counts from disjoint item sets
/// merge by addition.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct EstimatorCounts {
    pub n_items: u64,
    /// Items whose vanilla round trip leaves the source cluster.
    pub vanilla_failed: u64,
    /// Of those, items the trained pair translates correctly and reconstructs.
    pub failed_to_correct_reconstructed: u64,
    /// Of those, items the trained pair translates wrongly but reconstructs.
    pub failed_to_wrong_reconstructed: u64,
    /// Of those, items the trained pair still fails to reconstruct.
    pub failed_unreconstructed: u64,
    pub vanilla_reconstructed: u64,
    /// Vanilla-reconstructed items that the trained pair also reconstructs.
    pub vanilla_reconstructed_kept: u64,
    pub dual_reconstructed: u64,
}

impl EstimatorCounts {
    pub fn record(&mut self, vanilla_closed: bool, trained_forward_correct: bool, trained_closed: bool) {
        self.n_items += 1;
        if trained_closed {
            self.dual_reconstructed += 1;
        }
        if vanilla_closed {
            self.vanilla_reconstructed += 1;
            if trained_closed {
                self.vanilla_reconstructed_kept += 1;
            }
        } else {
            self.vanilla_failed += 1;
            match (trained_closed, trained_forward_correct) {
                (true, true) => self.failed_to_correct_reconstructed += 1,
                (true, false) => self.failed_to_wrong_reconstructed += 1,
                (false, _) => self.failed_unreconstructed += 1,
            }
        }
    }

    pub fn merge(&self, other: &Self) -> Self {
        Self {
            n_items: self.n_items + other.n_items,
            vanilla_failed: self.vanilla_failed + other.vanilla_failed,
            failed_to_correct_reconstructed: self.failed_to_correct_reconstructed + other.failed_to_correct_reconstructed,
            failed_to_wrong_reconstructed: self.failed_to_wrong_reconstructed + other.failed_to_wrong_reconstructed,
            failed_unreconstructed: self.failed_unreconstructed + other.failed_unreconstructed,
            vanilla_reconstructed: self.vanilla_reconstructed + other.vanilla_reconstructed,
            vanilla_reconstructed_kept: self.vanilla_reconstructed_kept + other.vanilla_reconstructed_kept,
            dual_reconstructed: self.dual_reconstructed + other.dual_reconstructed,
        }
    }

    pub fn report(&self) -> EstimatorReport {
        let ratio = |num: u64, den: u64| (den > 0).then(|| num as f64 / den as f64);
        EstimatorReport {
            alpha_hat: ratio(self.failed_to_correct_reconstructed, self.vanilla_failed),
            beta_hat: ratio(self.failed_to_wrong_reconstructed, self.vanilla_failed),
            gamma_hat: ratio(self.failed_unreconstructed, self.vanilla_failed),
            eta_hat: ratio(self.vanilla_reconstructed_kept, self.vanilla_reconstructed),
            eta_raw: ratio(self.dual_reconstructed, self.vanilla_reconstructed),
            counts: *self,
        }
    }
}

/// Estimated redistribution of the vanilla-failed mass. `None` marks an
/// estimator whose denominator is empty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EstimatorReport {
    pub alpha_hat: Option<f64>,
    pub beta_hat: Option<f64>,
    pub gamma_hat: Option<f64>,
    /// Share of vanilla-reconstructed items still reconstructed after training.
    pub eta_hat: Option<f64>,
    /// All trained reconstructions over all vanilla reconstructions; can exceed 1.
    pub eta_raw: Option<f64>,
    pub counts: EstimatorCounts,
}

/// A translator pair `(a -> b, b -> a)`.
pub type TranslatorPair<'a> = (&'a TabularTranslator, &'a TabularTranslator);

fn round_trip(pair: TranslatorPair<'_>, world: &World, x: SentenceId) -> (bool, bool) {
    let (fwd, bwd) = pair;
    let y = fwd.greedy(x);
    let back = bwd.greedy(y);
    (
        world.is_correct(fwd.source, fwd.target, x, y),
        world.cluster_of(fwd.source, back) == world.cluster_of(fwd.source, x),
    )
}

/// Counts over `eval` (sentences of the pair's source language) comparing
/// the vanilla pair with the dual-trained pair.
pub fn estimators(
    vanilla: TranslatorPair<'_>,
    dual: TranslatorPair<'_>,
    eval: &[SentenceId],
    world: &World,
) -> Result<EstimatorReport> {
    if eval.is_empty() {
        return Err(Error::InvalidArgument("empty evaluation set".into()));
    }
    for t in [vanilla.0, vanilla.1, dual.0, dual.1] {
        check_shape(t, world)?;
    }
    let a = vanilla.0.source;
    let b = vanilla.0.target;
    for (fwd, bwd) in [vanilla, dual] {
        if (fwd.source, fwd.target, bwd.source, bwd.target) != (a, b, b, a) {
            return Err(Error::InvalidArgument(format!("translator pairs must both map {a}->{b}->{a}")));
        }
    }
    let n = world.n_sentences();
    let mut counts = EstimatorCounts::default();
    for &x in eval {
        if x >= n {
            return Err(Error::InvalidArgument(format!("evaluation sentence {x} out of range")));
        }
        let (_, vanilla_closed) = round_trip(vanilla, world, x);
        let (dual_correct, dual_closed) = round_trip(dual, world, x);
        counts.record(vanilla_closed, dual_correct, dual_closed);
    }
    Ok(counts.report())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use crate::synth_lang::generate_world;
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    fn tiny() -> World {
        generate_world(2, 2, 2, 0.7, 9).unwrap()
    }

    #[test]
    fn oracle_aligned_is_perfect() {
        let w = generate_world(2, 5, 3, 1.0, 0).unwrap();
        let t = TabularTranslator::oracle_aligned(&w, 0, 1);
        let r = accuracy(&t, &w);
        assert_abs_diff_eq!(r.p_hat, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.p_expected, 1.0, epsilon = 1e-12);
        assert_eq!(r.decoding, "greedy");
        let back = TabularTranslator::oracle_aligned(&w, 1, 0);
        assert_abs_diff_eq!(reconstruction_accuracy(&t, &back, &w).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn uniform_rows_hit_one_over_m() {
        let w = generate_world(2, 4, 3, 1.3, 1).unwrap();
        let n = w.n_sentences();
        let t = TabularTranslator::uniform(0, 1, n, n);
        assert_abs_diff_eq!(accuracy(&t, &w).p_expected, 0.25, epsilon = 1e-12);
    }

    #[test]
    fn uniform_backward_reconstructs_one_over_m() {
        // Uniform rows decode to sentence 0, so only cluster-0 outputs come back right.
        let w = generate_world(2, 4, 3, 0.0, 1).unwrap();
        let n = w.n_sentences();
        let fwd = TabularTranslator::uniform(0, 1, n, n);
        let bwd = TabularTranslator::uniform(1, 0, n, n);
        assert_abs_diff_eq!(reconstruction_accuracy(&fwd, &bwd, &w).unwrap(), 0.25, epsilon = 1e-12);
    }

    #[test]
    fn mismatched_spaces_rejected() {
        let w = tiny();
        let n = w.n_sentences();
        let a = TabularTranslator::uniform(0, 1, n, n);
        assert!(reconstruction_accuracy(&a, &a, &w).is_err());
        let wrong = TabularTranslator::uniform(0, 1, n + 1, n);
        assert!(try_accuracy(&wrong, &w).is_err());
    }

    #[test]
    fn greedy_accuracy_matches_set_sum() {
        let w = tiny();
        let n = w.n_sentences();
        let mut rng = stream_rng(2, 0);
        for _ in 0..20 {
            let t = TabularTranslator::random(0, 1, n, n, 2.0, &mut rng);
            let set_sum: f64 = (0..n)
                .filter(|&x| w.oracle(0, 1).map_cluster(w.cluster_of(0, x)) == w.cluster_of(1, t.greedy(x)))
                .map(|x| w.mu(0)[x])
                .sum();
            assert_abs_diff_eq!(accuracy(&t, &w).p_hat, set_sum, epsilon = 1e-12);
        }
    }

    #[test]
    fn expected_accuracy_matches_sampling() {
        let w = tiny();
        let n = w.n_sentences();
        let mut rng = stream_rng(4, 0);
        let t = TabularTranslator::random(0, 1, n, n, 1.5, &mut rng);
        let exact = accuracy(&t, &w).p_expected;
        let draws = 1_000_000;
        let mut hits = 0u64;
        for _ in 0..draws {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut x = n - 1;
            for (i, &m) in w.mu(0).iter().enumerate() {
                acc += m;
                if u < acc {
                    x = i;
                    break;
                }
            }
            let y = t.sample(x, &mut rng);
            hits += u64::from(w.is_correct(0, 1, x, y));
        }
        let est = hits as f64 / draws as f64;
        let stderr = (exact * (1.0 - exact) / draws as f64).sqrt();
        assert!((est - exact).abs() <= 4.0 * stderr, "{est} vs {exact}");
    }

    #[test]
    fn reconstruction_matches_double_enumeration() {
        let w = tiny();
        let n = w.n_sentences();
        let mut rng = stream_rng(6, 0);
        let fwd = TabularTranslator::random(0, 1, n, n, 2.0, &mut rng);
        let bwd = TabularTranslator::random(1, 0, n, n, 2.0, &mut rng);
        let mut brute = 0.0;
        for x in 0..n {
            for y in 0..n {
                let back = bwd.greedy(y);
                if w.cluster_of(0, back) == w.oracle(1, 0).map_cluster(w.cluster_of(1, y)) {
                    brute += w.mu(0)[x] * fwd.prob(x, y);
                }
            }
        }
        assert_abs_diff_eq!(reconstruction_accuracy(&fwd, &bwd, &w).unwrap(), brute, epsilon = 1e-12);
    }

    #[test]
    fn identical_pairs_leave_every_failure_unreconstructed() {
        let w = generate_world(2, 5, 2, 0.5, 3).unwrap();
        let n = w.n_sentences();
        let mut rng = stream_rng(1, 0);
        let fwd = TabularTranslator::random(0, 1, n, n, 1.0, &mut rng);
        let bwd = TabularTranslator::random(1, 0, n, n, 1.0, &mut rng);
        let eval: Vec<_> = (0..n).collect();
        let r = estimators((&fwd, &bwd), (&fwd, &bwd), &eval, &w).unwrap();
        assert!(r.counts.vanilla_failed > 0);
        assert_eq!(r.gamma_hat, Some(1.0));
        assert_eq!(r.alpha_hat, Some(0.0));
        assert_eq!(r.beta_hat, Some(0.0));
        assert_eq!(r.eta_hat, Some(1.0));
    }

    #[test]
    fn nothing_reconstructed_leaves_eta_undefined() {
        let w = generate_world(2, 2, 1, 0.0, 0).unwrap();
        // Identity forward, swapped backward: every round trip changes cluster.
        let fwd = TabularTranslator::from_theta(0, 1, 2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let bwd = TabularTranslator::from_theta(1, 0, 2, 2, vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        let r = estimators((&fwd, &bwd), (&fwd, &bwd), &[0, 1], &w).unwrap();
        assert_eq!(r.counts.vanilla_reconstructed, 0);
        assert_eq!(r.eta_hat, None);
        assert_eq!(r.eta_raw, None);
        assert_eq!(r.gamma_hat, Some(1.0));
    }

    #[test]
    fn empty_eval_set_rejected() {
        let w = tiny();
        let n = w.n_sentences();
        let t = TabularTranslator::uniform(0, 1, n, n);
        let u = TabularTranslator::uniform(1, 0, n, n);
        assert!(estimators((&t, &u), (&t, &u), &[], &w).is_err());
    }

    #[test]
    fn counts_partition_the_failures() {
        let mut c = EstimatorCounts::default();
        for bits in 0..8u8 {
            c.record(bits & 1 == 1, bits & 2 == 2, bits & 4 == 4);
        }
        assert_eq!(c.n_items, 8);
        assert_eq!(
            c.vanilla_failed,
            c.failed_to_correct_reconstructed + c.failed_to_wrong_reconstructed + c.failed_unreconstructed
        );
        let r = c.report();
        assert_abs_diff_eq!(r.alpha_hat.unwrap() + r.beta_hat.unwrap() + r.gamma_hat.unwrap(), 1.0, epsilon = 1e-12);
        assert_eq!(c.merge(&EstimatorCounts::default()), c);
    }
}
