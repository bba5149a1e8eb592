//! Tabular softmax translators and the training procedures.
//!
//! A [`TabularTranslator`] holds one score row per source sentence; the row's
//! softmax is the translation distribution. Every update is plain gradient
//! ascent on a sampled log-likelihood term `ln Pr(y | x; theta)`, whose row
//! gradient is `onehot(y) - softmax(row)`:
//!
//! - supervised: `(x, y)` drawn from the direction's parallel data;
//! - dual reconstruction: `x1` from monolingual data, `x2 ~ T12(x1)`, then
//!   ascend `T21` on `(x2, x1)` (and symmetrically for `T12`);
//! - multi-step: `x2` from monolingual data, `x1 ~ Tk1(T2k(x2))` through a
//!   pivot language `k`, then ascend `T12` on `(x1, x2)` (and symmetrically).
//!
//! Only the last hop of a sampled path is updated.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{self, AccuracyReport};
use crate::rng::{derive_seed, stream_rng, SimRng};
use crate::synth_lang::{Corpus, LangId, SentenceId, World};

#[derive(Debug, Clone, PartialEq)]
pub struct TabularTranslator {
    pub source: LangId,
    pub target: LangId,
    n_src: usize,
    n_tgt: usize,
    /// Row-major `n_src x n_tgt` scores.
    theta: Vec<f64>,
}

impl TabularTranslator {
    /// All-zero scores: every row is the uniform distribution.
    pub fn uniform(source: LangId, target: LangId, n_src: usize, n_tgt: usize) -> Self {
        Self { source, target, n_src, n_tgt, theta: vec![0.0; n_src * n_tgt] }
    }

    pub fn from_theta(source: LangId, target: LangId, n_src: usize, n_tgt: usize, theta: Vec<f64>) -> Result<Self> {
        if theta.len() != n_src * n_tgt {
            return Err(Error::InvalidArgument(format!(
                "theta has {} entries, expected {n_src} x {n_tgt}",
                theta.len()
            )));
        }
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("theta must be finite".into()));
        }
        Ok(Self { source, target, n_src, n_tgt, theta })
    }

    /// Deterministic translator that puts all its mass on the correct
    /// cluster, spread over the cluster's members.
    pub fn oracle_aligned(world: &World, source: LangId, target: LangId) -> Self {
        let n = world.n_sentences();
        let mut t = Self::uniform(source, target, n, n);
        for x in 0..n {
            for y in 0..n {
                if !world.is_correct(source, target, x, y) {
                    // exp(-1000) underflows to exactly zero.
                    t.theta[x * n + y] = -1000.0;
                }
            }
        }
        t
    }

    /// Scores drawn i.i.d. uniform on `[-scale, scale]`.
    pub fn random(source: LangId, target: LangId, n_src: usize, n_tgt: usize, scale: f64, rng: &mut impl Rng) -> Self {
        let theta = (0..n_src * n_tgt).map(|_| rng.random_range(-scale..=scale)).collect();
        Self { source, target, n_src, n_tgt, theta }
    }

    pub fn n_src(&self) -> usize {
        self.n_src
    }

    pub fn n_tgt(&self) -> usize {
        self.n_tgt
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn theta_mut(&mut self) -> &mut [f64] {
        &mut self.theta
    }

    pub fn row(&self, x: SentenceId) -> &[f64] {
        &self.theta[x * self.n_tgt..(x + 1) * self.n_tgt]
    }

    pub fn row_probs(&self, x: SentenceId) -> Vec<f64> {
        softmax(self.row(x))
    }

    pub fn prob(&self, x: SentenceId, y: SentenceId) -> f64 {
        self.row_probs(x)[y]
    }

    pub fn log_prob(&self, x: SentenceId, y: SentenceId) -> f64 {
        let row = self.row(x);
        row[y] - log_sum_exp(row)
    }

    /// Gradient of `ln Pr(y | x)` with respect to row `x` (other rows are zero).
    pub fn log_prob_row_grad(&self, x: SentenceId, y: SentenceId) -> Vec<f64> {
        let mut g = self.row_probs(x);
        g.iter_mut().for_each(|p| *p = -*p);
        g[y] += 1.0;
        g
    }

    /// Argmax of row `x`, ties to the lowest target id.
    pub fn greedy(&self, x: SentenceId) -> SentenceId {
        let row = self.row(x);
        let mut best = 0;
        for (y, &v) in row.iter().enumerate().skip(1) {
            if v > row[best] {
                best = y;
            }
        }
        best
    }

    pub fn sample(&self, x: SentenceId, rng: &mut impl Rng) -> SentenceId {
        let probs = self.row_probs(x);
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (y, p) in probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return y;
            }
        }
        // Rounding left u above the cumulative sum; take the last positive entry.
        probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
    }

    /// One ascent step on the averaged log-likelihood of `items`, with every
    /// gradient evaluated at the current scores.
    pub fn ascend(&mut self, items: &[(SentenceId, SentenceId)], learning_rate: f64) {
        if items.is_empty() {
            return;
        }
        let scale = learning_rate / items.len() as f64;
        let grads: Vec<(SentenceId, Vec<f64>)> = items.iter().map(|&(x, y)| (x, self.log_prob_row_grad(x, y))).collect();
        for (x, g) in grads {
            let row = &mut self.theta[x * self.n_tgt..(x + 1) * self.n_tgt];
            for (v, d) in row.iter_mut().zip(g) {
                *v += scale * d;
            }
        }
    }

    pub fn rows_normalized(&self, tol: f64) -> bool {
        (0..self.n_src).all(|x| (self.row_probs(x).iter().sum::<f64>() - 1.0).abs() <= tol)
            && self.theta.iter().all(|v| v.is_finite())
    }
}

fn log_sum_exp(row: &[f64]) -> f64 {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

fn softmax(row: &[f64]) -> Vec<f64> {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = row.iter().map(|v| (v - max).exp()).collect();
    let total: f64 = out.iter().sum();
    out.iter_mut().for_each(|p| *p /= total);
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub steps: usize,
    pub supervised_batch: usize,
    pub reconstruction_batch: usize,
    /// Probability that a dual or multi-step iteration is a supervised
    /// replay step instead of a reconstruction step.
    pub supervised_mix: f64,
    pub seed: u64,
    /// Multi-step only: keep updating the pivot pairs with dual
    /// reconstruction steps instead of freezing them.
    pub joint_pivot_updates: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1.0,
            steps: 2000,
            supervised_batch: 8,
            reconstruction_batch: 8,
            supervised_mix: 0.5,
            seed: 0,
            joint_pivot_updates: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::InvalidArgument(format!("learning_rate must be > 0, got {}", self.learning_rate)));
        }
        if !(0.0..=1.0).contains(&self.supervised_mix) {
            return Err(Error::InvalidArgument(format!("supervised_mix must lie in [0, 1], got {}", self.supervised_mix)));
        }
        if self.supervised_batch == 0 || self.reconstruction_batch == 0 {
            return Err(Error::InvalidArgument("batch sizes must be >= 1".into()));
        }
        Ok(())
    }
}

const LABEL_SCHEDULE: u64 = 0x5C4E;
const LABEL_RECON: u64 = 0x7EC0;
const LABEL_MULTI: u64 = 0x3017;

fn direction_label(source: LangId, target: LangId) -> u64 {
    0x1_0000 + (source as u64) * 4096 + target as u64
}

fn supervised_rng(cfg: &TrainConfig, t: &TabularTranslator) -> SimRng {
    stream_rng(derive_seed(cfg.seed, direction_label(t.source, t.target)), 0)
}

fn supervised_step(
    t: &mut TabularTranslator,
    pairs: &[(SentenceId, SentenceId)],
    cfg: &TrainConfig,
    rng: &mut SimRng,
) -> Vec<(SentenceId, SentenceId)> {
    let batch: Vec<_> = (0..cfg.supervised_batch).map(|_| pairs[rng.random_range(0..pairs.len())]).collect();
    t.ascend(&batch, cfg.learning_rate);
    batch
}

/// Gradient ascent on the parallel-data log-likelihood.
pub fn train_supervised(
    mut t: TabularTranslator,
    pairs: &[(SentenceId, SentenceId)],
    cfg: &TrainConfig,
) -> Result<TabularTranslator> {
    cfg.validate()?;
    if pairs.is_empty() {
        return Err(Error::InvalidArgument(format!("no parallel data for {}->{}", t.source, t.target)));
    }
    let mut rng = supervised_rng(cfg, &t);
    for _ in 0..cfg.steps {
        supervised_step(&mut t, pairs, cfg, &mut rng);
    }
    Ok(t)
}

/// What a single reconstruction step sampled and which translator it moved.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UpdateTrace {
    pub updated: (LangId, LangId),
    /// `(source row, target)` of every term in the step's batch.
    pub terms: Vec<(SentenceId, SentenceId)>,
}

/// One reconstruction step in each direction of the pair `(fwd, bwd)`.
/// Returns the traces for the `bwd` update then the `fwd` update.
pub fn dual_reconstruction_step(
    fwd: &mut TabularTranslator,
    bwd: &mut TabularTranslator,
    mono_src: &[SentenceId],
    mono_tgt: &[SentenceId],
    cfg: &TrainConfig,
    rng: &mut SimRng,
) -> [UpdateTrace; 2] {
    let bwd_terms: Vec<_> = (0..cfg.reconstruction_batch)
        .map(|_| {
            let x = mono_src[rng.random_range(0..mono_src.len())];
            (fwd.sample(x, rng), x)
        })
        .collect();
    let fwd_terms: Vec<_> = (0..cfg.reconstruction_batch)
        .map(|_| {
            let y = mono_tgt[rng.random_range(0..mono_tgt.len())];
            (bwd.sample(y, rng), y)
        })
        .collect();
    bwd.ascend(&bwd_terms, cfg.learning_rate);
    fwd.ascend(&fwd_terms, cfg.learning_rate);
    [
        UpdateTrace { updated: (bwd.source, bwd.target), terms: bwd_terms },
        UpdateTrace { updated: (fwd.source, fwd.target), terms: fwd_terms },
    ]
}

/// Semi-supervised dual learning of the pair `(t12, t21)`: supervised replay
/// on each direction's parallel data interleaved with reconstruction steps on
/// both languages' monolingual data.
pub fn dual_learning(
    mut t12: TabularTranslator,
    mut t21: TabularTranslator,
    corpus: &Corpus,
    cfg: &TrainConfig,
) -> Result<(TabularTranslator, TabularTranslator)> {
    cfg.validate()?;
    let (a, b) = (t12.source, t12.target);
    if (t21.source, t21.target) != (b, a) {
        return Err(Error::InvalidArgument("dual learning needs translators a->b and b->a".into()));
    }
    let (mono_a, mono_b) = (corpus.monolingual(a), corpus.monolingual(b));
    if mono_a.is_empty() || mono_b.is_empty() {
        return Err(Error::InvalidArgument(format!("dual learning needs monolingual data for languages {a} and {b}")));
    }
    let (par_ab, par_ba) = (corpus.parallel(a, b), corpus.parallel(b, a));
    let mut schedule = stream_rng(derive_seed(cfg.seed, LABEL_SCHEDULE), direction_label(a, b));
    let mut sup12 = supervised_rng(cfg, &t12);
    let mut sup21 = supervised_rng(cfg, &t21);
    let mut recon = stream_rng(derive_seed(cfg.seed, LABEL_RECON), direction_label(a, b));
    for _ in 0..cfg.steps {
        if schedule.random::<f64>() < cfg.supervised_mix {
            if !par_ab.is_empty() {
                supervised_step(&mut t12, par_ab, cfg, &mut sup12);
            }
            if !par_ba.is_empty() {
                supervised_step(&mut t21, par_ba, cfg, &mut sup21);
            }
        } else {
            dual_reconstruction_step(&mut t12, &mut t21, mono_a, mono_b, cfg, &mut recon);
        }
    }
    Ok((t12, t21))
}

/// All translators of a `k`-language world, keyed by ordered direction.
#[derive(Debug, Clone, PartialEq)]
pub struct TranslatorSet {
    pub k: usize,
    pub translators: BTreeMap<(LangId, LangId), TabularTranslator>,
}

impl TranslatorSet {
    pub fn uniform(world: &World) -> Self {
        let n = world.n_sentences();
        let mut translators = BTreeMap::new();
        for i in 0..world.k {
            for j in 0..world.k {
                if i != j {
                    translators.insert((i, j), TabularTranslator::uniform(i, j, n, n));
                }
            }
        }
        Self { k: world.k, translators }
    }

    pub fn get(&self, source: LangId, target: LangId) -> &TabularTranslator {
        &self.translators[&(source, target)]
    }

    pub fn get_mut(&mut self, source: LangId, target: LangId) -> &mut TabularTranslator {
        self.translators.get_mut(&(source, target)).expect("translator direction")
    }

    fn take_pair(&mut self, a: LangId, b: LangId) -> (TabularTranslator, TabularTranslator) {
        let ab = self.translators.remove(&(a, b)).expect("translator direction");
        let ba = self.translators.remove(&(b, a)).expect("translator direction");
        (ab, ba)
    }

    fn put_pair(&mut self, ab: TabularTranslator, ba: TabularTranslator) {
        self.translators.insert((ab.source, ab.target), ab);
        self.translators.insert((ba.source, ba.target), ba);
    }

    /// Supervised training of every direction on its own parallel data.
    pub fn train_vanilla(&mut self, corpus: &Corpus, cfg: &TrainConfig) -> Result<()> {
        let keys: Vec<_> = self.translators.keys().copied().collect();
        for (i, j) in keys {
            let t = self.translators.remove(&(i, j)).expect("translator direction");
            self.translators.insert((i, j), train_supervised(t, corpus.parallel(i, j), cfg)?);
        }
        Ok(())
    }

    /// Dual learning of the unordered pair `{a, b}` in place.
    pub fn train_dual_pair(&mut self, a: LangId, b: LangId, corpus: &Corpus, cfg: &TrainConfig) -> Result<()> {
        let (ab, ba) = self.take_pair(a, b);
        let result = dual_learning(ab.clone(), ba.clone(), corpus, cfg);
        match result {
            Ok((ab, ba)) => {
                self.put_pair(ab, ba);
                Ok(())
            }
            Err(e) => {
                self.put_pair(ab, ba);
                Err(e)
            }
        }
    }
}

/// Paths sampled by one multi-step iteration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MultistepTrace {
    pub pivot: LangId,
    /// `(x1, pivot sentence, reconstructed x2_tilde)` per batch term.
    pub forward_paths: Vec<(SentenceId, SentenceId, SentenceId)>,
    /// `(x2, pivot sentence, reconstructed x1_tilde)` per batch term.
    pub backward_paths: Vec<(SentenceId, SentenceId, SentenceId)>,
}

/// One multi-step iteration for the pair `(a, b)` through `pivot`:
/// `x1_tilde = T_{pivot,a}(T_{b,pivot}(x2))` feeds `T_ab` on `(x1_tilde, x2)`
/// and `x2_tilde = T_{pivot,b}(T_{a,pivot}(x1))` feeds `T_ba` on `(x2_tilde, x1)`.
#[allow(clippy::too_many_arguments)]
pub fn multistep_step(
    set: &mut TranslatorSet,
    a: LangId,
    b: LangId,
    pivot: LangId,
    mono_a: &[SentenceId],
    mono_b: &[SentenceId],
    cfg: &TrainConfig,
    rng: &mut SimRng,
) -> MultistepTrace {
    let (t_ap, t_pb, t_bp, t_pa) = (set.get(a, pivot), set.get(pivot, b), set.get(b, pivot), set.get(pivot, a));
    let forward_paths: Vec<_> = (0..cfg.reconstruction_batch)
        .map(|_| {
            let x1 = mono_a[rng.random_range(0..mono_a.len())];
            let mid = t_ap.sample(x1, rng);
            (x1, mid, t_pb.sample(mid, rng))
        })
        .collect();
    let backward_paths: Vec<_> = (0..cfg.reconstruction_batch)
        .map(|_| {
            let x2 = mono_b[rng.random_range(0..mono_b.len())];
            let mid = t_bp.sample(x2, rng);
            (x2, mid, t_pa.sample(mid, rng))
        })
        .collect();
    let ab_terms: Vec<_> = backward_paths.iter().map(|&(x2, _, x1t)| (x1t, x2)).collect();
    let ba_terms: Vec<_> = forward_paths.iter().map(|&(x1, _, x2t)| (x2t, x1)).collect();
    set.get_mut(a, b).ascend(&ab_terms, cfg.learning_rate);
    set.get_mut(b, a).ascend(&ba_terms, cfg.learning_rate);
    MultistepTrace { pivot, forward_paths, backward_paths }
}

/// Multi-step dual learning of the pair `(a, b)` using every other language
/// as a candidate pivot. The translators are expected to be dual-pretrained.
pub fn multistep_dual_learning(
    set: &mut TranslatorSet,
    a: LangId,
    b: LangId,
    corpus: &Corpus,
    cfg: &TrainConfig,
) -> Result<()> {
    cfg.validate()?;
    if set.k < 3 {
        return Err(Error::InvalidArgument(format!(
            "multi-step dual learning needs at least 3 languages (got {}); with two it is plain dual learning",
            set.k
        )));
    }
    let pivots: Vec<LangId> = (0..set.k).filter(|&l| l != a && l != b).collect();
    let (mono_a, mono_b) = (corpus.monolingual(a), corpus.monolingual(b));
    if mono_a.is_empty() || mono_b.is_empty() {
        return Err(Error::InvalidArgument(format!("multi-step learning needs monolingual data for {a} and {b}")));
    }
    let (par_ab, par_ba) = (corpus.parallel(a, b), corpus.parallel(b, a));
    let mut schedule = stream_rng(derive_seed(cfg.seed, LABEL_SCHEDULE ^ LABEL_MULTI), direction_label(a, b));
    let mut sup_ab = supervised_rng(cfg, set.get(a, b));
    let mut sup_ba = supervised_rng(cfg, set.get(b, a));
    let mut sampler = stream_rng(derive_seed(cfg.seed, LABEL_MULTI), direction_label(a, b));
    let mut pivot_recon = stream_rng(derive_seed(cfg.seed, LABEL_MULTI ^ LABEL_RECON), direction_label(a, b));
    for _ in 0..cfg.steps {
        if schedule.random::<f64>() < cfg.supervised_mix {
            if !par_ab.is_empty() {
                supervised_step(set.get_mut(a, b), par_ab, cfg, &mut sup_ab);
            }
            if !par_ba.is_empty() {
                supervised_step(set.get_mut(b, a), par_ba, cfg, &mut sup_ba);
            }
            continue;
        }
        let pivot = pivots[sampler.random_range(0..pivots.len())];
        multistep_step(set, a, b, pivot, mono_a, mono_b, cfg, &mut sampler);
        if cfg.joint_pivot_updates {
            for end in [a, b] {
                let mono_end = corpus.monolingual(end);
                let mono_pivot = corpus.monolingual(pivot);
                if mono_end.is_empty() || mono_pivot.is_empty() {
                    continue;
                }
                let (mut fwd, mut bwd) = set.take_pair(end, pivot);
                dual_reconstruction_step(&mut fwd, &mut bwd, mono_end, mono_pivot, cfg, &mut pivot_recon);
                set.put_pair(fwd, bwd);
            }
        }
    }
    Ok(())
}

/// Exact `ln Pr(x2 reconstructed)` around the loop `b -> pivot -> a -> b`:
/// `ln sum_{xk, x1} Pr(xk | x2) Pr(x1 | xk) Pr(x2 | x1)`.
pub fn loop_log_prob_exact(
    t_b_pivot: &TabularTranslator,
    t_pivot_a: &TabularTranslator,
    t_ab: &TabularTranslator,
    x2: SentenceId,
) -> f64 {
    let first = t_b_pivot.row_probs(x2);
    let mut total = 0.0;
    for (xk, pk) in first.iter().enumerate() {
        let second = t_pivot_a.row_probs(xk);
        for (x1, p1) in second.iter().enumerate() {
            total += pk * p1 * t_ab.prob(x1, x2);
        }
    }
    total.ln()
}

/// Concavity lower bound `E_{xk ~ T(.|x2)} E_{x1 ~ T(.|xk)} ln Pr(x2 | x1)`.
pub fn loop_log_prob_lower_bound(
    t_b_pivot: &TabularTranslator,
    t_pivot_a: &TabularTranslator,
    t_ab: &TabularTranslator,
    x2: SentenceId,
) -> f64 {
    hop_weights(t_b_pivot, t_pivot_a, x2)
        .iter()
        .enumerate()
        .map(|(x1, w)| w * t_ab.log_prob(x1, x2))
        .sum()
}

/// Exact gradient of [`loop_log_prob_lower_bound`] with respect to the
/// scores of `t_ab` (row-major, same layout as `theta`). The sampled
/// estimator `d/dtheta ln Pr(x2 | x1)` with `x1` drawn along the loop is an
/// unbiased estimate of this.
pub fn loop_lower_bound_grad(
    t_b_pivot: &TabularTranslator,
    t_pivot_a: &TabularTranslator,
    t_ab: &TabularTranslator,
    x2: SentenceId,
) -> Vec<f64> {
    let n_tgt = t_ab.n_tgt();
    let mut grad = vec![0.0; t_ab.n_src() * n_tgt];
    for (x1, w) in hop_weights(t_b_pivot, t_pivot_a, x2).into_iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        for (y, g) in t_ab.log_prob_row_grad(x1, x2).into_iter().enumerate() {
            grad[x1 * n_tgt + y] += w * g;
        }
    }
    grad
}

/// `Pr(x1 | x2)` after the two pivot hops.
fn hop_weights(t_b_pivot: &TabularTranslator, t_pivot_a: &TabularTranslator, x2: SentenceId) -> Vec<f64> {
    let mut weights = vec![0.0; t_pivot_a.n_tgt()];
    for (xk, pk) in t_b_pivot.row_probs(x2).into_iter().enumerate() {
        for (x1, p1) in t_pivot_a.row_probs(xk).into_iter().enumerate() {
            weights[x1] += pk * p1;
        }
    }
    weights
}

/// Accuracy reports for every direction of the set.
pub fn evaluate(set: &TranslatorSet, world: &World) -> Vec<AccuracyReport> {
    set.translators.values().map(|t| metrics::accuracy(t, world)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth_lang::{generate_world, sample_corpus, CorpusSpec};
    use approx::assert_abs_diff_eq;

    #[test]
    fn uniform_rows_are_normalized() {
        let t = TabularTranslator::uniform(0, 1, 3, 5);
        assert!(t.rows_normalized(1e-12));
        assert_abs_diff_eq!(t.prob(2, 4), 0.2, epsilon = 1e-15);
        assert_eq!(t.greedy(1), 0);
    }

    #[test]
    fn from_theta_checks_shape_and_finiteness() {
        assert!(TabularTranslator::from_theta(0, 1, 2, 2, vec![0.0; 3]).is_err());
        assert!(TabularTranslator::from_theta(0, 1, 1, 2, vec![0.0, f64::NAN]).is_err());
    }

    #[test]
    fn greedy_ties_go_to_lowest_id() {
        let t = TabularTranslator::from_theta(0, 1, 1, 4, vec![0.0, 2.0, 2.0, 1.0]).unwrap();
        assert_eq!(t.greedy(0), 1);
    }

    #[test]
    fn zero_steps_leave_theta_unchanged() {
        let t = TabularTranslator::uniform(0, 1, 4, 4);
        let cfg = TrainConfig { steps: 0, ..Default::default() };
        assert_eq!(train_supervised(t.clone(), &[(0, 1)], &cfg).unwrap(), t);
    }

    #[test]
    fn empty_pairs_rejected() {
        let t = TabularTranslator::uniform(0, 1, 4, 4);
        assert!(train_supervised(t, &[], &TrainConfig::default()).is_err());
    }

    #[test]
    fn supervised_learns_two_sentence_world() {
        let world = generate_world(2, 2, 1, 0.0, 0).unwrap();
        let t = TabularTranslator::uniform(0, 1, 2, 2);
        let cfg = TrainConfig { steps: 50, ..Default::default() };
        let t = train_supervised(t, &[(0, 0), (1, 1)], &cfg).unwrap();
        for x in 0..2 {
            assert!(world.is_correct(0, 1, x, t.greedy(x)));
        }
        assert_eq!(metrics::accuracy(&t, &world).p_hat, 1.0);
    }

    #[test]
    fn minibatch_step_is_averaged_gradient() {
        let mut rng = stream_rng(3, 0);
        let t = TabularTranslator::random(0, 1, 3, 4, 1.0, &mut rng);
        let mut stepped = t.clone();
        stepped.ascend(&[(0, 1), (0, 2), (2, 3)], 0.3);
        let g01 = t.log_prob_row_grad(0, 1);
        let g02 = t.log_prob_row_grad(0, 2);
        let g23 = t.log_prob_row_grad(2, 3);
        for y in 0..4 {
            assert_abs_diff_eq!(stepped.row(0)[y] - t.row(0)[y], 0.1 * (g01[y] + g02[y]), epsilon = 1e-14);
            assert_abs_diff_eq!(stepped.row(2)[y] - t.row(2)[y], 0.1 * g23[y], epsilon = 1e-14);
            assert_eq!(stepped.row(1)[y], t.row(1)[y]);
        }
    }

    #[test]
    fn dual_learning_requires_monolingual_data() {
        let world = generate_world(2, 3, 2, 0.0, 0).unwrap();
        let mut corpus = sample_corpus(&world, &CorpusSpec::default(), 1).unwrap();
        corpus.monolingual.remove(&1);
        let n = world.n_sentences();
        let err = dual_learning(
            TabularTranslator::uniform(0, 1, n, n),
            TabularTranslator::uniform(1, 0, n, n),
            &corpus,
            &TrainConfig::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidArgument(_)));
    }

    #[test]
    fn dual_learning_without_reconstruction_is_supervised_replay() {
        let world = generate_world(2, 5, 2, 0.0, 0).unwrap();
        let corpus =
            sample_corpus(&world, &CorpusSpec { parallel_per_direction: 20, monolingual_per_language: 20, ..Default::default() }, 4)
                .unwrap();
        let n = world.n_sentences();
        let cfg = TrainConfig { steps: 40, supervised_mix: 1.0, seed: 11, ..Default::default() };
        let (t12, t21) = dual_learning(
            TabularTranslator::uniform(0, 1, n, n),
            TabularTranslator::uniform(1, 0, n, n),
            &corpus,
            &cfg,
        )
        .unwrap();
        let s12 = train_supervised(TabularTranslator::uniform(0, 1, n, n), corpus.parallel(0, 1), &cfg).unwrap();
        let s21 = train_supervised(TabularTranslator::uniform(1, 0, n, n), corpus.parallel(1, 0), &cfg).unwrap();
        assert_eq!(t12, s12);
        assert_eq!(t21, s21);
    }

    #[test]
    fn multistep_needs_three_languages() {
        let world = generate_world(2, 3, 2, 0.0, 0).unwrap();
        let corpus = sample_corpus(&world, &CorpusSpec::default(), 1).unwrap();
        let mut set = TranslatorSet::uniform(&world);
        let err = multistep_dual_learning(&mut set, 0, 1, &corpus, &TrainConfig::default()).unwrap_err();
        assert!(err.to_string().contains("at least 3 languages"));
    }

    #[test]
    fn perfect_pivots_give_cluster_correct_sources() {
        let world = generate_world(3, 6, 3, 0.0, 2).unwrap();
        let corpus = sample_corpus(&world, &CorpusSpec { parallel_per_direction: 10, monolingual_per_language: 50, ..Default::default() }, 3)
            .unwrap();
        let mut set = TranslatorSet::uniform(&world);
        for (i, j) in [(0, 2), (2, 0), (1, 2), (2, 1)] {
            *set.get_mut(i, j) = TabularTranslator::oracle_aligned(&world, i, j);
        }
        let pivots_before: Vec<_> = [(0, 2), (2, 0), (1, 2), (2, 1)].iter().map(|&(i, j)| set.get(i, j).clone()).collect();
        let cfg = TrainConfig { reconstruction_batch: 4, ..Default::default() };
        let mut rng = stream_rng(5, 0);
        for _ in 0..50 {
            let trace = multistep_step(&mut set, 0, 1, 2, corpus.monolingual(0), corpus.monolingual(1), &cfg, &mut rng);
            for (x2, _, x1t) in trace.backward_paths {
                assert!(world.is_correct(1, 0, x2, x1t));
            }
            for (x1, _, x2t) in trace.forward_paths {
                assert!(world.is_correct(0, 1, x1, x2t));
            }
        }
        let pivots_after: Vec<_> = [(0, 2), (2, 0), (1, 2), (2, 1)].iter().map(|&(i, j)| set.get(i, j).clone()).collect();
        assert_eq!(pivots_before, pivots_after);
    }

    #[test]
    fn lower_bound_below_exact_on_tiny_world() {
        let mut rng = stream_rng(8, 0);
        for _ in 0..10 {
            let a = TabularTranslator::random(1, 2, 4, 4, 2.0, &mut rng);
            let b = TabularTranslator::random(2, 0, 4, 4, 2.0, &mut rng);
            let c = TabularTranslator::random(0, 1, 4, 4, 2.0, &mut rng);
            for x2 in 0..4 {
                assert!(loop_log_prob_lower_bound(&a, &b, &c, x2) <= loop_log_prob_exact(&a, &b, &c, x2) + 1e-10);
            }
        }
    }

    #[test]
    fn evaluate_reports_every_direction() {
        let world = generate_world(3, 2, 2, 0.0, 0).unwrap();
        let set = TranslatorSet::uniform(&world);
        let reports = evaluate(&set, &world);
        assert_eq!(reports.len(), 6);
        for r in reports {
            assert_abs_diff_eq!(r.p_expected, 0.5, epsilon = 1e-12);
        }
    }
}
