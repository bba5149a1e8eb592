//! Synthetic clustered language worlds.
//!
//! A world has `k` languages sharing `m` semantic cluster ids. Each language
//! has `s` sentences per cluster, laid out cluster-major: sentence `x` of any
//! language belongs to cluster `x / s`. Every oracle translator is the
//! identity on cluster ids, so all compositions are consistent.
//!
//! # Text format
//!
//! Worlds and corpora serialize to line-oriented UTF-8 text, one record per
//! line, fields separated by single spaces, LF line endings:
//!
//! ```text
//! dualsim-world v1
//! world <k> <m> <s> <skew> <seed>
//! sentence <lang> <id> <cluster> <mu>
//! ...
//! ```
//!
//! ```text
//! dualsim-corpus v1
//! parallel <src_lang> <tgt_lang> <src_id> <tgt_id>
//! mono <lang> <id>
//! ...
//! ```
//!
//! Floats use Rust's shortest round-trip formatting, so
//! `World::from_text(&w.to_text())` reproduces `w` bit for bit.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, stream_rng};
use crate::PROB_TOL;

pub type LangId = usize;
pub type SentenceId = usize;
pub type ClusterId = usize;

#[derive(Debug, Clone, PartialEq)]
pub struct Language {
    pub mu: Vec<f64>,
    pub cluster_of: Vec<ClusterId>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct World {
    pub k: usize,
    pub m: usize,
    pub sentences_per_cluster: usize,
    pub skew: f64,
    pub seed: u64,
    pub languages: Vec<Language>,
}

/// Ground-truth cluster map between two languages.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleTranslator {
    pub source: LangId,
    pub target: LangId,
    /// `cluster_map[c]` is the target cluster of source cluster `c`.
    pub cluster_map: Vec<ClusterId>,
}

impl OracleTranslator {
    pub fn map_cluster(&self, c: ClusterId) -> ClusterId {
        self.cluster_map[c]
    }

    /// `other ∘ self`; requires `self.target == other.source`.
    pub fn then(&self, other: &OracleTranslator) -> Option<OracleTranslator> {
        (self.target == other.source).then(|| OracleTranslator {
            source: self.source,
            target: other.target,
            cluster_map: self.cluster_map.iter().map(|&c| other.cluster_map[c]).collect(),
        })
    }

    pub fn is_bijective(&self) -> bool {
        let mut seen = vec![false; self.cluster_map.len()];
        self.cluster_map.iter().all(|&c| c < seen.len() && !std::mem::replace(&mut seen[c], true))
    }
}

pub fn generate_world(k: usize, m: usize, s: usize, skew: f64, seed: u64) -> Result<World> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!("a world needs at least 2 languages, got {k}")));
    }
    if m == 0 || s == 0 {
        return Err(Error::InvalidArgument(format!("clusters ({m}) and sentences per cluster ({s}) must be >= 1")));
    }
    if !(skew.is_finite() && skew >= 0.0) {
        return Err(Error::InvalidArgument(format!("skew must be a nonnegative real, got {skew}")));
    }
    let n = m * s;
    let languages = (0..k)
        .map(|lang| {
            let mu = if skew == 0.0 {
                vec![1.0 / n as f64; n]
            } else {
                // Log-normal weights; skew is the log-scale standard deviation.
                let mut rng = stream_rng(derive_seed(seed, 0x3u64), lang as u64);
                let w: Vec<f64> = (0..n)
                    .map(|_| { let z: f64 = StandardNormal.sample(&mut rng); (skew * z).exp() })
                    .collect();
                let total: f64 = w.iter().sum();
                w.into_iter().map(|x| x / total).collect()
            };
            Language { mu, cluster_of: (0..n).map(|x| x / s).collect() }
        })
        .collect();
    Ok(World { k, m, sentences_per_cluster: s, skew, seed, languages })
}

impl World {
    pub fn n_sentences(&self) -> usize {
        self.m * self.sentences_per_cluster
    }

    pub fn mu(&self, lang: LangId) -> &[f64] {
        &self.languages[lang].mu
    }

    pub fn cluster_of(&self, lang: LangId, x: SentenceId) -> ClusterId {
        self.languages[lang].cluster_of[x]
    }

    pub fn members(&self, lang: LangId, c: ClusterId) -> impl Iterator<Item = SentenceId> + '_ {
        self.languages[lang].cluster_of.iter().enumerate().filter(move |(_, &cx)| cx == c).map(|(x, _)| x)
    }

    pub fn oracle(&self, source: LangId, target: LangId) -> OracleTranslator {
        OracleTranslator { source, target, cluster_map: (0..self.m).collect() }
    }

    /// Whether target sentence `y` lies in the oracle image of source `x`.
    pub fn is_correct(&self, source: LangId, target: LangId, x: SentenceId, y: SentenceId) -> bool {
        self.oracle(source, target).map_cluster(self.cluster_of(source, x)) == self.cluster_of(target, y)
    }

    pub fn check_invariants(&self) -> Result<()> {
        if self.languages.len() != self.k {
            return Err(Error::InvalidArgument("language count does not match k".into()));
        }
        for (lang, l) in self.languages.iter().enumerate() {
            let n = self.n_sentences();
            if l.mu.len() != n || l.cluster_of.len() != n {
                return Err(Error::InvalidArgument(format!("language {lang} has the wrong sentence count")));
            }
            let total: f64 = l.mu.iter().sum();
            if (total - 1.0).abs() > PROB_TOL || l.mu.iter().any(|p| p.is_nan() || *p < 0.0) {
                return Err(Error::InvalidArgument(format!("mu of language {lang} is not a distribution")));
            }
            let mut sizes = vec![0usize; self.m];
            for &c in &l.cluster_of {
                if c >= self.m {
                    return Err(Error::InvalidArgument(format!("cluster id {c} out of range")));
                }
                sizes[c] += 1;
            }
            if sizes.contains(&0) {
                return Err(Error::InvalidArgument(format!("language {lang} has an empty cluster")));
            }
        }
        for i in 0..self.k {
            for j in 0..self.k {
                let ij = self.oracle(i, j);
                if !ij.is_bijective() {
                    return Err(Error::InvalidArgument(format!("oracle {i}->{j} is not bijective")));
                }
                for l in 0..self.k {
                    let via = ij.then(&self.oracle(j, l)).expect("chained oracles");
                    if via.cluster_map != self.oracle(i, l).cluster_map {
                        return Err(Error::InvalidArgument(format!("oracles {i}->{j}->{l} are inconsistent")));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("dualsim-world v1\n");
        let _ = writeln!(out, "world {} {} {} {} {}", self.k, self.m, self.sentences_per_cluster, self.skew, self.seed);
        for (lang, l) in self.languages.iter().enumerate() {
            for (x, (&mu, &c)) in l.mu.iter().zip(&l.cluster_of).enumerate() {
                let _ = writeln!(out, "sentence {lang} {x} {c} {mu}");
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<World> {
        let mut lines = text.lines().enumerate();
        expect_header(lines.next(), "dualsim-world v1")?;
        let (line_no, header) = lines.next().ok_or(Error::Parse { line: 2, msg: "missing world record".into() })?;
        let f: Vec<&str> = header.split(' ').collect();
        if f.len() != 6 || f[0] != "world" {
            return Err(Error::Parse { line: line_no + 1, msg: "expected `world <k> <m> <s> <skew> <seed>`".into() });
        }
        let k: usize = parse_field(f[1], line_no)?;
        let m: usize = parse_field(f[2], line_no)?;
        let s: usize = parse_field(f[3], line_no)?;
        let skew: f64 = parse_field(f[4], line_no)?;
        let seed: u64 = parse_field(f[5], line_no)?;
        let n = m * s;
        let mut languages = vec![Language { mu: vec![f64::NAN; n], cluster_of: vec![usize::MAX; n] }; k];
        let mut count = 0usize;
        for (line_no, line) in lines {
            if line.is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(' ').collect();
            if f.len() != 5 || f[0] != "sentence" {
                return Err(Error::Parse { line: line_no + 1, msg: format!("unexpected record `{line}`") });
            }
            let lang: usize = parse_field(f[1], line_no)?;
            let x: usize = parse_field(f[2], line_no)?;
            if lang >= k || x >= n {
                return Err(Error::Parse { line: line_no + 1, msg: "sentence index out of range".into() });
            }
            languages[lang].cluster_of[x] = parse_field(f[3], line_no)?;
            languages[lang].mu[x] = parse_field(f[4], line_no)?;
            count += 1;
        }
        if count != k * n {
            return Err(Error::Parse { line: 0, msg: format!("expected {} sentence records, found {count}", k * n) });
        }
        let world = World { k, m, sentences_per_cluster: s, skew, seed, languages };
        world.check_invariants()?;
        Ok(world)
    }
}

fn expect_header(line: Option<(usize, &str)>, header: &str) -> Result<()> {
    match line {
        Some((_, l)) if l == header => Ok(()),
        _ => Err(Error::Parse { line: 1, msg: format!("expected header `{header}`") }),
    }
}

fn parse_field<T: std::str::FromStr>(s: &str, line_no: usize) -> Result<T> {
    s.parse().map_err(|_| Error::Parse { line: line_no + 1, msg: format!("cannot parse `{s}`") })
}

/// How the target of a supervised pair is picked inside the correct cluster.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetChoice {
    /// Target language distribution restricted to the cluster and renormalized.
    #[default]
    ConditionalMu,
    UniformInCluster,
}

/// Draws sentences of `lang` from μ restricted to `cluster`.
struct ClusterSampler {
    members: Vec<SentenceId>,
    index: WeightedIndex<f64>,
}

impl ClusterSampler {
    fn new(world: &World, lang: LangId, cluster: ClusterId, choice: TargetChoice) -> Self {
        let members: Vec<SentenceId> = world.members(lang, cluster).collect();
        let weights: Vec<f64> = match choice {
            TargetChoice::ConditionalMu => members.iter().map(|&x| world.mu(lang)[x]).collect(),
            TargetChoice::UniformInCluster => vec![1.0; members.len()],
        };
        let index = WeightedIndex::new(&weights)
            .or_else(|_| WeightedIndex::new(vec![1.0; members.len()]))
            .expect("nonempty cluster");
        Self { members, index }
    }
}

pub fn sample_parallel(
    world: &World,
    source: LangId,
    target: LangId,
    n: usize,
    seed: u64,
) -> Result<Vec<(SentenceId, SentenceId)>> {
    sample_parallel_with(world, source, target, n, seed, TargetChoice::default())
}

pub fn sample_parallel_with(
    world: &World,
    source: LangId,
    target: LangId,
    n: usize,
    seed: u64,
    choice: TargetChoice,
) -> Result<Vec<(SentenceId, SentenceId)>> {
    if source == target || source >= world.k || target >= world.k {
        return Err(Error::InvalidArgument(format!("invalid language pair ({source}, {target})")));
    }
    let source_index = WeightedIndex::new(world.mu(source)).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let oracle = world.oracle(source, target);
    let samplers: Vec<ClusterSampler> =
        (0..world.m).map(|c| ClusterSampler::new(world, target, oracle.map_cluster(c), choice)).collect();
    let mut rng = stream_rng(seed, 0);
    Ok((0..n)
        .map(|_| {
            let x = source_index.sample(&mut rng);
            let sampler = &samplers[world.cluster_of(source, x)];
            (x, sampler.members[sampler.index.sample(&mut rng)])
        })
        .collect())
}

pub fn sample_monolingual(world: &World, lang: LangId, n: usize, seed: u64) -> Result<Vec<SentenceId>> {
    if lang >= world.k {
        return Err(Error::InvalidArgument(format!("no language {lang}")));
    }
    let index = WeightedIndex::new(world.mu(lang)).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut rng = stream_rng(seed, 1);
    Ok((0..n).map(|_| index.sample(&mut rng)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CorpusSpec {
    /// Supervised pairs drawn independently for every ordered direction.
    pub parallel_per_direction: usize,
    pub monolingual_per_language: usize,
    pub target_choice: TargetChoice,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        Self { parallel_per_direction: 200, monolingual_per_language: 2000, target_choice: TargetChoice::ConditionalMu }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Corpus {
    /// Keyed by ordered `(source, target)`.
    pub parallel: BTreeMap<(LangId, LangId), Vec<(SentenceId, SentenceId)>>,
    pub monolingual: BTreeMap<LangId, Vec<SentenceId>>,
}

pub fn sample_corpus(world: &World, spec: &CorpusSpec, seed: u64) -> Result<Corpus> {
    let mut corpus = Corpus::default();
    for i in 0..world.k {
        for j in 0..world.k {
            if i != j {
                let s = derive_seed(seed, (1000 + i * world.k + j) as u64);
                corpus.parallel.insert(
                    (i, j),
                    sample_parallel_with(world, i, j, spec.parallel_per_direction, s, spec.target_choice)?,
                );
            }
        }
        let s = derive_seed(seed, (5000 + i) as u64);
        corpus.monolingual.insert(i, sample_monolingual(world, i, spec.monolingual_per_language, s)?);
    }
    Ok(corpus)
}

impl Corpus {
    pub fn parallel(&self, source: LangId, target: LangId) -> &[(SentenceId, SentenceId)] {
        self.parallel.get(&(source, target)).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn monolingual(&self, lang: LangId) -> &[SentenceId] {
        self.monolingual.get(&lang).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Checks that every supervised pair is cluster-correct in `world`.
    pub fn check_against(&self, world: &World) -> Result<()> {
        for (&(i, j), pairs) in &self.parallel {
            if let Some(&(x, y)) = pairs.iter().find(|&&(x, y)| !world.is_correct(i, j, x, y)) {
                return Err(Error::InvalidArgument(format!("pair ({x}, {y}) in {i}->{j} is not cluster-correct")));
            }
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("dualsim-corpus v1\n");
        for (&(i, j), pairs) in &self.parallel {
            for (x, y) in pairs {
                let _ = writeln!(out, "parallel {i} {j} {x} {y}");
            }
        }
        for (lang, xs) in &self.monolingual {
            for x in xs {
                let _ = writeln!(out, "mono {lang} {x}");
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Corpus> {
        let mut lines = text.lines().enumerate();
        expect_header(lines.next(), "dualsim-corpus v1")?;
        let mut corpus = Corpus::default();
        for (line_no, line) in lines {
            if line.is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(' ').collect();
            match (f.first().copied(), f.len()) {
                (Some("parallel"), 5) => {
                    let key = (parse_field(f[1], line_no)?, parse_field(f[2], line_no)?);
                    let pair = (parse_field(f[3], line_no)?, parse_field(f[4], line_no)?);
                    corpus.parallel.entry(key).or_default().push(pair);
                }
                (Some("mono"), 3) => {
                    let lang = parse_field(f[1], line_no)?;
                    corpus.monolingual.entry(lang).or_default().push(parse_field(f[2], line_no)?);
                }
                _ => return Err(Error::Parse { line: line_no + 1, msg: format!("unexpected record `{line}`") }),
            }
        }
        Ok(corpus)
    }
}
