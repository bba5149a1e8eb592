//! JSON-configured batch commands.
//!
//! Every verb reads an optional JSON config (unknown fields are rejected,
//! missing fields take defaults), applies the command-line overrides, validates
//! everything, and only then runs. Exit codes: 0 success, 1 verification
//! failure, 2 invalid input.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::Error;
use crate::learner::{self, TrainConfig, TranslatorSet};
use crate::metrics;
use crate::oracle::{self, GenerativeSpec};
use crate::outcome_model::{build_dual_joint, build_triple_joint, DualOutcomeParams, RedistributionPolicy, TripleOutcomeParams};
use crate::par::{self, Execution};
use crate::rng::derive_seed;
use crate::synth_lang::{generate_world, sample_corpus, CorpusSpec};
use crate::theory;
use crate::verify;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Model(#[from] Error),
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// How a successful invocation ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    VerificationFailed,
}

impl Outcome {
    pub fn exit_code(self) -> i32 {
        match self {
            Outcome::Success => 0,
            Outcome::VerificationFailed => 1,
        }
    }
}

pub const EXIT_INVALID_INPUT: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "dualsim", version, about = "Dual and multi-step dual learning: theory, oracles and tabular simulations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate the closed-form accuracy predictions.
    Theory(RunArgs),
    /// Compare closed forms with exact enumeration over random draws.
    Verify(RunArgs),
    /// Monte Carlo estimates from the generative outcome models.
    Simulate(RunArgs),
    /// Train vanilla, dual and multi-step translators on synthetic worlds.
    Train(RunArgs),
    /// Re-summarise the accuracy CSV of an earlier train run.
    Report(RunArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// JSON config file; defaults are used when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides the config's seed (or seed list for `train`).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory for CSV artifacts.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overrides the verification tolerance.
    #[arg(long)]
    pub tolerance: Option<f64>,
    /// Overrides the number of random draws or samples.
    #[arg(long)]
    pub draws: Option<u64>,
}

pub fn run(cli: Cli) -> CliResult<Outcome> {
    match cli.command {
        Command::Theory(args) => cmd_theory(&args),
        Command::Verify(args) => cmd_verify(&args),
        Command::Simulate(args) => cmd_simulate(&args),
        Command::Train(args) => cmd_train(&args),
        Command::Report(args) => cmd_report(&args),
    }
}

fn load_config<T: DeserializeOwned + Default>(path: Option<&Path>) -> CliResult<T> {
    let Some(path) = path else { return Ok(T::default()) };
    let text = fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn ensure_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|source| CliError::Io { path: dir.to_path_buf(), source })
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

fn csv_writer(path: &Path) -> CliResult<csv::Writer<fs::File>> {
    let file = fs::File::create(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
    Ok(csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(file))
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> CliResult<()> {
    let mut w = csv_writer(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

/// Hex SHA-256 of the config's canonical JSON form.
pub fn config_hash<T: Serialize>(config: &T) -> String {
    let json = serde_json::to_string(config).expect("config serialises");
    Sha256::digest(json.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

// ---------------------------------------------------------------- theory

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DualTheoryBlock {
    pub params: DualOutcomeParams,
    pub policy: RedistributionPolicy,
    /// `gamma` for the proportional-policy prediction.
    pub proportional_gamma: f64,
    /// Extra `delta` values to tabulate with the same policy.
    pub delta_sweep: Vec<f64>,
}

impl Default for DualTheoryBlock {
    fn default() -> Self {
        Self {
            params: DualOutcomeParams { p12: 0.6, p21r: 0.6, lambda: 0.0, delta: 0.1 },
            policy: RedistributionPolicy { alpha: 0.30, beta: 0.28, gamma: 0.42 },
            proportional_gamma: 0.42,
            delta_sweep: vec![0.0, 0.05, 0.1, 0.2, 0.3, 0.5],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TripleTheoryBlock {
    pub params: TripleOutcomeParams,
    pub policy: RedistributionPolicy,
}

impl Default for TripleTheoryBlock {
    fn default() -> Self {
        Self {
            params: TripleOutcomeParams { q12: 0.6, q23: 0.7, q31: 0.7, lambda1: 0.0, lambda2: 0.0, delta: 0.1 },
            policy: RedistributionPolicy { alpha: 0.30, beta: 0.28, gamma: 0.42 },
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TheoryConfig {
    pub dual: DualTheoryBlock,
    pub triple: TripleTheoryBlock,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DualTheoryRow {
    pub delta: f64,
    pub p12: f64,
    pub p21r: f64,
    pub lambda: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub p_case11: f64,
    pub p_case12: f64,
    pub p_case2: f64,
    pub p_d12: f64,
    pub improvement: f64,
    pub condition_holds: bool,
}

pub fn theory_rows(block: &DualTheoryBlock) -> crate::Result<Vec<DualTheoryRow>> {
    let mut deltas = vec![block.params.delta];
    deltas.extend(block.delta_sweep.iter().copied().filter(|d| *d != block.params.delta));
    deltas
        .into_iter()
        .map(|delta| {
            let params = DualOutcomeParams { delta, ..block.params };
            let p = theory::dual_accuracy(&params, &block.policy)?;
            Ok(DualTheoryRow {
                delta,
                p12: params.p12,
                p21r: params.p21r,
                lambda: params.lambda,
                alpha: block.policy.alpha,
                beta: block.policy.beta,
                gamma: block.policy.gamma,
                p_case11: p.p_case11,
                p_case12: p.p_case12,
                p_case2: p.p_case2,
                p_d12: p.p_d12,
                improvement: p.improvement,
                condition_holds: theory::dual_improvement_condition(params.p21r, delta),
            })
        })
        .collect()
}

pub fn cmd_theory(args: &RunArgs) -> CliResult<Outcome> {
    let config: TheoryConfig = load_config(args.config.as_deref())?;
    build_dual_joint(&config.dual.params)?;
    config.dual.policy.validate()?;
    build_triple_joint(&config.triple.params)?;
    config.triple.policy.validate()?;
    for &d in &config.dual.delta_sweep {
        crate::error::check_prob("delta", d)?;
    }

    let rows = theory_rows(&config.dual)?;
    let d = &config.dual.params;
    println!("dual: p12={} p21r={} lambda={} delta={}", d.p12, d.p21r, d.lambda, d.delta);
    let range = crate::outcome_model::lambda_feasible_range(d.p12, d.p21r);
    println!("  feasible lambda range: [{}, {}]", range.low, range.high);
    println!("  policy: alpha={} beta={} gamma={}", config.dual.policy.alpha, config.dual.policy.beta, config.dual.policy.gamma);
    println!("  delta\tp_d12\timprovement\tcondition");
    for r in &rows {
        println!("  {}\t{:.6}\t{:+.6}\t{}", r.delta, r.p_d12, r.improvement, r.condition_holds);
    }
    let g = config.dual.proportional_gamma;
    let prop = theory::proportional_policy(d, g)?;
    println!(
        "  proportional policy (gamma={g}): alpha={:.6} beta={:.6} accuracy={:.6}",
        prop.alpha,
        prop.beta,
        theory::proportional_accuracy(d, g)?
    );

    let t = &config.triple.params;
    let tp = theory::multistep_accuracy(t, &config.triple.policy)?;
    println!(
        "cycle: q12={} q23={} q31={} lambda1={} lambda2={} delta={}",
        t.q12, t.q23, t.q31, t.lambda1, t.lambda2, t.delta
    );
    println!("  case masses: {:.6} {:.6} {:.6}", tp.p_case11, tp.p_case12, tp.p_case2);
    println!("  q_m12={:.6} gamma_cap={:.6}", tp.q_m12, tp.gamma_cap_prime);
    match tp.m_factor {
        Some(m) => println!(
            "  M={m:.6} (M < 1: {}), simplified accuracy={:.6}",
            theory::multistep_condition(t.q23, t.q31, t.delta),
            theory::simplified_multistep_accuracy(t.q12, m, tp.gamma_cap_prime)?
        ),
        None => println!("  M undefined"),
    }

    if let Some(out) = &args.out {
        ensure_dir(out)?;
        write_csv(&out.join("theory.csv"), &rows)?;
    }
    Ok(Outcome::Success)
}

// ---------------------------------------------------------------- verify

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyConfig {
    pub draws: u64,
    pub tolerance: f64,
    pub seed: u64,
    /// Also sweep the cycle form with nonzero dependence terms.
    pub dependent: bool,
    /// Also sweep the displayed cycle form with dependence terms, which is
    /// expected to fail.
    pub display_dependent: bool,
    /// Parameters for the errata comparison of the displayed cycle formulas.
    pub errata_params: TripleOutcomeParams,
    /// Number of Monte Carlo specs to check (0 skips the check).
    pub monte_carlo_specs: usize,
    pub monte_carlo_samples: u64,
    pub grid_size: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            draws: 1000,
            tolerance: 1e-12,
            seed: 0,
            dependent: true,
            display_dependent: false,
            errata_params: TripleOutcomeParams { q12: 0.5, q23: 0.5, q31: 0.5, lambda1: 0.05, lambda2: 0.0, delta: 0.1 },
            monte_carlo_specs: 0,
            monte_carlo_samples: 100_000,
            grid_size: 100,
        }
    }
}

pub fn cmd_verify(args: &RunArgs) -> CliResult<Outcome> {
    let mut config: VerifyConfig = load_config(args.config.as_deref())?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(tol) = args.tolerance {
        config.tolerance = tol;
    }
    if let Some(draws) = args.draws {
        config.draws = draws;
    }
    if !(config.tolerance.is_finite() && config.tolerance >= 0.0) {
        return Err(CliError::Config(format!("tolerance must be a nonnegative number, got {}", config.tolerance)));
    }
    if config.draws == 0 {
        return Err(CliError::Config("draws must be >= 1".into()));
    }
    config.errata_params.validate()?;

    let exec = Execution::default();
    let n = config.draws as usize;
    let mut sweeps = vec![
        verify::dual_sweep(n, config.seed, exec)?,
        verify::proportional_sweep(n, config.seed, exec)?,
        verify::triple_sweep(n, config.seed, false, exec)?,
        verify::triple_display_sweep(n, config.seed, false, exec)?,
    ];
    if config.dependent {
        sweeps.push(verify::triple_sweep(n, config.seed, true, exec)?);
    }
    if config.display_dependent {
        sweeps.push(verify::triple_display_sweep(n, config.seed, true, exec)?);
    }
    let mut failed = false;
    for s in &sweeps {
        let ok = s.passes(config.tolerance);
        failed |= !ok;
        println!("{} {}: draws={} max_abs_diff={:e}", if ok { "PASS" } else { "FAIL" }, s.name, s.draws, s.max_abs_diff);
        if !ok {
            println!("  worst draw {}: {}", s.worst_draw, s.worst_case);
        }
    }

    let mut grids = Vec::new();
    if config.grid_size > 0 {
        grids.push(verify::dual_condition_grid(config.grid_size, 0.5)?);
        grids.push(verify::multistep_condition_grid(config.grid_size)?);
    }
    for g in &grids {
        let ok = g.disagreements == 0;
        failed |= !ok;
        println!(
            "{} {}: points={} boundary_skipped={} disagreements={}",
            if ok { "PASS" } else { "FAIL" },
            g.name,
            g.points,
            g.boundary_skipped,
            g.disagreements
        );
    }

    if config.monte_carlo_specs > 0 {
        let checks = verify::monte_carlo_checks(config.monte_carlo_specs, config.monte_carlo_samples, config.seed, exec)?;
        let excursions = checks.iter().filter(|c| c.z > 4.0).count();
        let ok = excursions <= 1;
        failed |= !ok;
        println!(
            "{} monte_carlo: checks={} excursions_beyond_4_stderr={excursions}",
            if ok { "PASS" } else { "FAIL" },
            checks.len()
        );
    }

    let errata = oracle::errata_report(&config.errata_params)?;
    println!("errata report for the displayed cycle formulas:");
    print!("{}", errata.to_text());

    if let Some(out) = &args.out {
        ensure_dir(out)?;
        write_csv(&out.join("verify.csv"), &sweeps)?;
        write_text(&out.join("errata.tsv"), &errata.to_text())?;
    }
    Ok(if failed { Outcome::VerificationFailed } else { Outcome::Success })
}

// ---------------------------------------------------------------- simulate

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateConfig {
    pub spec: GenerativeSpec,
    pub samples: u64,
    pub seed: u64,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            spec: GenerativeSpec::Dual {
                params: DualOutcomeParams { p12: 0.6, p21r: 0.6, lambda: 0.0, delta: 0.1 },
                policy: RedistributionPolicy { alpha: 0.30, beta: 0.28, gamma: 0.42 },
            },
            samples: 1_000_000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulateRow {
    pub quantity: &'static str,
    pub exact: f64,
    pub estimate: f64,
    pub stderr: f64,
}

pub fn cmd_simulate(args: &RunArgs) -> CliResult<Outcome> {
    let mut config: SimulateConfig = load_config(args.config.as_deref())?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(draws) = args.draws {
        config.samples = draws;
    }
    config.spec.validate()?;
    if config.samples == 0 {
        return Err(CliError::Config("samples must be >= 1".into()));
    }
    let exact = oracle::enumerate(&config.spec)?;
    let counts = oracle::simulate_counts(&config.spec, config.samples, config.seed, Execution::default())?;
    let mc = counts.to_result();
    let n = config.samples as f64;
    let se = |p: f64| (p * (1.0 - p) / n).sqrt();
    let mut rows = vec![SimulateRow { quantity: "accuracy", exact: exact.accuracy, estimate: mc.accuracy, stderr: se(exact.accuracy) }];
    for (i, name) in ["case_1_1", "case_1_2", "case_2"].into_iter().enumerate() {
        rows.push(SimulateRow {
            quantity: name,
            exact: exact.case_masses[i],
            estimate: mc.case_masses[i],
            stderr: se(exact.case_masses[i]),
        });
    }
    let est = counts.estimator.report();
    let policy = match &config.spec {
        GenerativeSpec::Dual { policy, .. } | GenerativeSpec::Triple { policy, .. } => *policy,
    };
    for (name, configured, estimate) in [
        ("alpha_hat", policy.alpha, est.alpha_hat),
        ("beta_hat", policy.beta, est.beta_hat),
        ("gamma_hat", policy.gamma, est.gamma_hat),
    ] {
        let failed_n = est.counts.vanilla_failed as f64;
        rows.push(SimulateRow {
            quantity: name,
            exact: configured,
            estimate: estimate.unwrap_or(f64::NAN),
            stderr: if failed_n > 0.0 { (configured * (1.0 - configured) / failed_n).sqrt() } else { f64::NAN },
        });
    }
    println!("quantity\texact\testimate\tstderr");
    for r in &rows {
        println!("{}\t{:.6}\t{:.6}\t{:.6}", r.quantity, r.exact, r.estimate, r.stderr);
    }
    if let Some(out) = &args.out {
        ensure_dir(out)?;
        write_csv(&out.join("simulate.csv"), &rows)?;
    }
    Ok(Outcome::Success)
}

// ---------------------------------------------------------------- train

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WorldSpec {
    pub languages: usize,
    pub clusters: usize,
    pub sentences_per_cluster: usize,
    pub skew: f64,
}

impl Default for WorldSpec {
    fn default() -> Self {
        Self { languages: 3, clusters: 50, sentences_per_cluster: 4, skew: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub world: WorldSpec,
    pub corpus: CorpusSpec,
    pub pretrain: TrainConfig,
    pub dual: TrainConfig,
    pub multistep: TrainConfig,
    /// Run the multi-step phase (needs at least 3 languages).
    pub run_multistep: bool,
    pub seeds: Vec<u64>,
    /// Flag runs whose estimated retention of vanilla reconstructions falls
    /// below this value.
    pub eta_warning_threshold: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            world: WorldSpec::default(),
            corpus: CorpusSpec::default(),
            pretrain: TrainConfig { steps: 2000, ..TrainConfig::default() },
            dual: TrainConfig { steps: 4000, ..TrainConfig::default() },
            multistep: TrainConfig { steps: 4000, ..TrainConfig::default() },
            run_multistep: true,
            seeds: vec![0, 1, 2, 3, 4],
            eta_warning_threshold: 0.8,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> CliResult<()> {
        if self.seeds.is_empty() {
            return Err(CliError::Config("seeds must not be empty".into()));
        }
        if self.world.languages < 2 {
            return Err(CliError::Config("world needs at least 2 languages".into()));
        }
        if self.run_multistep && self.world.languages < 3 {
            return Err(CliError::Config(format!(
                "multi-step phase requested with {} languages; it needs a pivot language and degenerates to dual learning without one",
                self.world.languages
            )));
        }
        for (name, c) in [("pretrain", &self.pretrain), ("dual", &self.dual), ("multistep", &self.multistep)] {
            c.validate().map_err(|e| CliError::Config(format!("{name}: {e}")))?;
        }
        // Validates the world and corpus blocks without training.
        let w = &self.world;
        let world = generate_world(w.languages, w.clusters, w.sentences_per_cluster, w.skew, 0)?;
        if self.corpus.parallel_per_direction == 0 || self.corpus.monolingual_per_language == 0 {
            return Err(CliError::Config("corpus sizes must be >= 1".into()));
        }
        world.check_invariants()?;
        Ok(())
    }
}

pub const PHASES: [&str; 3] = ["vanilla", "dual", "multistep"];

fn phase_rank(phase: &str) -> usize {
    PHASES.iter().position(|p| *p == phase).unwrap_or(PHASES.len())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyRow {
    pub seed: u64,
    pub phase: String,
    pub source: usize,
    pub target: usize,
    pub decoding: String,
    pub p_hat: f64,
    pub p_expected: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimatorRow {
    pub seed: u64,
    pub phase: String,
    pub source: usize,
    pub target: usize,
    pub alpha_hat: Option<f64>,
    pub beta_hat: Option<f64>,
    pub gamma_hat: Option<f64>,
    pub eta_hat: Option<f64>,
    pub eta_raw: Option<f64>,
    pub vanilla_failed: u64,
    pub vanilla_reconstructed: u64,
    pub eta_below_threshold: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub source: usize,
    pub target: usize,
    pub phase: String,
    pub runs: usize,
    pub mean_p_hat: f64,
    pub mean_p_expected: f64,
    /// Mean greedy accuracy minus that of the previous phase.
    pub improvement_over_previous: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub accuracy: Vec<AccuracyRow>,
    pub estimators: Vec<EstimatorRow>,
    pub summary: Vec<SummaryRow>,
}

impl ExperimentOutput {
    /// Mean greedy accuracy of `source -> target` in `phase`.
    pub fn mean_p_hat(&self, phase: &str, source: usize, target: usize) -> Option<f64> {
        self.summary.iter().find(|r| r.phase == phase && r.source == source && r.target == target).map(|r| r.mean_p_hat)
    }
}

fn accuracy_rows(seed: u64, phase: &str, set: &TranslatorSet, world: &crate::synth_lang::World) -> Vec<AccuracyRow> {
    learner::evaluate(set, world)
        .into_iter()
        .map(|r| AccuracyRow {
            seed,
            phase: phase.to_string(),
            source: r.source,
            target: r.target,
            decoding: r.decoding.to_string(),
            p_hat: r.p_hat,
            p_expected: r.p_expected,
        })
        .collect()
}

fn run_seed(config: &ExperimentConfig, seed: u64) -> crate::Result<(Vec<AccuracyRow>, Vec<EstimatorRow>)> {
    let w = &config.world;
    let world = generate_world(w.languages, w.clusters, w.sentences_per_cluster, w.skew, seed)?;
    let corpus = sample_corpus(&world, &config.corpus, derive_seed(seed, 1))?;
    let with_seed = |c: &TrainConfig, label: u64| TrainConfig { seed: derive_seed(derive_seed(seed, label), c.seed), ..*c };

    let mut vanilla = TranslatorSet::uniform(&world);
    vanilla.train_vanilla(&corpus, &with_seed(&config.pretrain, 2))?;
    let mut rows = accuracy_rows(seed, "vanilla", &vanilla, &world);

    let dual_cfg = with_seed(&config.dual, 3);
    let mut dual = vanilla.clone();
    for a in 0..world.k {
        for b in a + 1..world.k {
            dual.train_dual_pair(a, b, &corpus, &dual_cfg)?;
        }
    }
    rows.extend(accuracy_rows(seed, "dual", &dual, &world));

    let eval: Vec<usize> = (0..world.n_sentences()).collect();
    let estimator_row = |phase: &str, trained: &TranslatorSet| -> crate::Result<EstimatorRow> {
        let r = metrics::estimators((vanilla.get(0, 1), vanilla.get(1, 0)), (trained.get(0, 1), trained.get(1, 0)), &eval, &world)?;
        Ok(EstimatorRow {
            seed,
            phase: phase.to_string(),
            source: 0,
            target: 1,
            alpha_hat: r.alpha_hat,
            beta_hat: r.beta_hat,
            gamma_hat: r.gamma_hat,
            eta_hat: r.eta_hat,
            eta_raw: r.eta_raw,
            vanilla_failed: r.counts.vanilla_failed,
            vanilla_reconstructed: r.counts.vanilla_reconstructed,
            eta_below_threshold: r.eta_hat.is_some_and(|e| e < config.eta_warning_threshold),
        })
    };
    let mut estimators = vec![estimator_row("dual", &dual)?];

    if config.run_multistep {
        let mut multi = dual.clone();
        learner::multistep_dual_learning(&mut multi, 0, 1, &corpus, &with_seed(&config.multistep, 4))?;
        rows.extend(accuracy_rows(seed, "multistep", &multi, &world));
        estimators.push(estimator_row("multistep", &multi)?);
    }
    Ok((rows, estimators))
}

pub fn summarize(rows: &[AccuracyRow]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<(usize, usize, usize), (String, Vec<&AccuracyRow>)> = BTreeMap::new();
    for r in rows {
        groups
            .entry((r.source, r.target, phase_rank(&r.phase)))
            .or_insert_with(|| (r.phase.clone(), Vec::new()))
            .1
            .push(r);
    }
    let mut out: Vec<SummaryRow> = Vec::new();
    for ((source, target, _), (phase, members)) in groups {
        let runs = members.len();
        let mean_p_hat = members.iter().map(|r| r.p_hat).sum::<f64>() / runs as f64;
        let mean_p_expected = members.iter().map(|r| r.p_expected).sum::<f64>() / runs as f64;
        let improvement_over_previous = out
            .last()
            .filter(|prev| prev.source == source && prev.target == target)
            .map(|prev| mean_p_hat - prev.mean_p_hat);
        out.push(SummaryRow { source, target, phase, runs, mean_p_hat, mean_p_expected, improvement_over_previous });
    }
    out
}

/// Runs every seed of the experiment and collects sorted rows.
pub fn run_experiment(config: &ExperimentConfig, exec: Execution) -> CliResult<ExperimentOutput> {
    config.validate()?;
    let results = par::map_slice(exec, &config.seeds, |&seed| run_seed(config, seed));
    let mut accuracy = Vec::new();
    let mut estimators = Vec::new();
    for r in results {
        let (a, e) = r?;
        accuracy.extend(a);
        estimators.extend(e);
    }
    accuracy.sort_by_key(|r| (r.seed, phase_rank(&r.phase), r.source, r.target));
    estimators.sort_by_key(|r| (r.seed, phase_rank(&r.phase), r.source, r.target));
    let summary = summarize(&accuracy);
    Ok(ExperimentOutput { accuracy, estimators, summary })
}

fn print_summary(summary: &[SummaryRow]) {
    println!("source\ttarget\tphase\truns\tmean_p_hat\tmean_p_expected\timprovement");
    for r in summary {
        let imp = r.improvement_over_previous.map(|v| format!("{v:+.4}")).unwrap_or_default();
        println!("{}\t{}\t{}\t{}\t{:.4}\t{:.4}\t{}", r.source, r.target, r.phase, r.runs, r.mean_p_hat, r.mean_p_expected, imp);
    }
}

const DEFAULT_OUT: &str = "dualsim-out";

pub fn cmd_train(args: &RunArgs) -> CliResult<Outcome> {
    let mut config: ExperimentConfig = load_config(args.config.as_deref())?;
    if let Some(seed) = args.seed {
        config.seeds = vec![seed];
    }
    config.validate()?;
    let out = args.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    ensure_dir(&out)?;
    let result = run_experiment(&config, Execution::default())?;

    write_csv(&out.join("accuracy.csv"), &result.accuracy)?;
    write_csv(&out.join("estimators.csv"), &result.estimators)?;
    write_csv(&out.join("summary.csv"), &result.summary)?;
    let manifest = serde_json::json!({ "config": config, "config_sha256": config_hash(&config) });
    write_text(&out.join("run.json"), &format!("{}\n", serde_json::to_string_pretty(&manifest).expect("json")))?;

    println!("config sha256 {}", config_hash(&config));
    print_summary(&result.summary);
    for e in result.estimators.iter().filter(|e| e.eta_below_threshold) {
        println!("note: seed {} phase {} has eta_hat {:?} below {}", e.seed, e.phase, e.eta_hat, config.eta_warning_threshold);
    }
    Ok(Outcome::Success)
}

// ---------------------------------------------------------------- report

pub fn read_accuracy_csv(path: &Path) -> CliResult<Vec<AccuracyRow>> {
    let file = fs::File::open(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
    let mut reader = csv::Reader::from_reader(file);
    let rows = reader.deserialize().collect::<Result<Vec<AccuracyRow>, _>>()?;
    Ok(rows)
}

pub fn cmd_report(args: &RunArgs) -> CliResult<Outcome> {
    let out = args.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    let rows = read_accuracy_csv(&out.join("accuracy.csv"))?;
    if rows.is_empty() {
        return Err(CliError::Config(format!("{} has no rows", out.join("accuracy.csv").display())));
    }
    print_summary(&summarize(&rows));
    Ok(Outcome::Success)
}
