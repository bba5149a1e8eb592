//! Ground-truth machines for the closed-form accuracy predictions.
//!
//! The generative event tree is: draw a joint correctness cell, decide whether
//! the vanilla loop closes (probability 1, `delta` or 0 depending on the
//! cell), and redistribute the mass of unclosed loops with the policy. The
//! enumerators sum that tree exactly; [`monte_carlo`] samples it. Neither
//! path touches [`crate::theory`].

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::EstimatorCounts;
use crate::outcome_model::{
    bit, build_dual_joint, build_triple_joint, lambda_feasible_range, DualOutcomeParams, RedistributionPolicy,
    TripleJointTable, TripleOutcomeParams,
};
use crate::par::{self, Execution};
use crate::rng::{stream_rng, SimRng};

/// Which two-or-fewer-correct cycle cells may still close the loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReconstructionRule {
    /// `delta` for the cells with at most one correct hop, 0 for the cells
    /// with exactly two. A single wrong hop next to correct ones cannot land
    /// back in the source cluster.
    #[default]
    SingleWrongHopFails,
    /// `delta` for every cell with at most two correct hops.
    Blanket,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GenerativeSpec {
    Dual {
        params: DualOutcomeParams,
        policy: RedistributionPolicy,
    },
    Triple {
        params: TripleOutcomeParams,
        policy: RedistributionPolicy,
        #[serde(default)]
        rule: ReconstructionRule,
    },
}

impl GenerativeSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            GenerativeSpec::Dual { params, policy } => {
                params.validate()?;
                policy.validate()
            }
            GenerativeSpec::Triple { params, policy, .. } => {
                params.validate()?;
                policy.validate()
            }
        }
    }

    fn policy(&self) -> &RedistributionPolicy {
        match self {
            GenerativeSpec::Dual { policy, .. } | GenerativeSpec::Triple { policy, .. } => policy,
        }
    }

    /// Flattened event tree: one branch per joint cell, carrying its mass,
    /// its loop-closing probability and whether the forward hop is correct.
    fn branches(&self) -> Result<Vec<Branch>> {
        self.validate()?;
        match self {
            GenerativeSpec::Dual { params, .. } => {
                let table = build_dual_joint(params)?;
                let mut out = Vec::with_capacity(4);
                for y12 in 0..2 {
                    for y21 in 0..2 {
                        let closes = match (y12, y21) {
                            (1, 1) => 1.0,
                            (0, 0) => params.delta,
                            _ => 0.0,
                        };
                        out.push(Branch { mass: table.cell(y12, y21), closes, forward_correct: y12 == 1 });
                    }
                }
                Ok(out)
            }
            GenerativeSpec::Triple { params, rule, .. } => {
                let table = build_triple_joint(params)?;
                Ok((0..8)
                    .map(|index| {
                        let ones = (0..3).filter(|axis| bit(index, *axis) == 1).count();
                        let closes = match (ones, rule) {
                            (3, _) => 1.0,
                            (2, ReconstructionRule::SingleWrongHopFails) => 0.0,
                            _ => params.delta,
                        };
                        Branch { mass: table.cells[index], closes, forward_correct: bit(index, 0) == 1 }
                    })
                    .collect())
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Branch {
    mass: f64,
    closes: f64,
    forward_correct: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OracleResult {
    pub accuracy: f64,
    /// Masses of Case 1.1, Case 1.2 and Case 2.
    pub case_masses: [f64; 3],
    /// Binomial standard error; 0 for exact enumeration.
    pub stderr: f64,
    /// 0 for exact enumeration.
    pub n_samples: u64,
}

fn enumerate_branches(branches: &[Branch], policy: &RedistributionPolicy) -> OracleResult {
    let mut case = [0.0; 3];
    let mut accuracy = 0.0;
    for b in branches {
        let closed = b.mass * b.closes;
        let open = b.mass * (1.0 - b.closes);
        if b.forward_correct {
            case[0] += closed;
            accuracy += closed;
        } else {
            case[1] += closed;
        }
        case[2] += open;
        accuracy += policy.alpha * open;
    }
    OracleResult { accuracy, case_masses: case, stderr: 0.0, n_samples: 0 }
}

pub fn enumerate_dual(spec: &GenerativeSpec) -> Result<OracleResult> {
    match spec {
        GenerativeSpec::Dual { policy, .. } => Ok(enumerate_branches(&spec.branches()?, policy)),
        GenerativeSpec::Triple { .. } => Err(Error::InvalidArgument("enumerate_dual needs a dual spec".into())),
    }
}

pub fn enumerate_triple(spec: &GenerativeSpec) -> Result<OracleResult> {
    match spec {
        GenerativeSpec::Triple { policy, .. } => Ok(enumerate_branches(&spec.branches()?, policy)),
        GenerativeSpec::Dual { .. } => Err(Error::InvalidArgument("enumerate_triple needs a triple spec".into())),
    }
}

pub fn enumerate(spec: &GenerativeSpec) -> Result<OracleResult> {
    Ok(enumerate_branches(&spec.branches()?, spec.policy()))
}

/// Samples per Monte Carlo batch; batch `b` draws from stream `b` of the seed.
pub const MC_BATCH: u64 = 8192;

/// Outcome of one sampled sentence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OutcomeSample {
    pub vanilla_closed: bool,
    pub vanilla_forward_correct: bool,
    pub trained_forward_correct: bool,
    pub trained_closed: bool,
}

fn draw(branches: &[Branch], policy: &RedistributionPolicy, rng: &mut SimRng) -> OutcomeSample {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut chosen = branches.len() - 1;
    for (i, b) in branches.iter().enumerate() {
        acc += b.mass;
        if u < acc {
            chosen = i;
            break;
        }
    }
    // Skip zero-mass tail cells that rounding could otherwise select.
    while branches[chosen].mass <= 0.0 && chosen > 0 {
        chosen -= 1;
    }
    let b = branches[chosen];
    let closed = match b.closes {
        c if c >= 1.0 => true,
        c if c <= 0.0 => false,
        c => rng.random::<f64>() < c,
    };
    if closed {
        // A loop that closed before training still closes after,
        // with the same forward verdict.
        return OutcomeSample {
            vanilla_closed: true,
            vanilla_forward_correct: b.forward_correct,
            trained_forward_correct: b.forward_correct,
            trained_closed: true,
        };
    }
    let v: f64 = rng.random();
    let (trained_forward_correct, trained_closed) = if v < policy.alpha {
        (true, true)
    } else if v < policy.alpha + policy.beta {
        (false, true)
    } else {
        (false, false)
    };
    OutcomeSample {
        vanilla_closed: false,
        vanilla_forward_correct: b.forward_correct,
        trained_forward_correct,
        trained_closed,
    }
}

/// Integer tallies of a Monte Carlo run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct SimulationCounts {
    pub n: u64,
    pub case11: u64,
    pub case12: u64,
    pub case2: u64,
    pub trained_correct: u64,
    pub estimator: EstimatorCounts,
}

impl SimulationCounts {
    fn record(&mut self, s: OutcomeSample) {
        self.n += 1;
        match (s.vanilla_closed, s.vanilla_forward_correct) {
            (true, true) => self.case11 += 1,
            (true, false) => self.case12 += 1,
            (false, _) => self.case2 += 1,
        }
        if s.trained_forward_correct && s.trained_closed {
            self.trained_correct += 1;
        }
        self.estimator.record(s.vanilla_closed, s.trained_forward_correct, s.trained_closed);
    }

    fn merge(mut self, other: &SimulationCounts) -> Self {
        self.n += other.n;
        self.case11 += other.case11;
        self.case12 += other.case12;
        self.case2 += other.case2;
        self.trained_correct += other.trained_correct;
        self.estimator = self.estimator.merge(&other.estimator);
        self
    }

    pub fn to_result(&self) -> OracleResult {
        let n = self.n as f64;
        let p = self.trained_correct as f64 / n;
        OracleResult {
            accuracy: p,
            case_masses: [self.case11 as f64 / n, self.case12 as f64 / n, self.case2 as f64 / n],
            stderr: (p * (1.0 - p) / n).sqrt(),
            n_samples: self.n,
        }
    }
}

/// Samples `n` event-tree outcomes. Counts depend only on `(spec, n, seed)`.
pub fn simulate_counts(spec: &GenerativeSpec, n: u64, seed: u64, exec: Execution) -> Result<SimulationCounts> {
    if n == 0 {
        return Err(Error::InvalidArgument("Monte Carlo sample count must be at least 1".into()));
    }
    let branches = spec.branches()?;
    let policy = *spec.policy();
    let batches = n.div_ceil(MC_BATCH);
    let partial = par::map_range(exec, batches as usize, |b| {
        let b = b as u64;
        let size = MC_BATCH.min(n - b * MC_BATCH);
        let mut rng = stream_rng(seed, b);
        let mut counts = SimulationCounts::default();
        for _ in 0..size {
            counts.record(draw(&branches, &policy, &mut rng));
        }
        counts
    });
    Ok(partial.iter().fold(SimulationCounts::default(), |acc, c| acc.merge(c)))
}

pub fn monte_carlo(spec: &GenerativeSpec, n: u64, seed: u64) -> Result<OracleResult> {
    monte_carlo_with(spec, n, seed, Execution::default())
}

pub fn monte_carlo_with(spec: &GenerativeSpec, n: u64, seed: u64, exec: Execution) -> Result<OracleResult> {
    Ok(simulate_counts(spec, n, seed, exec)?.to_result())
}

/// One displayed formula checked against the consistent computation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrataRecord {
    pub name: String,
    pub displayed_value: f64,
    pub consistent_value: f64,
    pub abs_difference: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrataReport {
    pub params: TripleOutcomeParams,
    pub records: Vec<ErrataRecord>,
}

impl ErrataReport {
    pub fn record(&self, name: &str) -> Option<&ErrataRecord> {
        self.records.iter().find(|r| r.name == name)
    }

    pub fn mismatches(&self, tol: f64) -> impl Iterator<Item = &ErrataRecord> {
        self.records.iter().filter(move |r| r.abs_difference > tol)
    }

    /// One tab-separated record per formula, header first.
    pub fn to_text(&self) -> String {
        let mut out = String::from("formula\tdisplayed_value\tconsistent_value\tabs_difference\n");
        for r in &self.records {
            out.push_str(&format!("{}\t{}\t{}\t{:e}\n", r.name, r.displayed_value, r.consistent_value, r.abs_difference));
        }
        out
    }
}

/// Compares the published cell and case formulas for the cycle
/// against [`build_triple_joint`] and [`enumerate_triple`].
pub fn errata_report(params: &TripleOutcomeParams) -> Result<ErrataReport> {
    let table = build_triple_joint(params)?;
    let TripleOutcomeParams { q12, q23, q31, lambda1: l1, lambda2: l2, delta } = *params;
    let cell = |z: (usize, usize, usize)| table.cells[TripleJointTable::index(z.0, z.1, z.2)];

    let spec = GenerativeSpec::Triple {
        params: *params,
        policy: RedistributionPolicy { alpha: 0.0, beta: 0.0, gamma: 1.0 },
        rule: ReconstructionRule::SingleWrongHopFails,
    };
    let enumerated = enumerate_triple(&spec)?;

    let displayed = [
        ("cell(1,0,0)", q12 * (1.0 - q23) * (1.0 - q31) + l2, cell((1, 0, 0))),
        ("cell(0,1,0)", (1.0 - q12) * q23 * (1.0 - q31) - 2.0 * l1 + l2, cell((0, 1, 0))),
        ("cell(0,0,1)", (1.0 - q12) * (1.0 - q23) * q31 - 2.0 * l1 + l2, cell((0, 0, 1))),
        ("cell(0,0,0)", (1.0 - q12) * (1.0 - q23) * (1.0 - q31) + 3.0 * l1 - l2, cell((0, 0, 0))),
        (
            "case_1.1",
            q12 * q23 * q31 + l2 + delta * (q12 * (1.0 - q23) * (1.0 - q31) + l2),
            enumerated.case_masses[0],
        ),
        ("case_1.2", delta * (1.0 - q12) * (1.0 - q23 * q31 - l1 + l2), enumerated.case_masses[1]),
    ];
    let records = displayed
        .into_iter()
        .map(|(name, displayed_value, consistent_value)| ErrataRecord {
            name: name.to_string(),
            displayed_value,
            consistent_value,
            abs_difference: (displayed_value - consistent_value).abs(),
        })
        .collect();
    Ok(ErrataReport { params: *params, records })
}

/// Uniform random policy on the probability simplex.
pub fn random_policy(rng: &mut impl Rng) -> RedistributionPolicy {
    let (a, b): (f64, f64) = (rng.random(), rng.random());
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    let alpha = lo;
    let beta = hi - lo;
    RedistributionPolicy { alpha, beta, gamma: 1.0 - alpha - beta }
}

/// Random feasible dual parameters: uniform marginals and `delta`, `lambda`
/// uniform over its tight feasible range.
pub fn random_dual_params(rng: &mut impl Rng) -> DualOutcomeParams {
    let p12: f64 = rng.random();
    let p21r: f64 = rng.random();
    let range = lambda_feasible_range(p12, p21r);
    let lambda = range.low + rng.random::<f64>() * range.width();
    DualOutcomeParams { p12, p21r, lambda, delta: rng.random() }
}

/// Random feasible cycle parameters. With `dependent` the two dependence
/// terms are drawn from small symmetric intervals and rejected until every
/// cell is nonnegative.
pub fn random_triple_params(rng: &mut impl Rng, dependent: bool) -> TripleOutcomeParams {
    loop {
        let mut p = TripleOutcomeParams {
            q12: rng.random(),
            q23: rng.random(),
            q31: rng.random(),
            lambda1: 0.0,
            lambda2: 0.0,
            delta: rng.random(),
        };
        if dependent {
            p.lambda1 = rng.random_range(-0.05..0.05);
            p.lambda2 = rng.random_range(-0.03..0.03);
        }
        if p.validate().is_ok() {
            return p;
        }
    }
}
