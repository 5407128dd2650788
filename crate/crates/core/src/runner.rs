//! Multi-run, multi-algorithm experiments.
//!
//! Run `r` of algorithm `a` draws rewards from stream `(seed, r, a, Reward)`
//! and policy randomness from `(seed, r, a, Policy)`. Instances are drawn from
//! `(seed, r, 0, Instance)` when regenerated per run, else from run 0, so every
//! algorithm faces the same instance in a given run.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::confreg::OptimizerConfig;
use crate::env::{generate_instance, sample_reward, validate_instance, BanditInstance, EnvError, GeneratorSpec};
use crate::fairness::FairnessConfig;
use crate::merit::MeritSpec;
use crate::metrics::{checkpoint_schedule, decomposition_check, fairness_report, GroupReport, MetricsAccumulator, Snapshot};
use crate::oracle::{bound_breakdown, estimate_l1, BoundParameters, OracleSummary, L1_SAMPLES};
use crate::policies::{Algorithm, Learner, LearnerState, PolicyContext, PolicyError};
use crate::rng::{Purpose, RngStream, StreamId};

/// Environment variable read for the default worker count.
pub const WORKERS_ENV: &str = "BIFAIR_WORKERS";

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error("config: {0}")]
    Config(String),
    #[error("worker pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum InstanceSource {
    Fixed(BanditInstance),
    Generated {
        spec: GeneratorSpec,
        regenerate_per_run: bool,
    },
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub horizon: u64,
    pub runs: u64,
    pub seed: u64,
    pub checkpoints_per_decade: u32,
    pub extra_checkpoints: Vec<u64>,
    pub algorithms: Vec<Algorithm>,
    pub instance: InstanceSource,
    pub beta: FairnessConfig,
    pub merit: MeritSpec,
    pub delta: f64,
    pub optimizer: OptimizerConfig,
    /// Report rewards relative to UCB1 on the same runs.
    pub normalize: bool,
}

impl RunConfig {
    pub fn group_sizes(&self) -> Vec<usize> {
        match &self.instance {
            InstanceSource::Fixed(inst) => inst.groups.groups().iter().map(Vec::len).collect(),
            InstanceSource::Generated { spec, .. } => spec.sizes.clone(),
        }
    }

    pub fn t_init(&self) -> u64 {
        let sizes = self.group_sizes();
        (sizes.len() * sizes.iter().copied().max().unwrap_or(0)) as u64
    }

    pub fn validate(&self) -> Result<(), RunError> {
        let cfg = |s: String| Err(RunError::Config(s));
        match &self.instance {
            InstanceSource::Fixed(inst) => {
                let report = validate_instance(inst);
                if !report.is_ok() {
                    return Err(EnvError::Invalid(report).into());
                }
            }
            InstanceSource::Generated { spec, .. } => spec.check()?,
        }
        let m = self.group_sizes().len();
        if self.beta.len() != m {
            return cfg(format!("{} β shares for {m} groups", self.beta.len()));
        }
        if self.runs < 1 {
            return cfg("runs must be >= 1".into());
        }
        if self.horizon < self.t_init() {
            return cfg(format!(
                "horizon {} is shorter than the initialization phase ({})",
                self.horizon,
                self.t_init()
            ));
        }
        if self.algorithms.is_empty() {
            return cfg("no algorithms selected".into());
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return cfg(format!("delta = {} must lie in (0, 1)", self.delta));
        }
        Ok(())
    }

    /// The instance played in run `run`.
    pub fn instance_for_run(&self, run: u64) -> Result<BanditInstance, RunError> {
        match &self.instance {
            InstanceSource::Fixed(inst) => Ok(inst.clone()),
            InstanceSource::Generated {
                spec,
                regenerate_per_run,
            } => {
                let r = if *regenerate_per_run { run } else { 0 };
                let mut rng = RngStream::new(self.seed, StreamId::new(r, 0, Purpose::Instance));
                Ok(generate_instance(spec, &mut rng)?)
            }
        }
    }

    pub fn checkpoints(&self) -> Vec<u64> {
        checkpoint_schedule(self.horizon, self.checkpoints_per_decade, &self.extra_checkpoints)
    }

    /// Algorithms actually executed: the requested ones plus UCB1 when
    /// normalization needs it.
    pub fn executed_algorithms(&self) -> Vec<Algorithm> {
        let mut algs = self.algorithms.clone();
        if self.normalize && !algs.contains(&Algorithm::Ucb1) {
            algs.push(Algorithm::Ucb1);
        }
        algs
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub pseudo_regret: f64,
    pub realized_reward: f64,
    pub expected_reward: f64,
    pub term1: f64,
    pub term2: f64,
    pub residual: f64,
    pub groups: Vec<GroupReport>,
    pub g_star: usize,
    pub g_star_unique: bool,
    /// Diagnostic bound at the realized group pulls; `bf_ucb` only.
    pub bound: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunResult {
    pub algorithm: Algorithm,
    pub run: u64,
    pub instance: BanditInstance,
    pub snapshots: Vec<Snapshot>,
    pub summary: RunSummary,
}

/// One simulation: select, sample, update, record, for `horizon` rounds.
pub fn run_once(config: &RunConfig, algorithm: Algorithm, run: u64) -> Result<RunResult, RunError> {
    let inst = config.instance_for_run(run)?;
    let oracle = OracleSummary::build(&inst, &config.merit);
    let ctx = PolicyContext {
        partition: &inst.groups,
        beta: &config.beta,
        merit: &config.merit,
        delta: config.delta,
        optimizer: config.optimizer,
    };
    let mut learner = Learner::new(algorithm, ctx);
    let mut state = LearnerState::new(&inst.groups);
    let mut acc = MetricsAccumulator::new(&inst, config.checkpoints());
    let mut reward_rng = RngStream::new(config.seed, StreamId::new(run, algorithm.tag(), Purpose::Reward));
    let mut policy_rng = RngStream::new(config.seed, StreamId::new(run, algorithm.tag(), Purpose::Policy));

    for _ in 0..config.horizon {
        let decision = learner.select(&state, &mut policy_rng)?;
        let reward = sample_reward(&inst, decision.arm, &mut reward_rng)?;
        state.update(decision, reward);
        acc.record_step(decision, reward, &oracle, &config.beta, &state);
    }

    let horizon = config.horizon;
    let dec = decomposition_check(&acc, &oracle, &config.beta, horizon, state.group_pulls());
    let bound = if algorithm == Algorithm::BfUcb {
        let mut rng = RngStream::new(config.seed, StreamId::new(run, 0, Purpose::Estimate));
        let l1 = estimate_l1(&config.merit, &inst, L1_SAMPLES, &mut rng);
        let params = BoundParameters::new(&oracle, &inst, &config.merit, &config.beta, config.delta, l1);
        bound_breakdown(&params, state.group_pulls(), horizon)
            .ok()
            .and_then(|b| b.total().ok())
    } else {
        None
    };
    let summary = RunSummary {
        pseudo_regret: oracle.optimal_reward(&config.beta, horizon) - acc.cum_expected_reward(),
        realized_reward: acc.cum_reward_realized(),
        expected_reward: acc.cum_expected_reward(),
        term1: dec.term1,
        term2: dec.term2,
        residual: dec.residual,
        groups: fairness_report(&acc, &state, &inst),
        g_star: oracle.g_star,
        g_star_unique: oracle.g_star_unique,
        bound,
    };
    Ok(RunResult {
        algorithm,
        run,
        instance: inst,
        snapshots: acc.into_snapshots(),
        summary,
    })
}

/// Mean and sample standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

impl Stat {
    /// Sums in sorted order so the result does not depend on input order.
    pub fn of(values: &[f64]) -> Stat {
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let n = v.len();
        if n == 0 {
            return Stat {
                mean: f64::NAN,
                std: f64::NAN,
            };
        }
        let mean = v.iter().sum::<f64>() / n as f64;
        if n == 1 {
            return Stat { mean, std: 0.0 };
        }
        let mut dev: Vec<f64> = v.iter().map(|x| (x - mean) * (x - mean)).collect();
        dev.sort_by(f64::total_cmp);
        let var = dev.iter().sum::<f64>() / (n - 1) as f64;
        Stat {
            mean,
            std: var.sqrt(),
        }
    }

    pub fn std_err(&self, n: usize) -> f64 {
        self.std / (n as f64).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesPoint {
    pub metric: &'static str,
    /// Group index, or `group:arm` for per-arm metrics.
    pub group: Option<String>,
    pub t: u64,
    pub stat: Stat,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupAggregate {
    #[serde(rename = "N_g_T")]
    pub group_pulls: Stat,
    /// Worst running-minimum slack over all runs.
    pub min_gef_slack: i64,
    pub normalized_fr: Option<Stat>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FinalAggregate {
    pub pseudo_regret: Stat,
    pub realized_reward: Stat,
    pub normalized_reward: Option<Stat>,
    pub term1: Stat,
    pub term2: Stat,
    pub residual_max: f64,
    pub groups: Vec<GroupAggregate>,
    /// Pull counts of each arm of the smallest group.
    pub smallest_group_arm_pulls: Vec<Stat>,
    pub bound: Option<Stat>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlgorithmAggregate {
    pub algorithm: Algorithm,
    pub runs: Vec<RunResult>,
    pub series: Vec<SeriesPoint>,
    pub summary: FinalAggregate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateResult {
    pub algorithms: Vec<AlgorithmAggregate>,
}

impl AggregateResult {
    pub fn get(&self, algorithm: Algorithm) -> Option<&AlgorithmAggregate> {
        self.algorithms.iter().find(|a| a.algorithm == algorithm)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    /// Worker count; `None` reads [`WORKERS_ENV`], then rayon's default.
    Parallel(Option<usize>),
}

pub fn run_experiment(config: &RunConfig) -> Result<AggregateResult, RunError> {
    run_experiment_with(config, Execution::Parallel(None))
}

pub fn run_experiment_with(config: &RunConfig, exec: Execution) -> Result<AggregateResult, RunError> {
    config.validate()?;
    let executed = config.executed_algorithms();
    let jobs: Vec<(Algorithm, u64)> = executed
        .iter()
        .flat_map(|&a| (0..config.runs).map(move |r| (a, r)))
        .collect();
    let results: Vec<RunResult> = match exec {
        Execution::Sequential => jobs
            .iter()
            .map(|&(a, r)| run_once(config, a, r))
            .collect::<Result<_, _>>()?,
        Execution::Parallel(workers) => {
            let workers = workers.or_else(|| {
                std::env::var(WORKERS_ENV)
                    .ok()
                    .and_then(|v| v.parse().ok())
            });
            let mut builder = rayon::ThreadPoolBuilder::new();
            if let Some(w) = workers {
                builder = builder.num_threads(w);
            }
            let pool = builder.build().map_err(|e| RunError::Pool(e.to_string()))?;
            pool.install(|| {
                jobs.par_iter()
                    .map(|&(a, r)| run_once(config, a, r))
                    .collect::<Result<Vec<_>, _>>()
            })?
        }
    };
    Ok(aggregate(config, results))
}

/// Groups run results by algorithm (in the config's order) and summarizes.
/// `results` must hold every (algorithm, run) of the executed set.
pub fn aggregate(config: &RunConfig, mut results: Vec<RunResult>) -> AggregateResult {
    results.sort_by_key(|r| (r.algorithm, r.run));
    let baseline: Option<Vec<f64>> = config.normalize.then(|| {
        results
            .iter()
            .filter(|r| r.algorithm == Algorithm::Ucb1)
            .map(|r| r.summary.realized_reward)
            .collect()
    });
    let algorithms = config
        .algorithms
        .iter()
        .map(|&a| {
            let runs: Vec<RunResult> = results.iter().filter(|r| r.algorithm == a).cloned().collect();
            let series = aggregate_series(&runs);
            let summary = summarize(&runs, baseline.as_deref());
            AlgorithmAggregate {
                algorithm: a,
                runs,
                series,
                summary,
            }
        })
        .collect();
    AggregateResult { algorithms }
}

fn aggregate_series(runs: &[RunResult]) -> Vec<SeriesPoint> {
    let Some(first) = runs.first() else {
        return Vec::new();
    };
    let mut out = Vec::new();
    for (c, snap) in first.snapshots.iter().enumerate() {
        let t = snap.t;
        let at = |f: &dyn Fn(&Snapshot) -> f64| -> Stat {
            let v: Vec<f64> = runs.iter().map(|r| f(&r.snapshots[c])).collect();
            Stat::of(&v)
        };
        let mut push = |metric: &'static str, group: Option<String>, stat: Stat| {
            out.push(SeriesPoint {
                metric,
                group,
                t,
                stat,
            })
        };
        push("pseudo_regret", None, at(&|s| s.pseudo_regret));
        push("realized_reward", None, at(&|s| s.realized_reward));
        push("term1", None, at(&|s| s.term1));
        push("term2", None, at(&|s| s.term2));
        for g in 0..snap.group_pulls.len() {
            let fr: Vec<f64> = runs
                .iter()
                .filter_map(|r| r.snapshots[c].fr_norm[g])
                .collect();
            if fr.len() == runs.len() {
                push("fr_norm", Some(g.to_string()), Stat::of(&fr));
            }
            push("gef_slack", Some(g.to_string()), at(&|s| s.gef_slack[g] as f64));
            push("group_pulls", Some(g.to_string()), at(&|s| s.group_pulls[g] as f64));
        }
    }
    out
}

fn summarize(runs: &[RunResult], baseline: Option<&[f64]>) -> FinalAggregate {
    let col = |f: &dyn Fn(&RunSummary) -> f64| -> Stat {
        Stat::of(&runs.iter().map(|r| f(&r.summary)).collect::<Vec<_>>())
    };
    let m = runs.first().map_or(0, |r| r.summary.groups.len());
    let groups = (0..m)
        .map(|g| {
            let fr: Vec<f64> = runs
                .iter()
                .filter_map(|r| r.summary.groups[g].normalized_fr)
                .collect();
            GroupAggregate {
                group_pulls: col(&|s| s.groups[g].group_pulls as f64),
                min_gef_slack: runs
                    .iter()
                    .map(|r| r.summary.groups[g].min_gef_slack)
                    .min()
                    .unwrap_or(0),
                normalized_fr: (fr.len() == runs.len()).then(|| Stat::of(&fr)),
            }
        })
        .collect();
    let smallest = runs.first().and_then(|r| {
        r.summary
            .groups
            .iter()
            .enumerate()
            .min_by_key(|(g, rep)| (rep.arm_pulls.len(), *g))
            .map(|(g, _)| g)
    });
    let smallest_group_arm_pulls = smallest
        .map(|g| {
            let k = runs[0].summary.groups[g].arm_pulls.len();
            (0..k)
                .map(|i| col(&|s| s.groups[g].arm_pulls[i] as f64))
                .collect()
        })
        .unwrap_or_default();
    let normalized_reward = baseline.filter(|b| b.len() == runs.len()).map(|b| {
        let ratios: Vec<f64> = runs
            .iter()
            .map(|r| r.summary.realized_reward / b[r.run as usize])
            .collect();
        Stat::of(&ratios)
    });
    let bounds: Vec<f64> = runs.iter().filter_map(|r| r.summary.bound).collect();
    FinalAggregate {
        pseudo_regret: col(&|s| s.pseudo_regret),
        realized_reward: col(&|s| s.realized_reward),
        normalized_reward,
        term1: col(&|s| s.term1),
        term2: col(&|s| s.term2),
        residual_max: runs
            .iter()
            .map(|r| r.summary.residual.abs())
            .fold(0.0, f64::max),
        groups,
        smallest_group_arm_pulls,
        bound: (!bounds.is_empty() && bounds.len() == runs.len()).then(|| Stat::of(&bounds)),
    }
}
