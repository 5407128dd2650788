//! Online regret and fairness accounting for a single run.
//!
//! Regret is measured against the policy-expected reward `Σ_t R_{g_t}^t`,
//! where `R_g^t` is the true mean under the within-group policy actually
//! played. With that choice the split into excess group pulls (`term1`) and
//! within-group policy loss (`term2`) holds exactly for every run, up to
//! floating-point rounding.

use serde::Serialize;

use crate::env::BanditInstance;
use crate::fairness::FairnessConfig;
use crate::oracle::OracleSummary;
use crate::policies::{LearnerState, StepDecision};

/// Log-spaced checkpoints: every `t` in `1..=10`, `round(10^(j/per_decade))`,
/// the extras, and the horizon itself, restricted to `1..=horizon`.
pub fn checkpoint_schedule(horizon: u64, per_decade: u32, extra: &[u64]) -> Vec<u64> {
    let mut out: Vec<u64> = (1..=10.min(horizon)).collect();
    if per_decade > 0 && horizon > 10 {
        let top = (horizon as f64).log10() * per_decade as f64;
        let mut j = per_decade as u64;
        while (j as f64) <= top + 1e-9 {
            let t = 10f64.powf(j as f64 / per_decade as f64).round() as u64;
            if t <= horizon {
                out.push(t);
            }
            j += 1;
        }
    }
    out.extend(extra.iter().copied().filter(|&t| t >= 1 && t <= horizon));
    if horizon >= 1 {
        out.push(horizon);
    }
    out.sort_unstable();
    out.dedup();
    out
}

/// State of the metrics at one checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Snapshot {
    pub t: u64,
    pub pseudo_regret: f64,
    pub realized_reward: f64,
    pub term1: f64,
    pub term2: f64,
    /// `fr_g / N_{g,t}`; absent for groups never pulled.
    pub fr_norm: Vec<Option<f64>>,
    /// Current `N_{g,t} − ⌊β_g t⌋`.
    pub gef_slack: Vec<i64>,
    pub group_pulls: Vec<u64>,
    pub arm_pulls: Vec<u64>,
}

#[derive(Debug, Clone)]
pub struct MetricsAccumulator {
    group_means: Vec<Vec<f64>>,
    t: u64,
    cum_reward_realized: f64,
    cum_expected_reward: f64,
    term2: f64,
    fr: Vec<f64>,
    min_gef_slack: Vec<i64>,
    checkpoints: Vec<u64>,
    next_checkpoint: usize,
    snapshots: Vec<Snapshot>,
}

impl MetricsAccumulator {
    pub fn new(inst: &BanditInstance, checkpoints: Vec<u64>) -> Self {
        let m = inst.groups.len();
        MetricsAccumulator {
            group_means: (0..m).map(|g| inst.group_means(g)).collect(),
            t: 0,
            cum_reward_realized: 0.0,
            cum_expected_reward: 0.0,
            term2: 0.0,
            fr: vec![0.0; m],
            min_gef_slack: vec![i64::MAX; m],
            checkpoints,
            next_checkpoint: 0,
            snapshots: Vec::new(),
        }
    }

    /// Folds in one round. `state` is the learner state after the update.
    pub fn record_step(
        &mut self,
        decision: &StepDecision,
        reward: f64,
        oracle: &OracleSummary,
        beta: &FairnessConfig,
        state: &LearnerState,
    ) {
        let g = decision.group;
        let means = &self.group_means[g];
        let pi_star = &oracle.pi_star[g];
        let mut expected = 0.0;
        let mut distance = 0.0;
        for ((&p, &mu), &p_star) in decision.policy.iter().zip(means).zip(pi_star) {
            expected += p * mu;
            distance += (p - p_star).abs();
        }
        self.t = state.t();
        self.cum_reward_realized += reward;
        self.cum_expected_reward += expected;
        self.term2 += oracle.r_star[g] - expected;
        self.fr[g] += distance;
        for (h, &n) in state.group_pulls().iter().enumerate() {
            let slack = beta.slack(h, n, self.t);
            if slack < self.min_gef_slack[h] {
                self.min_gef_slack[h] = slack;
            }
        }
        if self.checkpoints.get(self.next_checkpoint) == Some(&self.t) {
            self.snapshots.push(self.snapshot(oracle, beta, state));
            self.next_checkpoint += 1;
        }
    }

    fn snapshot(&self, oracle: &OracleSummary, beta: &FairnessConfig, state: &LearnerState) -> Snapshot {
        let group_pulls = state.group_pulls().to_vec();
        Snapshot {
            t: self.t,
            pseudo_regret: pseudo_regret(self, oracle, beta, self.t),
            realized_reward: self.cum_reward_realized,
            term1: term1(oracle, beta, self.t, &group_pulls),
            term2: self.term2,
            fr_norm: self
                .fr
                .iter()
                .zip(&group_pulls)
                .map(|(&fr, &n)| (n > 0).then(|| fr / n as f64))
                .collect(),
            gef_slack: group_pulls
                .iter()
                .enumerate()
                .map(|(g, &n)| beta.slack(g, n, self.t))
                .collect(),
            group_pulls,
            arm_pulls: state.pulls().to_vec(),
        }
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn cum_reward_realized(&self) -> f64 {
        self.cum_reward_realized
    }

    pub fn cum_expected_reward(&self) -> f64 {
        self.cum_expected_reward
    }

    pub fn term2(&self) -> f64 {
        self.term2
    }

    pub fn fairness_regret(&self) -> &[f64] {
        &self.fr
    }

    /// Running minimum of `N_{g,t} − ⌊β_g t⌋` over every recorded round.
    pub fn min_gef_slack(&self) -> &[i64] {
        &self.min_gef_slack
    }

    pub fn snapshots(&self) -> &[Snapshot] {
        &self.snapshots
    }

    pub fn into_snapshots(self) -> Vec<Snapshot> {
        self.snapshots
    }
}

/// `Σ_g (N_{g,T} − ⌊β_g T⌋)·Δ_g`.
pub fn term1(oracle: &OracleSummary, beta: &FairnessConfig, horizon: u64, group_pulls: &[u64]) -> f64 {
    group_pulls
        .iter()
        .enumerate()
        .map(|(g, &n)| (n as f64 - beta.floor(g, horizon) as f64) * oracle.gaps[g])
        .sum()
}

/// `R*_β(T)` minus the policy-expected reward collected so far.
pub fn pseudo_regret(
    acc: &MetricsAccumulator,
    oracle: &OracleSummary,
    beta: &FairnessConfig,
    horizon: u64,
) -> f64 {
    oracle.optimal_reward(beta, horizon) - acc.cum_expected_reward
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Decomposition {
    pub term1: f64,
    pub term2: f64,
    pub residual: f64,
}

pub fn decomposition_check(
    acc: &MetricsAccumulator,
    oracle: &OracleSummary,
    beta: &FairnessConfig,
    horizon: u64,
    group_pulls: &[u64],
) -> Decomposition {
    let t1 = term1(oracle, beta, horizon, group_pulls);
    let t2 = acc.term2;
    let regret = pseudo_regret(acc, oracle, beta, horizon);
    Decomposition {
        term1: t1,
        term2: t2,
        residual: regret - t1 - t2,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupReport {
    pub normalized_fr: Option<f64>,
    pub min_gef_slack: i64,
    pub group_pulls: u64,
    pub arm_pulls: Vec<u64>,
}

pub fn fairness_report(acc: &MetricsAccumulator, state: &LearnerState, inst: &BanditInstance) -> Vec<GroupReport> {
    inst.groups
        .groups()
        .iter()
        .enumerate()
        .map(|(g, arms)| {
            let n = state.group_pulls()[g];
            GroupReport {
                normalized_fr: (n > 0).then(|| acc.fr[g] / n as f64),
                min_gef_slack: acc.min_gef_slack[g],
                group_pulls: n,
                arm_pulls: arms.iter().map(|&i| state.pulls()[i]).collect(),
            }
        })
        .collect()
}
