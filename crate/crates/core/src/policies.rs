//! Decision rules: the bi-level fair UCB learner and the three baselines.
//!
//! Every algorithm shares the same initialization phase: groups are visited
//! round-robin for `max_size` rounds, and the visited group pulls one of its
//! still-unpulled arms. Once a group has no unpulled arm left it falls back to
//! its algorithm's within-group rule (merit exposure for `bf_ucb` and
//! `mf_ucb`, the in-group UCB1 index for `ucb1` and `gef_ucb`).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::confreg::{optimistic_into, ConfRegError, ConfidenceRegion, OptimisticEstimate, OptimizerConfig};
use crate::env::GroupPartition;
use crate::fairness::FairnessConfig;
use crate::merit::MeritSpec;
use crate::rng::RngStream;

pub const DEFAULT_DELTA: f64 = 0.01;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolicyError {
    #[error("internal: {0}")]
    Region(#[from] ConfRegError),
    #[error("unknown algorithm {0:?} (expected bf_ucb, ucb1, mf_ucb or gef_ucb)")]
    UnknownAlgorithm(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    BfUcb,
    Ucb1,
    MfUcb,
    GefUcb,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [
        Algorithm::BfUcb,
        Algorithm::Ucb1,
        Algorithm::MfUcb,
        Algorithm::GefUcb,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::BfUcb => "bf_ucb",
            Algorithm::Ucb1 => "ucb1",
            Algorithm::MfUcb => "mf_ucb",
            Algorithm::GefUcb => "gef_ucb",
        }
    }

    /// Stream tag; never 0, which is reserved for per-run shared streams.
    pub fn tag(self) -> u64 {
        match self {
            Algorithm::BfUcb => 1,
            Algorithm::Ucb1 => 2,
            Algorithm::MfUcb => 3,
            Algorithm::GefUcb => 4,
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = PolicyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s.trim())
            .ok_or_else(|| PolicyError::UnknownAlgorithm(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    /// Round `round` of the round-robin, about to visit group `cursor`.
    Init { round: usize, cursor: usize },
    Main,
}

/// Pull counts and reward sums: everything a policy looks at.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnerState {
    t: u64,
    pulls: Vec<u64>,
    sums: Vec<f64>,
    group_pulls: Vec<u64>,
    phase: Phase,
    t_init: u64,
}

impl LearnerState {
    pub fn new(partition: &GroupPartition) -> Self {
        let m = partition.len();
        let t_init = (m * partition.max_size()) as u64;
        LearnerState {
            t: 0,
            pulls: vec![0; partition.arm_count()],
            sums: vec![0.0; partition.arm_count()],
            group_pulls: vec![0; m],
            phase: if t_init == 0 {
                Phase::Main
            } else {
                Phase::Init { round: 0, cursor: 0 }
            },
            t_init,
        }
    }

    /// Rounds completed so far.
    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn pulls(&self) -> &[u64] {
        &self.pulls
    }

    pub fn sums(&self) -> &[f64] {
        &self.sums
    }

    pub fn group_pulls(&self) -> &[u64] {
        &self.group_pulls
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn t_init(&self) -> u64 {
        self.t_init
    }

    /// Records one pull and advances the phase.
    pub fn update(&mut self, decision: &StepDecision, reward: f64) {
        self.t += 1;
        self.pulls[decision.arm] += 1;
        self.sums[decision.arm] += reward;
        self.group_pulls[decision.group] += 1;
        if let Phase::Init { .. } = self.phase {
            let m = self.group_pulls.len();
            self.phase = if self.t >= self.t_init {
                Phase::Main
            } else {
                let pos = self.t as usize;
                Phase::Init {
                    round: pos / m,
                    cursor: pos % m,
                }
            };
        }
    }

    /// Checks the counting invariants against a partition.
    pub fn is_consistent(&self, partition: &GroupPartition) -> bool {
        let total: u64 = self.pulls.iter().sum();
        let group_total: u64 = self.group_pulls.iter().sum();
        let per_group = partition
            .groups()
            .iter()
            .zip(&self.group_pulls)
            .all(|(arms, &n)| arms.iter().map(|&i| self.pulls[i]).sum::<u64>() == n);
        let covered = self.phase != Phase::Main || self.t < self.t_init
            || self.pulls.iter().all(|&n| n >= 1);
        total == self.t && group_total == self.t && per_group && covered
    }
}

/// One round's choice.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepDecision {
    pub group: usize,
    /// Global arm index.
    pub arm: usize,
    /// Position of `arm` inside its group.
    pub local: usize,
    /// Within-group distribution the arm was drawn from, in group order.
    pub policy: Vec<f64>,
    pub ufg_triggered: bool,
}

impl StepDecision {
    fn point_mass(&mut self, group: usize, arm: usize, local: usize, size: usize) {
        self.group = group;
        self.arm = arm;
        self.local = local;
        self.policy.clear();
        self.policy.resize(size, 0.0);
        self.policy[local] = 1.0;
    }
}

/// Everything fixed for the length of a run.
#[derive(Debug, Clone, Copy)]
pub struct PolicyContext<'a> {
    pub partition: &'a GroupPartition,
    pub beta: &'a FairnessConfig,
    pub merit: &'a MeritSpec,
    pub delta: f64,
    pub optimizer: OptimizerConfig,
}

/// A policy with its scratch buffers. One per (algorithm, run).
#[derive(Debug, Clone)]
pub struct Learner<'a> {
    algorithm: Algorithm,
    ctx: PolicyContext<'a>,
    locate: Vec<(usize, usize)>,
    counts: Vec<u64>,
    sums: Vec<f64>,
    region: ConfidenceRegion,
    estimates: Vec<OptimisticEstimate>,
    decision: StepDecision,
}

impl<'a> Learner<'a> {
    /// The partition must already be validated.
    pub fn new(algorithm: Algorithm, ctx: PolicyContext<'a>) -> Self {
        let n = ctx.partition.arm_count();
        let locate = ctx
            .partition
            .locate_all(n)
            .into_iter()
            .map(|l| l.expect("validated partition covers every arm"))
            .collect();
        Learner {
            algorithm,
            ctx,
            locate,
            counts: Vec::with_capacity(n),
            sums: Vec::with_capacity(n),
            region: ConfidenceRegion::default(),
            estimates: vec![OptimisticEstimate::default(); ctx.partition.len().max(1)],
            decision: StepDecision::default(),
        }
    }

    pub fn algorithm(&self) -> Algorithm {
        self.algorithm
    }

    pub fn select(
        &mut self,
        state: &LearnerState,
        rng: &mut RngStream,
    ) -> Result<&StepDecision, PolicyError> {
        self.decision.ufg_triggered = false;
        if let Phase::Init { cursor, .. } = state.phase {
            let g = cursor;
            let arms = self.ctx.partition.group(g);
            if let Some(local) = arms.iter().position(|&i| state.pulls[i] == 0) {
                self.decision.point_mass(g, arms[local], local, arms.len());
            } else {
                match self.algorithm {
                    Algorithm::BfUcb | Algorithm::MfUcb => self.exposure(state, g, rng)?,
                    Algorithm::Ucb1 | Algorithm::GefUcb => self.group_ucb(state, g),
                }
            }
            return Ok(&self.decision);
        }
        match self.algorithm {
            Algorithm::BfUcb => {
                let g = self.choose_group(state)?;
                self.sample_from_estimate(g, rng);
            }
            Algorithm::GefUcb => {
                let g = self.choose_group(state)?;
                self.group_ucb(state, g);
            }
            Algorithm::Ucb1 => self.ucb1(state),
            Algorithm::MfUcb => self.merit_over_all(state, rng)?,
        }
        Ok(&self.decision)
    }

    /// Group stage shared by `bf_ucb` and `gef_ucb`. Leaves the chosen group's
    /// optimistic estimate in `self.estimates[g]`.
    fn choose_group(&mut self, state: &LearnerState) -> Result<usize, PolicyError> {
        if let Some(g) = self.ctx.beta.most_behind(&state.group_pulls, state.t) {
            self.decision.ufg_triggered = true;
            if self.algorithm == Algorithm::BfUcb {
                self.estimate_group(state, g)?;
            }
            Ok(g)
        } else {
            self.learn(state)
        }
    }

    /// Group with the largest optimistic value; lowest index on ties.
    fn learn(&mut self, state: &LearnerState) -> Result<usize, PolicyError> {
        let mut best = 0;
        let mut best_value = f64::NEG_INFINITY;
        for g in 0..self.ctx.partition.len() {
            self.estimate_group(state, g)?;
            let v = self.estimates[g].value;
            if v > best_value {
                best_value = v;
                best = g;
            }
        }
        Ok(best)
    }

    fn estimate_group(&mut self, state: &LearnerState, g: usize) -> Result<(), PolicyError> {
        let arms = self.ctx.partition.group(g);
        self.counts.clear();
        self.sums.clear();
        for &i in arms {
            self.counts.push(state.pulls[i]);
            self.sums.push(state.sums[i]);
        }
        self.region.rebuild(
            &self.counts,
            &self.sums,
            state.group_pulls[g],
            self.ctx.delta,
            self.ctx.merit,
        )?;
        optimistic_into(
            &self.region,
            self.ctx.merit,
            &self.ctx.optimizer,
            &mut self.estimates[g],
        );
        Ok(())
    }

    fn exposure(
        &mut self,
        state: &LearnerState,
        g: usize,
        rng: &mut RngStream,
    ) -> Result<(), PolicyError> {
        self.estimate_group(state, g)?;
        self.sample_from_estimate(g, rng);
        Ok(())
    }

    fn sample_from_estimate(&mut self, g: usize, rng: &mut RngStream) {
        let pi = &self.estimates[g].pi;
        let local = inverse_cdf(pi, rng.unit());
        self.decision.group = g;
        self.decision.arm = self.ctx.partition.group(g)[local];
        self.decision.local = local;
        self.decision.policy.clear();
        self.decision.policy.extend_from_slice(pi);
    }

    fn group_ucb(&mut self, state: &LearnerState, g: usize) {
        let arms = self.ctx.partition.group(g);
        let log_t = (state.t.max(1) as f64).ln();
        let mut best = 0;
        let mut best_index = f64::NEG_INFINITY;
        for (local, &i) in arms.iter().enumerate() {
            let idx = ucb_index(state.sums[i], state.pulls[i], log_t);
            if idx > best_index {
                best_index = idx;
                best = local;
            }
        }
        self.decision.point_mass(g, arms[best], best, arms.len());
    }

    fn ucb1(&mut self, state: &LearnerState) {
        let log_t = (state.t.max(1) as f64).ln();
        let mut best = 0;
        let mut best_index = f64::NEG_INFINITY;
        for i in 0..state.pulls.len() {
            let idx = ucb_index(state.sums[i], state.pulls[i], log_t);
            if idx > best_index {
                best_index = idx;
                best = i;
            }
        }
        let (g, local) = self.locate[best];
        self.decision
            .point_mass(g, best, local, self.ctx.partition.size(g));
    }

    /// Exposure over the single pseudo-group of all arms, with `N_g = t` and
    /// `k_g = n`. The recorded policy is the draw distribution conditioned on
    /// the sampled arm's true group.
    fn merit_over_all(&mut self, state: &LearnerState, rng: &mut RngStream) -> Result<(), PolicyError> {
        self.region.rebuild(
            &state.pulls,
            &state.sums,
            state.t,
            self.ctx.delta,
            self.ctx.merit,
        )?;
        let est = &mut self.estimates[0];
        optimistic_into(&self.region, self.ctx.merit, &self.ctx.optimizer, est);
        let arm = inverse_cdf(&est.pi, rng.unit());
        let (g, local) = self.locate[arm];
        let arms = self.ctx.partition.group(g);
        let mass: f64 = arms.iter().map(|&i| est.pi[i]).sum();
        self.decision.group = g;
        self.decision.arm = arm;
        self.decision.local = local;
        self.decision.policy.clear();
        self.decision
            .policy
            .extend(arms.iter().map(|&i| est.pi[i] / mass));
        Ok(())
    }
}

#[inline]
fn ucb_index(sum: f64, pulls: u64, log_t: f64) -> f64 {
    let n = pulls as f64;
    sum / n + (2.0 * log_t / n).sqrt()
}

/// Smallest index whose cumulative mass exceeds `u`.
#[inline]
fn inverse_cdf(pi: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, &p) in pi.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // rounding left u above the total; take the last arm with mass
    pi.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

/// One bi-level fair UCB step.
pub fn bf_select(
    ctx: PolicyContext<'_>,
    state: &LearnerState,
    rng: &mut RngStream,
) -> Result<StepDecision, PolicyError> {
    Learner::new(Algorithm::BfUcb, ctx).select(state, rng).cloned()
}

/// Merit exposure inside group `g`.
pub fn exposure_select(
    ctx: PolicyContext<'_>,
    state: &LearnerState,
    g: usize,
    rng: &mut RngStream,
) -> Result<StepDecision, PolicyError> {
    let mut l = Learner::new(Algorithm::BfUcb, ctx);
    l.exposure(state, g, rng)?;
    Ok(l.decision)
}

/// Group with the largest optimistic group value.
pub fn learn_select(ctx: PolicyContext<'_>, state: &LearnerState) -> Result<usize, PolicyError> {
    Learner::new(Algorithm::BfUcb, ctx).learn(state)
}

pub fn ucb1_select(ctx: PolicyContext<'_>, state: &LearnerState) -> StepDecision {
    let mut l = Learner::new(Algorithm::Ucb1, ctx);
    l.ucb1(state);
    l.decision
}

pub fn mf_select(
    ctx: PolicyContext<'_>,
    state: &LearnerState,
    rng: &mut RngStream,
) -> Result<StepDecision, PolicyError> {
    Learner::new(Algorithm::MfUcb, ctx).select(state, rng).cloned()
}

pub fn gef_select(
    ctx: PolicyContext<'_>,
    state: &LearnerState,
    rng: &mut RngStream,
) -> Result<StepDecision, PolicyError> {
    Learner::new(Algorithm::GefUcb, ctx).select(state, rng).cloned()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::merit::DEFAULT_MERIT_FLOOR;
    use crate::rng::{Purpose, StreamId};

    struct Fixture {
        partition: GroupPartition,
        beta: FairnessConfig,
        merit: MeritSpec,
    }

    impl Fixture {
        fn new(groups: Vec<Vec<usize>>, beta: &[&str]) -> Self {
            Fixture {
                partition: GroupPartition::new(groups),
                beta: FairnessConfig::parse(beta).unwrap(),
                merit: MeritSpec::identity(DEFAULT_MERIT_FLOOR).unwrap(),
            }
        }

        fn ctx(&self) -> PolicyContext<'_> {
            PolicyContext {
                partition: &self.partition,
                beta: &self.beta,
                merit: &self.merit,
                delta: DEFAULT_DELTA,
                optimizer: OptimizerConfig::default(),
            }
        }
    }

    fn rng(run: u64) -> RngStream {
        RngStream::new(1, StreamId::new(run, 1, Purpose::Policy))
    }

    /// State with explicit per-arm counts and sums, in the main phase.
    fn state_with(partition: &GroupPartition, pulls: &[u64], sums: &[f64]) -> LearnerState {
        let mut s = LearnerState::new(partition);
        s.pulls = pulls.to_vec();
        s.sums = sums.to_vec();
        s.group_pulls = partition
            .groups()
            .iter()
            .map(|g| g.iter().map(|&i| pulls[i]).sum())
            .collect();
        s.t = pulls.iter().sum();
        s.phase = Phase::Main;
        s
    }

    #[test]
    fn algorithm_names_roundtrip() {
        for a in Algorithm::ALL {
            assert_eq!(a.name().parse::<Algorithm>().unwrap(), a);
        }
        assert!("ucb2".parse::<Algorithm>().is_err());
    }

    #[test]
    fn init_schedule_unrolled() {
        // sizes (2,3): rounds visit g0,g1 three times; t_init = 6
        let fx = Fixture::new(vec![vec![0, 1], vec![2, 3, 4]], &["0.4", "0.4"]);
        let mut state = LearnerState::new(&fx.partition);
        assert_eq!(state.t_init(), 6);
        let mut learner = Learner::new(Algorithm::BfUcb, fx.ctx());
        let mut r = rng(0);
        let mut groups = Vec::new();
        let mut arms = Vec::new();
        for _ in 0..6 {
            assert!(matches!(state.phase(), Phase::Init { .. }));
            let d = learner.select(&state, &mut r).unwrap().clone();
            groups.push(d.group);
            arms.push(d.arm);
            state.update(&d, 1.0);
        }
        assert_eq!(groups, vec![0, 1, 0, 1, 0, 1]);
        // t = 1..4 pull unpulled arms in order; t = 5 is exposure in g0
        assert_eq!(&arms[..4], &[0, 2, 1, 3]);
        assert!(arms[4] == 0 || arms[4] == 1);
        assert_eq!(arms[5], 4);
        assert_eq!(state.phase(), Phase::Main);
        assert!(state.is_consistent(&fx.partition));
    }

    #[test]
    fn ufg_forces_behind_group() {
        let fx = Fixture::new(vec![vec![0], vec![1]], &["2/5", "2/5"]);
        // 10 completed rounds, N_g = (3, 7): deficits 4-3 = 1 and 4-7 < 0
        let s = state_with(&fx.partition, &[3, 7], &[1.0, 7.0]);
        let d = bf_select(fx.ctx(), &s, &mut rng(0)).unwrap();
        assert_eq!(d.group, 0);
        assert!(d.ufg_triggered);
        // N_g = (4, 6): both slacks <= 0
        let s = state_with(&fx.partition, &[4, 6], &[1.0, 6.0]);
        let d = bf_select(fx.ctx(), &s, &mut rng(0)).unwrap();
        assert!(!d.ufg_triggered);
    }

    #[test]
    fn ufg_example_slacks() {
        let fx = Fixture::new(vec![vec![0], vec![1]], &["2/5", "2/5"]);
        assert_eq!(fx.beta.most_behind(&[3, 5], 10), Some(0));
        assert_eq!(fx.beta.most_behind(&[4, 5], 10), None);
    }

    #[test]
    fn exposure_point_region_matches_merit_policy() {
        let fx = Fixture::new(vec![vec![0, 1]], &["0.5"]);
        let big = 1u64 << 50;
        let s = state_with(&fx.partition, &[big, big], &[0.6 * big as f64, 0.4 * big as f64]);
        let d = exposure_select(fx.ctx(), &s, 0, &mut rng(0)).unwrap();
        assert!((d.policy[0] - 0.6).abs() < 1e-6);
        assert!((d.policy[1] - 0.4).abs() < 1e-6);
    }

    #[test]
    fn exposure_symmetric_group_is_uniform() {
        let fx = Fixture::new(vec![vec![0, 1, 2, 3]], &["0.5"]);
        let s = state_with(&fx.partition, &[50; 4], &[30.0; 4]);
        let mut learner = Learner::new(Algorithm::BfUcb, fx.ctx());
        let mut r = rng(3);
        let draws = 100_000;
        let mut freq = [0u32; 4];
        for _ in 0..draws {
            learner.exposure(&s, 0, &mut r).unwrap();
            assert!(learner.decision.policy.iter().all(|&p| (p - 0.25).abs() < 1e-15));
            freq[learner.decision.local] += 1;
        }
        let sigma = (draws as f64 * 0.25 * 0.75).sqrt();
        for f in freq {
            assert!((f as f64 - draws as f64 / 4.0).abs() <= 3.0 * sigma, "{freq:?}");
        }
    }

    #[test]
    fn exposure_singleton() {
        let fx = Fixture::new(vec![vec![0], vec![1]], &["0.4", "0.4"]);
        let s = state_with(&fx.partition, &[3, 9], &[1.0, 2.0]);
        let d = exposure_select(fx.ctx(), &s, 1, &mut rng(0)).unwrap();
        assert_eq!(d.policy, vec![1.0]);
        assert_eq!(d.arm, 1);
    }

    #[test]
    fn learn_picks_higher_point_value_and_breaks_ties_low() {
        let fx = Fixture::new(vec![vec![0, 1], vec![2, 3]], &["0.1", "0.1"]);
        let big = 1u64 << 50;
        let b = big as f64;
        let s = state_with(
            &fx.partition,
            &[big; 4],
            &[0.8 * b, 0.2 * b, 0.6 * b, 0.6 * b],
        );
        assert_eq!(learn_select(fx.ctx(), &s).unwrap(), 0);
        let s = state_with(&fx.partition, &[big; 4], &[0.6 * b, 0.6 * b, 0.8 * b, 0.2 * b]);
        assert_eq!(learn_select(fx.ctx(), &s).unwrap(), 1);
        let s = state_with(&fx.partition, &[big; 4], &[0.7 * b; 4]);
        assert_eq!(learn_select(fx.ctx(), &s).unwrap(), 0);
    }

    #[test]
    fn under_pulled_group_is_optimistic() {
        let fx = Fixture::new(vec![vec![0, 1], vec![2, 3]], &["0.1", "0.1"]);
        let s = state_with(&fx.partition, &[4000, 4000, 5, 5], &[2400.0, 2400.0, 2.0, 2.0]);
        let mut l = Learner::new(Algorithm::BfUcb, fx.ctx());
        l.learn(&s).unwrap();
        let point = crate::confreg::group_value(&[0.4, 0.4], &fx.merit).unwrap();
        assert!(l.estimates[1].value >= point);
        assert_eq!(learn_select(fx.ctx(), &s).unwrap(), 1);
    }

    #[test]
    fn ucb1_examples() {
        let fx = Fixture::new(vec![vec![0, 1]], &["0.5"]);
        let s = state_with(&fx.partition, &[1, 2], &[0.5, 1.0]);
        assert_eq!(ucb1_select(fx.ctx(), &s).arm, 0);
        let big = 1u64 << 40;
        let s = state_with(&fx.partition, &[big, big], &[big as f64, 0.0]);
        assert_eq!(ucb1_select(fx.ctx(), &s).arm, 0);
        let s = state_with(&fx.partition, &[7, 7], &[3.0, 3.0]);
        let d = ucb1_select(fx.ctx(), &s);
        assert_eq!(d.arm, 0);
        assert_eq!(d.policy, vec![1.0, 0.0]);
    }

    #[test]
    fn mf_examples() {
        let fx = Fixture::new(vec![vec![0], vec![1]], &["0.4", "0.4"]);
        let big = 1u64 << 50;
        let s = state_with(&fx.partition, &[big, big], &[0.6 * big as f64, 0.4 * big as f64]);
        let mut l = Learner::new(Algorithm::MfUcb, fx.ctx());
        l.select(&s, &mut rng(0)).unwrap();
        assert!((l.estimates[0].pi[0] - 0.6).abs() < 1e-6);
        assert!((l.estimates[0].pi[1] - 0.4).abs() < 1e-6);

        let fx = Fixture::new(vec![vec![0, 1], vec![2]], &["0.4", "0.4"]);
        let s = state_with(&fx.partition, &[9; 3], &[4.0; 3]);
        let mut l = Learner::new(Algorithm::MfUcb, fx.ctx());
        let d = l.select(&s, &mut rng(1)).unwrap().clone();
        assert!(l.estimates[0].pi.iter().all(|&p| (p - 1.0 / 3.0).abs() < 1e-15));
        // reported policy is conditional on the true group
        let sum: f64 = d.policy.iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
        assert_eq!(d.policy.len(), fx.partition.size(d.group));
    }

    #[test]
    fn gef_examples() {
        let fx = Fixture::new(vec![vec![0, 1], vec![2, 3]], &["2/5", "2/5"]);
        // 10 pulls, group 1 has 3 < 4: forced; its best index arm is 3
        let s = state_with(&fx.partition, &[4, 3, 1, 2], &[3.0, 2.0, 0.0, 2.0]);
        let d = gef_select(fx.ctx(), &s, &mut rng(0)).unwrap();
        assert_eq!(d.group, 1);
        assert!(d.ufg_triggered);
        assert_eq!(d.arm, 3);
        // identical arms: lowest index
        let s = state_with(&fx.partition, &[3, 3, 2, 2], &[1.5, 1.5, 1.0, 1.0]);
        let d = gef_select(fx.ctx(), &s, &mut rng(0)).unwrap();
        assert!(d.local == 0);

        let fx = Fixture::new(vec![vec![0], vec![1]], &["0.1", "0.1"]);
        let s = state_with(&fx.partition, &[100, 100], &[90.0, 10.0]);
        let d = gef_select(fx.ctx(), &s, &mut rng(0)).unwrap();
        assert_eq!((d.group, d.arm), (0, 0));
    }

    #[test]
    fn update_counts() {
        let fx = Fixture::new(vec![vec![0, 1], vec![2]], &["0.4", "0.4"]);
        let mut s = LearnerState::new(&fx.partition);
        let d = StepDecision {
            group: 0,
            arm: 0,
            local: 0,
            policy: vec![1.0, 0.0],
            ufg_triggered: false,
        };
        s.update(&d, 1.0);
        assert_eq!((s.pulls()[0], s.sums()[0], s.t()), (1, 1.0, 1));

        let mut learner = Learner::new(Algorithm::BfUcb, fx.ctx());
        let mut r = rng(9);
        let mut s = LearnerState::new(&fx.partition);
        for step in 0..10_000u64 {
            let d = learner.select(&s, &mut r).unwrap().clone();
            let sum: f64 = d.policy.iter().sum();
            assert!((sum - 1.0).abs() < 1e-12);
            assert!(d.policy[d.local] > 0.0);
            assert_eq!(fx.partition.group(d.group)[d.local], d.arm);
            s.update(&d, if step % 3 == 0 { 1.0 } else { 0.0 });
            if s.t() == s.t_init() {
                assert_eq!(s.phase(), Phase::Main);
            } else if s.t() < s.t_init() {
                assert!(matches!(s.phase(), Phase::Init { .. }));
            }
            assert!(s.is_consistent(&fx.partition));
        }
        assert_eq!(s.pulls().iter().sum::<u64>(), 10_000);
    }

    #[test]
    fn inverse_cdf_edges() {
        assert_eq!(inverse_cdf(&[0.5, 0.5], 0.0), 0);
        assert_eq!(inverse_cdf(&[0.5, 0.5], 0.5), 1);
        assert_eq!(inverse_cdf(&[0.3, 0.3, 0.3999999], 0.99999999), 2);
        assert_eq!(inverse_cdf(&[0.5, 0.5, 0.0], 0.9999999999999999), 1);
    }
}
