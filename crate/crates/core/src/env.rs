//! Bandit instances: arms, their group partition, and reward sampling.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::RngStream;

#[derive(Debug, Error, PartialEq)]
pub enum EnvError {
    #[error("arm index {arm} out of range for {n} arms")]
    ArmOutOfRange { arm: usize, n: usize },
    #[error("invalid instance: {0}")]
    Invalid(ValidationReport),
    #[error("generator config: {0}")]
    Generator(String),
}

/// Disjoint groups of global arm indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GroupPartition {
    groups: Vec<Vec<usize>>,
}

impl GroupPartition {
    /// Wraps the groups without checking them; see [`validate_instance`].
    pub fn new(groups: Vec<Vec<usize>>) -> Self {
        GroupPartition { groups }
    }

    /// Consecutive groups of the given sizes: `[0..k0), [k0..k0+k1), ...`.
    pub fn contiguous(sizes: &[usize]) -> Self {
        let mut next = 0;
        let groups = sizes
            .iter()
            .map(|&k| {
                let g: Vec<usize> = (next..next + k).collect();
                next += k;
                g
            })
            .collect();
        GroupPartition { groups }
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn group(&self, g: usize) -> &[usize] {
        &self.groups[g]
    }

    /// Number of groups, `m`.
    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn size(&self, g: usize) -> usize {
        self.groups[g].len()
    }

    pub fn max_size(&self) -> usize {
        self.groups.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn arm_count(&self) -> usize {
        self.groups.iter().map(Vec::len).sum()
    }

    /// `(group, position within group)` for every arm; `None` for arms not covered.
    pub fn locate_all(&self, n: usize) -> Vec<Option<(usize, usize)>> {
        let mut out = vec![None; n];
        for (g, arms) in self.groups.iter().enumerate() {
            for (local, &arm) in arms.iter().enumerate() {
                if arm < n && out[arm].is_none() {
                    out[arm] = Some((g, local));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardKind {
    #[default]
    Bernoulli,
    UniformBand { halfwidth: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BanditInstance {
    pub means: Vec<f64>,
    pub groups: GroupPartition,
    #[serde(default)]
    pub reward_kind: RewardKind,
    /// Seed the means were drawn with, when generated.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator_seed: Option<u64>,
}

impl BanditInstance {
    /// Builds an instance and rejects it unless every invariant holds.
    pub fn new(
        means: Vec<f64>,
        groups: Vec<Vec<usize>>,
        reward_kind: RewardKind,
    ) -> Result<Self, EnvError> {
        let inst = BanditInstance {
            means,
            groups: GroupPartition::new(groups),
            reward_kind,
            generator_seed: None,
        };
        let report = validate_instance(&inst);
        if report.is_ok() {
            Ok(inst)
        } else {
            Err(EnvError::Invalid(report))
        }
    }

    pub fn arm_count(&self) -> usize {
        self.means.len()
    }

    pub fn group_means(&self, g: usize) -> Vec<f64> {
        self.groups.group(g).iter().map(|&i| self.means[i]).collect()
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("instance serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self, EnvError> {
        let inst: BanditInstance =
            toml::from_str(text).map_err(|e| EnvError::Generator(e.to_string()))?;
        let report = validate_instance(&inst);
        if report.is_ok() {
            Ok(inst)
        } else {
            Err(EnvError::Invalid(report))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NoArms,
    NoGroups,
    EmptyGroup(usize),
    ArmInTwoGroups(usize),
    ArmUnassigned(usize),
    UnknownArm(usize),
    MeanOutOfRange { arm: usize, mean: f64 },
    BandOutOfRange { arm: usize, lo: f64, hi: f64 },
    BadHalfwidth(f64),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NoArms => write!(f, "instance has no arms"),
            Violation::NoGroups => write!(f, "partition has no groups"),
            Violation::EmptyGroup(g) => write!(f, "group {g} is empty"),
            Violation::ArmInTwoGroups(a) => write!(f, "arm {a} in two groups"),
            Violation::ArmUnassigned(a) => write!(f, "arm {a} belongs to no group"),
            Violation::UnknownArm(a) => write!(f, "group lists unknown arm {a}"),
            Violation::MeanOutOfRange { arm, mean } => {
                write!(f, "mean out of [0,1]: arm {arm} has mean {mean}")
            }
            Violation::BandOutOfRange { arm, lo, hi } => {
                write!(f, "reward band [{lo}, {hi}] of arm {arm} leaves [0,1]")
            }
            Violation::BadHalfwidth(h) => write!(f, "uniform band halfwidth {h} must be >= 0"),
        }
    }
}

/// Outcome of [`validate_instance`]: empty means valid.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "ok");
        }
        let msgs: Vec<String> = self.violations.iter().map(ToString::to_string).collect();
        write!(f, "{}", msgs.join("; "))
    }
}

pub fn validate_instance(inst: &BanditInstance) -> ValidationReport {
    let mut violations = Vec::new();
    let n = inst.means.len();
    if n == 0 {
        violations.push(Violation::NoArms);
    }
    if inst.groups.is_empty() {
        violations.push(Violation::NoGroups);
    }
    let mut owner: Vec<Option<usize>> = vec![None; n];
    for (g, arms) in inst.groups.groups().iter().enumerate() {
        if arms.is_empty() {
            violations.push(Violation::EmptyGroup(g));
        }
        for &arm in arms {
            if arm >= n {
                violations.push(Violation::UnknownArm(arm));
            } else if owner[arm].is_some() {
                violations.push(Violation::ArmInTwoGroups(arm));
            } else {
                owner[arm] = Some(g);
            }
        }
    }
    for (arm, o) in owner.iter().enumerate() {
        if o.is_none() {
            violations.push(Violation::ArmUnassigned(arm));
        }
    }
    for (arm, &mean) in inst.means.iter().enumerate() {
        if !(0.0..=1.0).contains(&mean) {
            violations.push(Violation::MeanOutOfRange { arm, mean });
        }
    }
    if let RewardKind::UniformBand { halfwidth } = inst.reward_kind {
        if !(halfwidth >= 0.0) {
            violations.push(Violation::BadHalfwidth(halfwidth));
        } else {
            for (arm, &mean) in inst.means.iter().enumerate() {
                let (lo, hi) = (mean - halfwidth, mean + halfwidth);
                if lo < 0.0 || hi > 1.0 {
                    violations.push(Violation::BandOutOfRange { arm, lo, hi });
                }
            }
        }
    }
    ValidationReport { violations }
}

/// Draws one reward of `arm`.
#[inline]
pub fn sample_reward(
    inst: &BanditInstance,
    arm: usize,
    rng: &mut RngStream,
) -> Result<f64, EnvError> {
    let mean = *inst.means.get(arm).ok_or(EnvError::ArmOutOfRange {
        arm,
        n: inst.means.len(),
    })?;
    Ok(match inst.reward_kind {
        RewardKind::Bernoulli => {
            if rng.unit() < mean {
                1.0
            } else {
                0.0
            }
        }
        RewardKind::UniformBand { halfwidth } => {
            if halfwidth == 0.0 {
                mean
            } else {
                rng.gen_range(mean - halfwidth..=mean + halfwidth)
            }
        }
    })
}

/// Group sizes and per-group mean ranges for random instances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSpec {
    pub sizes: Vec<usize>,
    pub ranges: Vec<[f64; 2]>,
    #[serde(default)]
    pub reward_kind: RewardKind,
}

impl GeneratorSpec {
    /// Minority of 5 and majority of 10 arms, all means in `[0.6, 0.85]`.
    pub fn low_arms() -> Self {
        GeneratorSpec {
            sizes: vec![5, 10],
            ranges: vec![[0.6, 0.85], [0.6, 0.85]],
            reward_kind: RewardKind::Bernoulli,
        }
    }

    /// Minority of 10 arms in `[0.5, 0.8]`, majority of 50 arms in `[0.7, 1]`.
    pub fn high_arms() -> Self {
        GeneratorSpec {
            sizes: vec![10, 50],
            ranges: vec![[0.5, 0.8], [0.7, 1.0]],
            reward_kind: RewardKind::Bernoulli,
        }
    }

    pub fn check(&self) -> Result<(), EnvError> {
        if self.sizes.is_empty() {
            return Err(EnvError::Generator("no groups".into()));
        }
        if self.sizes.len() != self.ranges.len() {
            return Err(EnvError::Generator(format!(
                "{} group sizes but {} ranges",
                self.sizes.len(),
                self.ranges.len()
            )));
        }
        for (g, (&k, &[lo, hi])) in self.sizes.iter().zip(&self.ranges).enumerate() {
            if k == 0 {
                return Err(EnvError::Generator(format!("group {g} has size 0")));
            }
            if !(0.0 <= lo && lo <= hi && hi <= 1.0) {
                return Err(EnvError::Generator(format!(
                    "range [{lo}, {hi}] of group {g} is not inside [0,1]"
                )));
            }
        }
        Ok(())
    }
}

/// Draws every mean independently and uniformly from its group's range.
pub fn generate_instance(
    spec: &GeneratorSpec,
    rng: &mut RngStream,
) -> Result<BanditInstance, EnvError> {
    spec.check()?;
    let mut means = Vec::with_capacity(spec.sizes.iter().sum());
    for (&k, &[lo, hi]) in spec.sizes.iter().zip(&spec.ranges) {
        for _ in 0..k {
            means.push(if lo == hi { lo } else { rng.gen_range(lo..=hi) });
        }
    }
    let inst = BanditInstance {
        means,
        groups: GroupPartition::contiguous(&spec.sizes),
        reward_kind: spec.reward_kind,
        generator_seed: Some(rng.seed()),
    };
    let report = validate_instance(&inst);
    if report.is_ok() {
        Ok(inst)
    } else {
        Err(EnvError::Invalid(report))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{Purpose, StreamId};

    fn stream(run: u64) -> RngStream {
        RngStream::new(11, StreamId::new(run, 0, Purpose::Reward))
    }

    fn raw(means: Vec<f64>, groups: Vec<Vec<usize>>) -> BanditInstance {
        BanditInstance {
            means,
            groups: GroupPartition::new(groups),
            reward_kind: RewardKind::Bernoulli,
            generator_seed: None,
        }
    }

    #[test]
    fn valid_two_singletons() {
        assert!(validate_instance(&raw(vec![0.6, 0.4], vec![vec![0], vec![1]])).is_ok());
    }

    #[test]
    fn overlap_reported() {
        let r = validate_instance(&raw(vec![0.6], vec![vec![0], vec![0]]));
        assert!(r.violations.contains(&Violation::ArmInTwoGroups(0)));
        assert!(r.to_string().contains("arm 0 in two groups"));
    }

    #[test]
    fn mean_range_reported() {
        let r = validate_instance(&raw(vec![1.2], vec![vec![0]]));
        assert!(r.to_string().contains("mean out of [0,1]"));
    }

    #[test]
    fn empty_and_unassigned_reported() {
        let r = validate_instance(&raw(vec![0.5, 0.5], vec![vec![0], vec![]]));
        assert!(r.violations.contains(&Violation::EmptyGroup(1)));
        assert!(r.violations.contains(&Violation::ArmUnassigned(1)));
        let r = validate_instance(&raw(vec![0.5], vec![vec![0, 3]]));
        assert!(r.violations.contains(&Violation::UnknownArm(3)));
    }

    #[test]
    fn band_must_fit() {
        let mut inst = raw(vec![0.95], vec![vec![0]]);
        inst.reward_kind = RewardKind::UniformBand { halfwidth: 0.1 };
        assert!(!validate_instance(&inst).is_ok());
        inst.means[0] = 0.5;
        assert!(validate_instance(&inst).is_ok());
    }

    #[test]
    fn degenerate_bernoulli() {
        let inst = raw(vec![1.0, 0.0], vec![vec![0, 1]]);
        let mut rng = stream(0);
        for _ in 0..1000 {
            assert_eq!(sample_reward(&inst, 0, &mut rng).unwrap(), 1.0);
            assert_eq!(sample_reward(&inst, 1, &mut rng).unwrap(), 0.0);
        }
    }

    #[test]
    fn bad_arm_is_error() {
        let inst = raw(vec![0.5], vec![vec![0]]);
        assert_eq!(
            sample_reward(&inst, 4, &mut stream(0)),
            Err(EnvError::ArmOutOfRange { arm: 4, n: 1 })
        );
    }

    #[test]
    fn bernoulli_empirical_means() {
        let n = 1_000_000u32;
        for (j, mu) in (1..=9).map(|k| k as f64 / 10.0).enumerate() {
            let inst = raw(vec![mu], vec![vec![0]]);
            let mut rng = stream(j as u64);
            let total: f64 = (0..n).map(|_| sample_reward(&inst, 0, &mut rng).unwrap()).sum();
            let emp = total / n as f64;
            let band = 4.0 * (mu * (1.0 - mu) / n as f64).sqrt();
            assert!((emp - mu).abs() <= band, "mu={mu} emp={emp}");
            if mu == 0.7 {
                assert!((emp - 0.7).abs() <= 0.002);
            }
        }
    }

    #[test]
    fn uniform_band_stays_in_band() {
        let mut inst = raw(vec![0.5], vec![vec![0]]);
        inst.reward_kind = RewardKind::UniformBand { halfwidth: 0.2 };
        let mut rng = stream(1);
        let mut total = 0.0;
        for _ in 0..100_000 {
            let r = sample_reward(&inst, 0, &mut rng).unwrap();
            assert!((0.3..=0.7).contains(&r));
            total += r;
        }
        assert!((total / 100_000.0 - 0.5).abs() < 0.002);
    }

    #[test]
    fn reproducible_rewards() {
        let inst = raw(vec![0.3, 0.7], vec![vec![0, 1]]);
        let a: Vec<f64> = {
            let mut r = stream(5);
            (0..500).map(|i| sample_reward(&inst, i % 2, &mut r).unwrap()).collect()
        };
        let b: Vec<f64> = {
            let mut r = stream(5);
            (0..500).map(|i| sample_reward(&inst, i % 2, &mut r).unwrap()).collect()
        };
        assert_eq!(a, b);
    }

    #[test]
    fn presets_respect_ranges() {
        let low = generate_instance(&GeneratorSpec::low_arms(), &mut stream(2)).unwrap();
        assert_eq!(low.means.len(), 15);
        assert_eq!(low.groups.size(0), 5);
        assert_eq!(low.groups.size(1), 10);
        assert!(low.means.iter().all(|m| (0.6..=0.85).contains(m)));

        let high = generate_instance(&GeneratorSpec::high_arms(), &mut stream(3)).unwrap();
        assert_eq!(high.groups.size(0), 10);
        assert_eq!(high.groups.size(1), 50);
        assert!(high.group_means(0).iter().all(|m| (0.5..=0.8).contains(m)));
        assert!(high.group_means(1).iter().all(|m| (0.7..=1.0).contains(m)));
    }

    #[test]
    fn zero_width_range() {
        let spec = GeneratorSpec {
            sizes: vec![3, 2],
            ranges: vec![[0.6, 0.6], [0.6, 0.6]],
            reward_kind: RewardKind::Bernoulli,
        };
        let inst = generate_instance(&spec, &mut stream(0)).unwrap();
        assert!(inst.means.iter().all(|&m| m == 0.6));
    }

    #[test]
    fn generator_rejects_bad_range() {
        let spec = GeneratorSpec {
            sizes: vec![2],
            ranges: vec![[0.5, 1.2]],
            reward_kind: RewardKind::Bernoulli,
        };
        assert!(matches!(
            generate_instance(&spec, &mut stream(0)),
            Err(EnvError::Generator(_))
        ));
    }

    #[test]
    fn toml_dump_roundtrip() {
        let inst = generate_instance(&GeneratorSpec::low_arms(), &mut stream(4)).unwrap();
        let back = BanditInstance::from_toml(&inst.to_toml()).unwrap();
        assert_eq!(inst, back);
    }
}
