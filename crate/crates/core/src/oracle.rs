//! Ground truth from the true means: merit-proportional policies, the best
//! group, the optimal fair reward, and the diagnostic regret bound.

use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::confreg::value_unchecked;
use crate::env::BanditInstance;
use crate::fairness::FairnessConfig;
use crate::merit::MeritSpec;
use crate::rng::RngStream;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("no sub-optimal group: Δ_min is undefined")]
    NoSuboptimalGroup,
    #[error("{given} group pull counts for {groups} groups")]
    Length { given: usize, groups: usize },
}

/// Merit-proportional policy `f(μᵢ)/Σf(μⱼ)`. Means are clamped into the merit
/// domain before evaluation.
pub fn optimal_policy(mu_g: &[f64], merit: &MeritSpec) -> Vec<f64> {
    let merits: Vec<f64> = mu_g.iter().map(|&m| merit.eval(merit.clamp(m))).collect();
    let total: f64 = merits.iter().sum();
    merits.into_iter().map(|f| f / total).collect()
}

/// `R_g^* = Σ π*_g(i)·μᵢ`, weighting the true (unclamped) means.
fn optimal_group_value(mu_g: &[f64], merit: &MeritSpec) -> f64 {
    optimal_policy(mu_g, merit)
        .iter()
        .zip(mu_g)
        .map(|(p, m)| p * m)
        .sum()
}

/// `(g*, R_g^* per group, g* unique)`; ties go to the lowest index.
pub fn optimal_group(inst: &BanditInstance, merit: &MeritSpec) -> (usize, Vec<f64>, bool) {
    let values: Vec<f64> = (0..inst.groups.len())
        .map(|g| optimal_group_value(&inst.group_means(g), merit))
        .collect();
    let mut best = 0;
    for (g, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = g;
        }
    }
    let unique = values
        .iter()
        .enumerate()
        .all(|(g, &v)| g == best || v < values[best]);
    (best, values, unique)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleSummary {
    pub pi_star: Vec<Vec<f64>>,
    pub r_star: Vec<f64>,
    pub g_star: usize,
    pub g_star_unique: bool,
    /// `Δ_g = R*_{g*} − R*_g`.
    pub gaps: Vec<f64>,
    /// Smallest positive gap, if any group is strictly sub-optimal.
    pub delta_min: Option<f64>,
}

impl OracleSummary {
    pub fn build(inst: &BanditInstance, merit: &MeritSpec) -> Self {
        let pi_star = (0..inst.groups.len())
            .map(|g| optimal_policy(&inst.group_means(g), merit))
            .collect();
        let (g_star, r_star, g_star_unique) = optimal_group(inst, merit);
        let best = r_star[g_star];
        let gaps: Vec<f64> = r_star.iter().map(|&r| best - r).collect();
        let delta_min = gaps
            .iter()
            .copied()
            .filter(|&d| d > 0.0)
            .min_by(f64::total_cmp);
        OracleSummary {
            pi_star,
            r_star,
            g_star,
            g_star_unique,
            gaps,
            delta_min,
        }
    }

    pub fn groups(&self) -> usize {
        self.r_star.len()
    }

    /// Optimal fair reward at horizon `horizon`.
    pub fn optimal_reward(&self, beta: &FairnessConfig, horizon: u64) -> f64 {
        optimal_reward(self, beta, horizon)
    }
}

/// Sub-optimal groups get exactly their floor, the best group the rest. The
/// integer pull counts are exact; the reward is one float expression.
pub fn optimal_reward(summary: &OracleSummary, beta: &FairnessConfig, horizon: u64) -> f64 {
    let mut others = 0u64;
    let mut reward = 0.0;
    for g in 0..summary.groups() {
        if g != summary.g_star {
            let floor = beta.floor(g, horizon);
            others += floor;
            reward += floor as f64 * summary.r_star[g];
        }
    }
    reward + (horizon - others) as f64 * summary.r_star[summary.g_star]
}

/// Inputs of the diagnostic regret bound.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundParameters {
    pub l1: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub delta_min: Option<f64>,
    pub gaps: Vec<f64>,
    pub group_sizes: Vec<usize>,
    pub beta: Vec<f64>,
    pub delta: f64,
}

impl BoundParameters {
    pub fn new(
        summary: &OracleSummary,
        inst: &BanditInstance,
        merit: &MeritSpec,
        beta: &FairnessConfig,
        delta: f64,
        l1: f64,
    ) -> Self {
        BoundParameters {
            l1,
            gamma1: merit.gamma1(),
            gamma2: merit.gamma2(),
            delta_min: summary.delta_min,
            gaps: summary.gaps.clone(),
            group_sizes: inst.groups.groups().iter().map(Vec::len).collect(),
            beta: beta.shares().iter().map(|s| s.to_f64()).collect(),
            delta,
        }
    }
}

/// The bound's additive pieces.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundBreakdown {
    /// `(1 + π²/3)·ΣΔ_g`
    pub constant: f64,
    /// `Σ √(N_g k_g)·(1 − δ)`
    pub width: f64,
    /// `δ·T`
    pub delta_t: f64,
    /// Excess-pull term, floored at 0 per group; absent without Δ_min.
    pub excess: Option<f64>,
    /// The `8L₁²/Δ²_min·ln(·)` share of `excess` before flooring.
    pub excess_log: Option<f64>,
}

impl BoundBreakdown {
    pub fn total(&self) -> Result<f64, OracleError> {
        let excess = self.excess.ok_or(OracleError::NoSuboptimalGroup)?;
        Ok(self.constant + self.width + self.delta_t + excess)
    }
}

/// Pieces of the bound evaluated at realized group pulls. Counts of zero are
/// treated as one inside the logarithms.
pub fn bound_breakdown(
    params: &BoundParameters,
    group_pulls: &[u64],
    horizon: u64,
) -> Result<BoundBreakdown, OracleError> {
    let m = params.group_sizes.len();
    if group_pulls.len() != m {
        return Err(OracleError::Length {
            given: group_pulls.len(),
            groups: m,
        });
    }
    let delta = params.delta;
    let gap_sum: f64 = params.gaps.iter().sum();
    let constant = (1.0 + std::f64::consts::PI.powi(2) / 3.0) * gap_sum;
    let width: f64 = group_pulls
        .iter()
        .zip(&params.group_sizes)
        .map(|(&n, &k)| ((n * k as u64) as f64).sqrt() * (1.0 - delta))
        .sum();
    let delta_t = delta * horizon as f64;
    let (excess, excess_log) = match params.delta_min.filter(|&d| d > 0.0) {
        None => (None, None),
        Some(dmin) => {
            let ratio = params.gamma2 / params.gamma1;
            let mut excess = 0.0;
            let mut log_part = 0.0;
            for g in 0..m {
                let n = group_pulls[g].max(1) as f64;
                let k = params.group_sizes[g] as f64;
                let log_term =
                    8.0 * params.l1.powi(2) / dmin.powi(2) * (4.0 * n * k / delta).ln();
                let dev = (n * (k / delta).ln() / 2.0).sqrt();
                let bracket =
                    k * ratio * (log_term + dev) - params.beta[g] * horizon as f64;
                excess += bracket.max(0.0) * params.gaps[g];
                log_part += k * ratio * log_term * params.gaps[g];
            }
            (Some(excess), Some(log_part))
        }
    };
    Ok(BoundBreakdown {
        constant,
        width,
        delta_t,
        excess,
        excess_log,
    })
}

/// Diagnostic regret bound at realized group pulls. Errors when every group
/// ties the best one.
pub fn theoretical_bound(
    params: &BoundParameters,
    group_pulls: &[u64],
    horizon: u64,
) -> Result<f64, OracleError> {
    bound_breakdown(params, group_pulls, horizon)?.total()
}

pub const L1_SAMPLES: usize = 10_000;
pub const L1_SAFETY: f64 = 1.5;

/// Sampled Lipschitz constant of the group value map: the largest
/// `|ΔR_g| / |Δμ|` over random single-coordinate perturbations of random points
/// in the merit domain, times [`L1_SAFETY`]. Draws are consumed in a fixed
/// order, so a larger budget on the same stream sees a superset of samples.
pub fn estimate_l1(
    merit: &MeritSpec,
    inst: &BanditInstance,
    samples: usize,
    rng: &mut RngStream,
) -> f64 {
    let (lo, hi) = merit.domain();
    let m = inst.groups.len();
    let mut best: f64 = 0.0;
    if hi <= lo || m == 0 {
        return 0.0;
    }
    let mut mu = Vec::new();
    for s in 0..samples {
        let g = s % m;
        let k = inst.groups.size(g);
        mu.clear();
        mu.extend((0..k).map(|_| rng.gen_range(lo..=hi)));
        let j = rng.gen_range(0..k);
        let mut h = rng.gen_range(1e-4..0.1) * (hi - lo);
        if rng.gen_bool(0.5) {
            h = -h;
        }
        let base = value_unchecked(&mu, merit);
        let mut moved = mu[j] + h;
        if !(lo..=hi).contains(&moved) {
            moved = mu[j] - h;
        }
        let moved = moved.clamp(lo, hi);
        let step = moved - mu[j];
        if step == 0.0 {
            continue;
        }
        mu[j] = moved;
        let ratio = (value_unchecked(&mu, merit) - base).abs() / step.abs();
        best = best.max(ratio);
    }
    best * L1_SAFETY
}
