//! Confidence regions over a group's means and the optimistic / pessimistic
//! group-value problems solved over them.
//!
//! The group value of a mean vector is the merit-weighted average
//! `Σ f(μᵢ)·μᵢ / Σ f(μⱼ)`. Maximizing it over a box has no closed form in
//! general. Two routes are used:
//!
//! * identity merit with every lower end at or above 0.5: the value is
//!   increasing in every coordinate there, so the upper corner is optimal;
//! * otherwise: coordinate ascent from the upper corner over a per-arm grid,
//!   until a sweep moves nothing by more than the tolerance. For identity and
//!   affine merits the one-dimensional objective is convex, so the grid
//!   collapses to the two interval endpoints without changing the result.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::merit::MeritSpec;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfRegError {
    #[error("arm at position {0} has never been pulled")]
    Unpulled(usize),
    #[error("group pull count {group_pulls} is below group size {group_size}")]
    GroupPulls { group_pulls: u64, group_size: usize },
    #[error("delta = {0} must lie in (0, 1)")]
    Delta(f64),
    #[error("counts and sums differ in length ({0} vs {1})")]
    Length(usize, usize),
    #[error("empty mean vector")]
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerConfig {
    /// Grid points per interval on the general path.
    pub grid: usize,
    pub sweeps: usize,
    pub tol: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            grid: 33,
            sweeps: 20,
            tol: 1e-10,
        }
    }
}

/// Per-arm intervals of one group, clipped to the merit domain.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfidenceRegion {
    pub mu_hat: Vec<f64>,
    pub widths: Vec<f64>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub group_width: f64,
    pub group_pulls: u64,
    pub delta: f64,
}

impl ConfidenceRegion {
    pub fn group_size(&self) -> usize {
        self.mu_hat.len()
    }

    /// Rebuilds in place, reusing the buffers.
    pub fn rebuild(
        &mut self,
        counts: &[u64],
        sums: &[f64],
        group_pulls: u64,
        delta: f64,
        merit: &MeritSpec,
    ) -> Result<(), ConfRegError> {
        let k = counts.len();
        if sums.len() != k {
            return Err(ConfRegError::Length(k, sums.len()));
        }
        if k == 0 {
            return Err(ConfRegError::Empty);
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(ConfRegError::Delta(delta));
        }
        if group_pulls < k as u64 {
            return Err(ConfRegError::GroupPulls {
                group_pulls,
                group_size: k,
            });
        }
        if let Some(pos) = counts.iter().position(|&c| c == 0) {
            return Err(ConfRegError::Unpulled(pos));
        }
        let group_width = (2.0 * (4.0 * group_pulls as f64 * k as f64 / delta).ln()).sqrt();
        self.mu_hat.clear();
        self.widths.clear();
        self.lo.clear();
        self.hi.clear();
        for (&n, &s) in counts.iter().zip(sums) {
            let mean = s / n as f64;
            let w = group_width / (n as f64).sqrt();
            self.mu_hat.push(mean);
            self.widths.push(w);
            let (lo, hi) = clip_interval(mean, w, merit);
            self.lo.push(lo);
            self.hi.push(hi);
        }
        self.group_width = group_width;
        self.group_pulls = group_pulls;
        self.delta = delta;
        Ok(())
    }

    /// Region made of explicit intervals, for callers that already know them.
    pub fn from_intervals(lo: Vec<f64>, hi: Vec<f64>) -> Self {
        let mu_hat: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| 0.5 * (a + b)).collect();
        let widths = lo.iter().zip(&hi).map(|(a, b)| 0.5 * (b - a)).collect();
        ConfidenceRegion {
            mu_hat,
            widths,
            lo,
            hi,
            group_width: 0.0,
            group_pulls: 0,
            delta: 0.0,
        }
    }
}

/// `[mean − width, mean + width]` clipped to the merit domain.
#[inline]
pub fn clip_interval(mean: f64, width: f64, merit: &MeritSpec) -> (f64, f64) {
    (merit.clamp(mean - width), merit.clamp(mean + width))
}

pub fn build_region(
    counts: &[u64],
    sums: &[f64],
    group_pulls: u64,
    delta: f64,
    merit: &MeritSpec,
) -> Result<ConfidenceRegion, ConfRegError> {
    let mut region = ConfidenceRegion::default();
    region.rebuild(counts, sums, group_pulls, delta, merit)?;
    Ok(region)
}

/// Merit-weighted average `Σ f(μᵢ)μᵢ / Σ f(μⱼ)`.
pub fn group_value(mu: &[f64], merit: &MeritSpec) -> Result<f64, ConfRegError> {
    if mu.is_empty() {
        return Err(ConfRegError::Empty);
    }
    Ok(value_unchecked(mu, merit))
}

#[inline]
pub(crate) fn value_unchecked(mu: &[f64], merit: &MeritSpec) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for &m in mu {
        let f = merit.eval(m);
        num += f * m;
        den += f;
    }
    num / den
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct OptimisticEstimate {
    pub mu_tilde: Vec<f64>,
    /// Merit-proportional policy induced by `mu_tilde`.
    pub pi: Vec<f64>,
    pub value: f64,
}

impl OptimisticEstimate {
    fn fill_policy(&mut self, merit: &MeritSpec) {
        self.pi.clear();
        let mut den = 0.0;
        let mut num = 0.0;
        for &m in &self.mu_tilde {
            let f = merit.eval(m);
            self.pi.push(f);
            den += f;
            num += f * m;
        }
        for p in &mut self.pi {
            *p /= den;
        }
        self.value = num / den;
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Direction {
    Maximize,
    Minimize,
}

pub fn optimistic_means(
    region: &ConfidenceRegion,
    merit: &MeritSpec,
    cfg: &OptimizerConfig,
) -> OptimisticEstimate {
    let mut est = OptimisticEstimate::default();
    optimistic_into(region, merit, cfg, &mut est);
    est
}

/// [`optimistic_means`] writing into reused buffers.
pub fn optimistic_into(
    region: &ConfidenceRegion,
    merit: &MeritSpec,
    cfg: &OptimizerConfig,
    out: &mut OptimisticEstimate,
) {
    out.mu_tilde.clear();
    out.mu_tilde.extend_from_slice(&region.hi);
    if !(merit.is_identity() && region.lo.iter().all(|&l| l >= 0.5)) {
        coordinate_search(region, merit, cfg, Direction::Maximize, &mut out.mu_tilde);
    }
    out.fill_policy(merit);
}

/// Mean vector in the region minimizing the group value.
pub fn pessimistic_means(
    region: &ConfidenceRegion,
    merit: &MeritSpec,
    cfg: &OptimizerConfig,
) -> Vec<f64> {
    let mut mu = region.lo.clone();
    if !(merit.is_identity() && region.lo.iter().all(|&l| l >= 0.5)) {
        coordinate_search(region, merit, cfg, Direction::Minimize, &mut mu);
    }
    mu
}

/// Coordinate search started from `mu`. Moves a coordinate only when the
/// objective improves by more than `cfg.tol`; ties prefer the larger mean
/// when maximizing and the smaller when minimizing.
fn coordinate_search(
    region: &ConfidenceRegion,
    merit: &MeritSpec,
    cfg: &OptimizerConfig,
    dir: Direction,
    mu: &mut [f64],
) {
    let k = mu.len();
    let sign = if dir == Direction::Maximize { 1.0 } else { -1.0 };
    // endpoints suffice only for maximizing a coordinate-convex objective
    let endpoints_only = dir == Direction::Maximize && merit.kind().coordinate_convex();
    let grid = cfg.grid.max(2);

    let (mut num, mut den) = (0.0, 0.0);
    for &m in mu.iter() {
        let f = merit.eval(m);
        num += f * m;
        den += f;
    }

    for _ in 0..cfg.sweeps.max(1) {
        let mut moved = false;
        for j in 0..k {
            let (lo, hi) = (region.lo[j], region.hi[j]);
            if lo == hi {
                continue;
            }
            let fj = merit.eval(mu[j]);
            let num_rest = num - fj * mu[j];
            let den_rest = den - fj;
            let current = sign * (num / den);
            let mut best = f64::NEG_INFINITY;
            let mut best_x = mu[j];
            let mut consider = |x: f64| {
                let f = merit.eval(x);
                let v = sign * ((num_rest + f * x) / (den_rest + f));
                if v > best {
                    best = v;
                    best_x = x;
                }
            };
            // visit in preference order so strict '>' keeps the preferred tie
            let steps = grid - 1;
            match (dir, endpoints_only) {
                (Direction::Maximize, true) => {
                    consider(hi);
                    consider(lo);
                }
                (Direction::Maximize, false) => {
                    for s in (0..=steps).rev() {
                        consider(grid_point(lo, hi, s, steps));
                    }
                }
                (Direction::Minimize, _) => {
                    for s in 0..=steps {
                        consider(grid_point(lo, hi, s, steps));
                    }
                }
            }
            if best > current + cfg.tol && best_x != mu[j] {
                let f = merit.eval(best_x);
                num = num_rest + f * best_x;
                den = den_rest + f;
                mu[j] = best_x;
                moved = true;
            }
        }
        // refresh the running sums against drift
        num = 0.0;
        den = 0.0;
        for &m in mu.iter() {
            let f = merit.eval(m);
            num += f * m;
            den += f;
        }
        if !moved {
            break;
        }
    }
}

#[inline]
fn grid_point(lo: f64, hi: f64, s: usize, steps: usize) -> f64 {
    if s == steps {
        hi
    } else {
        lo + (hi - lo) * (s as f64 / steps as f64)
    }
}
