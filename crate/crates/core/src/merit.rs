//! Merit functions mapping a mean reward to a positive merit score.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Lower end of the default evaluation domain `[floor, 1]`.
pub const DEFAULT_MERIT_FLOOR: f64 = 1e-3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeritError {
    #[error("evaluation domain [{lo}, {hi}] must satisfy 0 <= lo <= hi <= 1")]
    BadDomain { lo: f64, hi: f64 },
    #[error("merit is not non-decreasing on its domain: {0}")]
    NonMonotone(String),
    #[error("γ₁ = {0} but merit must be bounded away from zero (γ₁ > 0)")]
    NonPositive(f64),
    #[error("mean {mu} outside evaluation domain [{lo}, {hi}]")]
    OutOfDomain { mu: f64, lo: f64, hi: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MeritKind {
    Identity,
    Affine { a: f64, b: f64 },
    Power { p: f64 },
}

impl MeritKind {
    #[inline]
    fn eval(self, mu: f64) -> f64 {
        match self {
            MeritKind::Identity => mu,
            MeritKind::Affine { a, b } => a * mu + b,
            MeritKind::Power { p } => mu.powf(p),
        }
    }

    /// Whether the group value is convex in each single coordinate, so a
    /// one-dimensional maximum sits at an interval endpoint.
    pub fn coordinate_convex(self) -> bool {
        matches!(self, MeritKind::Identity | MeritKind::Affine { .. })
    }
}

/// A validated merit function together with its bounds over `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeritSpec {
    kind: MeritKind,
    lo: f64,
    hi: f64,
    gamma1: f64,
    gamma2: f64,
    lipschitz: f64,
}

impl MeritSpec {
    pub fn new(kind: MeritKind, lo: f64, hi: f64) -> Result<Self, MeritError> {
        if !(0.0 <= lo && lo <= hi && hi <= 1.0) {
            return Err(MeritError::BadDomain { lo, hi });
        }
        let lipschitz = match kind {
            MeritKind::Identity => 1.0,
            MeritKind::Affine { a, b } => {
                if !(a >= 0.0) || !b.is_finite() {
                    return Err(MeritError::NonMonotone(format!("affine slope a = {a} < 0")));
                }
                a
            }
            MeritKind::Power { p } => {
                if !(p >= 1.0) || !p.is_finite() {
                    return Err(MeritError::NonMonotone(format!(
                        "power exponent p = {p} must be >= 1"
                    )));
                }
                p * hi.powf(p - 1.0)
            }
        };
        // every supported kind is non-decreasing, so the extrema sit at the ends
        let gamma1 = kind.eval(lo);
        let gamma2 = kind.eval(hi);
        if !(gamma1 > 0.0) {
            return Err(MeritError::NonPositive(gamma1));
        }
        Ok(MeritSpec {
            kind,
            lo,
            hi,
            gamma1,
            gamma2,
            lipschitz,
        })
    }

    /// Identity merit on `[floor, 1]`.
    pub fn identity(floor: f64) -> Result<Self, MeritError> {
        MeritSpec::new(MeritKind::Identity, floor, 1.0)
    }

    pub fn kind(&self) -> MeritKind {
        self.kind
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn gamma1(&self) -> f64 {
        self.gamma1
    }

    pub fn gamma2(&self) -> f64 {
        self.gamma2
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn is_identity(&self) -> bool {
        matches!(self.kind, MeritKind::Identity)
    }

    /// Checked evaluation.
    pub fn value(&self, mu: f64) -> Result<f64, MeritError> {
        if !(self.lo <= mu && mu <= self.hi) {
            return Err(MeritError::OutOfDomain {
                mu,
                lo: self.lo,
                hi: self.hi,
            });
        }
        Ok(self.kind.eval(mu))
    }

    /// Evaluation for callers that already hold an in-domain mean.
    #[inline]
    pub fn eval(&self, mu: f64) -> f64 {
        debug_assert!(mu >= self.lo - 1e-12 && mu <= self.hi + 1e-12);
        self.kind.eval(mu)
    }

    #[inline]
    pub fn clamp(&self, mu: f64) -> f64 {
        mu.clamp(self.lo, self.hi)
    }
}

/// `(γ₁, γ₂, L)` of a validated spec.
pub fn merit_bounds(spec: &MeritSpec) -> (f64, f64, f64) {
    (spec.gamma1, spec.gamma2, spec.lipschitz)
}
