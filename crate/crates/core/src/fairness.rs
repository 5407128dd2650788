//! Group exposure shares `β_g`, held as exact rationals.

use std::fmt;

use num_rational::Ratio;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FairnessError {
    #[error("cannot parse share {0:?}: expected a decimal like 0.4 or a fraction like 2/5")]
    Parse(String),
    #[error("{given} shares given for {groups} groups")]
    Count { given: usize, groups: usize },
    #[error("β_{index} = {value} must be > 0")]
    NonPositive { index: usize, value: String },
    #[error("β_{index} > 1/m: {value} exceeds 1/{groups}")]
    AboveUniform {
        index: usize,
        value: String,
        groups: usize,
    },
    #[error("Σβ = {0} must be < 1")]
    SumTooLarge(String),
}

/// One exposure share as a reduced fraction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Share(Ratio<u64>);

impl Share {
    pub fn new(numer: u64, denom: u64) -> Result<Self, FairnessError> {
        if denom == 0 {
            return Err(FairnessError::Parse(format!("{numer}/{denom}")));
        }
        Ok(Share(Ratio::new(numer, denom)))
    }

    /// Parses `"0.4"`, `"2/5"` or `"1"`.
    pub fn parse(text: &str) -> Result<Self, FairnessError> {
        let bad = || FairnessError::Parse(text.to_string());
        let t = text.trim();
        if let Some((p, q)) = t.split_once('/') {
            let p: u64 = p.trim().parse().map_err(|_| bad())?;
            let q: u64 = q.trim().parse().map_err(|_| bad())?;
            return Share::new(p, q).map_err(|_| bad());
        }
        let (int, frac) = t.split_once('.').unwrap_or((t, ""));
        if (int.is_empty() && frac.is_empty())
            || !int.chars().all(|c| c.is_ascii_digit())
            || !frac.chars().all(|c| c.is_ascii_digit())
            || frac.len() > 18
        {
            return Err(bad());
        }
        let denom = 10u64.pow(frac.len() as u32);
        let int: u64 = if int.is_empty() { 0 } else { int.parse().map_err(|_| bad())? };
        let frac: u64 = if frac.is_empty() { 0 } else { frac.parse().map_err(|_| bad())? };
        let numer = int
            .checked_mul(denom)
            .and_then(|v| v.checked_add(frac))
            .ok_or_else(bad)?;
        Share::new(numer, denom)
    }

    pub fn numer(&self) -> u64 {
        *self.0.numer()
    }

    pub fn denom(&self) -> u64 {
        *self.0.denom()
    }

    /// `⌊β·t⌋` in integer arithmetic.
    #[inline]
    pub fn floor_mul(&self, t: u64) -> u64 {
        ((self.numer() as u128 * t as u128) / self.denom() as u128) as u64
    }

    pub fn to_f64(&self) -> f64 {
        self.numer() as f64 / self.denom() as f64
    }
}

impl fmt::Display for Share {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.numer(), self.denom())
    }
}

/// Exposure shares for every group.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FairnessConfig {
    beta: Vec<Share>,
}

impl FairnessConfig {
    /// Validates `0 < β_g ≤ 1/m` and `Σβ < 1` exactly, with `m = beta.len()`.
    pub fn new(beta: Vec<Share>) -> Result<Self, FairnessError> {
        let m = beta.len() as u64;
        for (g, b) in beta.iter().enumerate() {
            if b.numer() == 0 {
                return Err(FairnessError::NonPositive {
                    index: g + 1,
                    value: b.to_string(),
                });
            }
            if b.0 > Ratio::new(1, m) {
                return Err(FairnessError::AboveUniform {
                    index: g + 1,
                    value: b.to_string(),
                    groups: m as usize,
                });
            }
        }
        let mut sum = Ratio::new(0u128, 1);
        for b in &beta {
            sum += Ratio::new(b.numer() as u128, b.denom() as u128);
        }
        if sum >= Ratio::new(1, 1) {
            return Err(FairnessError::SumTooLarge(sum.to_string()));
        }
        Ok(FairnessConfig { beta })
    }

    pub fn parse<S: AsRef<str>>(texts: &[S]) -> Result<Self, FairnessError> {
        let beta = texts
            .iter()
            .map(|t| Share::parse(t.as_ref()))
            .collect::<Result<Vec<_>, _>>()?;
        FairnessConfig::new(beta)
    }

    /// Also checks the share count against the number of groups.
    pub fn for_groups(self, groups: usize) -> Result<Self, FairnessError> {
        if self.beta.len() != groups {
            return Err(FairnessError::Count {
                given: self.beta.len(),
                groups,
            });
        }
        Ok(self)
    }

    pub fn shares(&self) -> &[Share] {
        &self.beta
    }

    pub fn share(&self, g: usize) -> Share {
        self.beta[g]
    }

    pub fn len(&self) -> usize {
        self.beta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beta.is_empty()
    }

    /// `⌊β_g·t⌋`.
    #[inline]
    pub fn floor(&self, g: usize, t: u64) -> u64 {
        self.beta[g].floor_mul(t)
    }

    /// `N_{g,t} − ⌊β_g·t⌋`.
    #[inline]
    pub fn slack(&self, g: usize, group_pulls: u64, t: u64) -> i64 {
        group_pulls as i64 - self.floor(g, t) as i64
    }

    /// Groups with `β_g·elapsed − N_g > 0`, scaled by the common
    /// denominator so they compare exactly. Returns the argmax (lowest index on
    /// ties), or `None` if no group is behind.
    pub fn most_behind(&self, group_pulls: &[u64], elapsed: u64) -> Option<usize> {
        let mut best: Option<(usize, i128, i128)> = None;
        for (g, b) in self.beta.iter().enumerate() {
            let (p, q) = (b.numer() as i128, b.denom() as i128);
            // deficit = (p·elapsed − q·N) / q
            let num = p * elapsed as i128 - q * group_pulls[g] as i128;
            if num <= 0 {
                continue;
            }
            match best {
                Some((_, bn, bq)) if num * bq <= bn * q => {}
                _ => best = Some((g, num, q)),
            }
        }
        best.map(|(g, _, _)| g)
    }
}
