//! Exact output distributions of deterministic programs under a uniform input.
//!
//! Every probability arising from a program `F : {0, .., n-1} -> O` with a
//! uniform input is `count / n`, so a [`Distribution`] keeps the integer
//! counts and the total and never stores floating-point probabilities.
//! Outcome labels are dropped; only the multiset of counts matters.
//!
//! Counts are held as runs of equal values (`count`, `multiplicity`) in
//! strictly decreasing `count` order. This keeps closed-form channels such as
//! "one output of weight `7n/8` plus `n/8` singletons" at two runs no matter
//! how large `n` grows.

use std::fmt;

use num_rational::Ratio;
use serde::de::{Deserialize, Deserializer};
use serde::ser::{Serialize, SerializeStruct, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DistributionError {
    #[error("counts sum to {sum} but total is {total}")]
    SumMismatch { sum: u128, total: u64 },
    #[error("distribution has no outcome with a positive count")]
    EmptySupport,
}

/// `multiplicity` outcomes that each occur `count` times.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Run {
    pub count: u64,
    pub multiplicity: u64,
}

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Distribution {
    runs: Vec<Run>,
    total: u64,
}

impl Distribution {
    /// Builds a canonical distribution from raw outcome counts. Zero counts are
    /// dropped, the rest sorted non-increasing.
    pub fn from_counts(raw: &[u64], total: u64) -> Result<Self, DistributionError> {
        Self::from_runs(raw.iter().map(|&count| Run { count, multiplicity: 1 }), total)
    }

    /// Builds a canonical distribution from runs in any order; runs with a
    /// zero count or multiplicity are ignored and equal counts are merged.
    pub fn from_runs<I>(runs: I, total: u64) -> Result<Self, DistributionError>
    where
        I: IntoIterator<Item = Run>,
    {
        let mut runs: Vec<Run> = runs.into_iter().filter(|r| r.count > 0 && r.multiplicity > 0).collect();
        let sum: u128 = runs.iter().map(|r| r.count as u128 * r.multiplicity as u128).sum();
        if runs.is_empty() {
            return Err(DistributionError::EmptySupport);
        }
        if sum != total as u128 {
            return Err(DistributionError::SumMismatch { sum, total });
        }
        runs.sort_unstable_by_key(|r| std::cmp::Reverse(r.count));
        let mut merged: Vec<Run> = Vec::with_capacity(runs.len());
        for run in runs {
            match merged.last_mut() {
                Some(last) if last.count == run.count => last.multiplicity += run.multiplicity,
                _ => merged.push(run),
            }
        }
        Ok(Self { runs: merged, total })
    }

    /// Uniform distribution over `size` outcomes, each of count one.
    pub fn uniform(size: u64) -> Result<Self, DistributionError> {
        Self::from_runs([Run { count: 1, multiplicity: size }], size)
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn runs(&self) -> &[Run] {
        &self.runs
    }

    /// `||p||_0`: the number of realized outcomes.
    pub fn support_size(&self) -> u64 {
        self.runs.iter().map(|r| r.multiplicity).sum()
    }

    pub fn max_count(&self) -> u64 {
        self.runs[0].count
    }

    /// `||p||_inf` as an exact reduced fraction.
    pub fn max_prob(&self) -> Ratio<u64> {
        Ratio::new(self.max_count(), self.total)
    }

    /// `1 - ||p||_inf` as an exact reduced fraction.
    pub fn complement_of_max(&self) -> Ratio<u64> {
        Ratio::new(self.total - self.max_count(), self.total)
    }

    pub fn is_point_mass(&self) -> bool {
        self.max_count() == self.total
    }

    pub fn is_uniform(&self) -> bool {
        self.runs.len() == 1
    }

    /// Counts in canonical (non-increasing) order, expanded from the runs.
    pub fn counts(&self) -> impl Iterator<Item = u64> + '_ {
        self.runs.iter().flat_map(|r| std::iter::repeat_n(r.count, r.multiplicity as usize))
    }

    pub fn to_counts(&self) -> Vec<u64> {
        self.counts().collect()
    }
}

impl fmt::Debug for Distribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Distribution(total={}, ", self.total)?;
        let mut list = f.debug_list();
        for r in &self.runs {
            if r.multiplicity == 1 {
                list.entry(&r.count);
            } else {
                list.entry(&format_args!("{}x{}", r.count, r.multiplicity));
            }
        }
        list.finish()?;
        write!(f, ")")
    }
}

impl Serialize for Distribution {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut s = serializer.serialize_struct("Distribution", 2)?;
        s.serialize_field("total", &self.total)?;
        s.serialize_field("counts", &self.to_counts())?;
        s.end()
    }
}

#[derive(serde::Deserialize)]
struct RawDistribution {
    total: u64,
    counts: Vec<u64>,
}

impl<'de> Deserialize<'de> for Distribution {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = RawDistribution::deserialize(deserializer)?;
        Distribution::from_counts(&raw.counts, raw.total).map_err(serde::de::Error::custom)
    }
}
