//! Renyi entropies of output distributions, in bits.
//!
//! All orders are evaluated in the log domain around the largest probability
//! `p_max`:
//!
//! ```text
//! H_a(p) = -ln p_max + ln(1 + E) / (1 - a),   E = sum_i p_i * expm1((a - 1) ln(p_i / p_max))
//! ```
//!
//! Every term of `E` has the same sign, so nothing cancels, and `E`
//! degrades gracefully as `a -> 1` or as `p_max -> 1`. `ln p_max` itself
//! comes from the exact integer complement `(n - c_max) / n` via `ln_1p`,
//! which keeps min-entropy of near point masses accurate down to `1 / 2^63`.

use std::f64::consts::LN_2;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::distributions::Distribution;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EntropyError {
    #[error("invalid Renyi order {0}: finite orders must be positive, finite and different from 1")]
    InvalidOrder(f64),
    #[error("cannot parse Renyi order from {0:?}")]
    UnparsableOrder(String),
    #[error("order {0} is outside the domain of this function")]
    UnsupportedOrder(RenyiOrder),
    #[error("distribution is a point mass (max probability 1)")]
    DegenerateDistribution,
}

/// A finite Renyi parameter: positive, finite, not 1.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Alpha(f64);

impl Alpha {
    pub fn new(value: f64) -> Result<Self, EntropyError> {
        if value.is_finite() && value > 0.0 && value != 1.0 {
            Ok(Self(value))
        } else {
            Err(EntropyError::InvalidOrder(value))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

/// The Renyi order `alpha`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RenyiOrder {
    /// `alpha = 0`: log of the support size.
    Zero,
    /// `alpha = 1`.
    Shannon,
    Finite(Alpha),
    /// `alpha -> inf`: min-entropy.
    Infinity,
}

impl RenyiOrder {
    /// Maps a numeric order to its tag; 0, 1 and +inf get their own variants.
    pub fn from_value(value: f64) -> Result<Self, EntropyError> {
        if value == 0.0 {
            Ok(Self::Zero)
        } else if value == 1.0 {
            Ok(Self::Shannon)
        } else if value == f64::INFINITY {
            Ok(Self::Infinity)
        } else {
            Alpha::new(value).map(Self::Finite)
        }
    }

    pub fn value(self) -> f64 {
        match self {
            Self::Zero => 0.0,
            Self::Shannon => 1.0,
            Self::Finite(a) => a.get(),
            Self::Infinity => f64::INFINITY,
        }
    }
}

impl PartialOrd for RenyiOrder {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        self.value().partial_cmp(&other.value())
    }
}

impl fmt::Display for RenyiOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Zero => f.write_str("0"),
            Self::Shannon => f.write_str("1"),
            Self::Finite(a) => write!(f, "{}", a.get()),
            Self::Infinity => f.write_str("inf"),
        }
    }
}

impl FromStr for RenyiOrder {
    type Err = EntropyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "inf" | "infinity" | "min" | "∞" => Ok(Self::Infinity),
            "shannon" => Ok(Self::Shannon),
            "hartley" => Ok(Self::Zero),
            other => {
                let value: f64 = other.parse().map_err(|_| EntropyError::UnparsableOrder(s.to_string()))?;
                Self::from_value(value)
            }
        }
    }
}

impl Serialize for RenyiOrder {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for RenyiOrder {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

/// A group of equiprobable outcomes described in the log domain.
///
/// `mass` is the total probability of the group (`multiplicity * p`), so
/// groups with astronomically many outcomes stay representable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbabilityBlock {
    /// Natural log of the probability of a single outcome.
    pub ln_p: f64,
    pub mass: f64,
    /// Natural log of the number of outcomes.
    pub ln_count: f64,
}

/// `ln(count / total)`, exact-complement form when the probability exceeds 1/2.
pub(crate) fn ln_prob(count: u64, total: u64) -> f64 {
    if count as u128 * 2 > total as u128 {
        (-((total - count) as f64 / total as f64)).ln_1p()
    } else {
        (count as f64 / total as f64).ln()
    }
}

/// Log-domain blocks for an exact distribution, largest probability first.
pub fn blocks(d: &Distribution) -> Vec<ProbabilityBlock> {
    let total = d.total();
    d.runs()
        .iter()
        .map(|r| ProbabilityBlock {
            ln_p: ln_prob(r.count, total),
            mass: (r.count as u128 * r.multiplicity as u128) as f64 / total as f64,
            ln_count: (r.multiplicity as f64).ln(),
        })
        .collect()
}

/// Neumaier-compensated sum.
pub(crate) fn compensated_sum<I: IntoIterator<Item = f64>>(terms: I) -> f64 {
    let mut sum = 0.0f64;
    let mut compensation = 0.0f64;
    for x in terms {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            compensation += (sum - t) + x;
        } else {
            compensation += (x - t) + sum;
        }
        sum = t;
    }
    sum + compensation
}

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + compensated_sum(values.map(|v| (v - max).exp())).ln()
}

/// Renyi entropy in nats over log-domain blocks.
pub fn renyi_entropy_blocks_nats(blocks: &[ProbabilityBlock], order: RenyiOrder) -> f64 {
    let ln_p_max = blocks.iter().map(|b| b.ln_p).fold(f64::NEG_INFINITY, f64::max);
    let h = match order {
        RenyiOrder::Zero => log_sum_exp(blocks.iter().map(|b| b.ln_count)),
        RenyiOrder::Shannon => compensated_sum(blocks.iter().map(|b| -b.mass * b.ln_p)),
        RenyiOrder::Infinity => -ln_p_max,
        RenyiOrder::Finite(alpha) => {
            let a = alpha.get();
            let excess = compensated_sum(blocks.iter().map(|b| b.mass * ((a - 1.0) * (b.ln_p - ln_p_max)).exp_m1()));
            -ln_p_max + excess.ln_1p() / (1.0 - a)
        }
    };
    // Rounding can push an exact zero a hair below it.
    h.max(0.0)
}

pub fn renyi_entropy_blocks(blocks: &[ProbabilityBlock], order: RenyiOrder) -> f64 {
    renyi_entropy_blocks_nats(blocks, order) / LN_2
}

pub fn renyi_entropy_nats(d: &Distribution, order: RenyiOrder) -> f64 {
    match order {
        RenyiOrder::Zero => (d.support_size() as f64).ln(),
        _ => renyi_entropy_blocks_nats(&blocks(d), order),
    }
}

/// `H_alpha(d)` in bits.
pub fn renyi_entropy(d: &Distribution, order: RenyiOrder) -> f64 {
    match order {
        RenyiOrder::Zero => (d.support_size() as f64).log2(),
        _ => renyi_entropy_nats(d, order) / LN_2,
    }
}

fn complement_of_max(d: &Distribution) -> f64 {
    (d.total() - d.max_count()) as f64 / d.total() as f64
}

/// The bounding function `T_alpha` of the peaked-distribution limit laws:
/// `1 - p1` above order 1, `-(1 - p1) log2(1 - p1)` at order 1, `(1 - p1)^alpha`
/// below it. Point masses map to 0.
pub fn t_alpha(d: &Distribution, order: RenyiOrder) -> Result<f64, EntropyError> {
    let t = complement_of_max(d);
    match order {
        RenyiOrder::Zero => Err(EntropyError::UnsupportedOrder(order)),
        RenyiOrder::Infinity => Ok(t),
        RenyiOrder::Finite(a) if a.get() > 1.0 => Ok(t),
        RenyiOrder::Finite(a) => Ok(t.powf(a.get())),
        RenyiOrder::Shannon if t == 0.0 => Ok(0.0),
        RenyiOrder::Shannon => Ok(-t * t.log2()),
    }
}

/// `H_alpha(d) / T_alpha(d)`, both in bits.
pub fn peak_ratio(d: &Distribution, order: RenyiOrder) -> Result<f64, EntropyError> {
    if matches!(order, RenyiOrder::Zero) {
        return Err(EntropyError::UnsupportedOrder(order));
    }
    if d.is_point_mass() {
        return Err(EntropyError::DegenerateDistribution);
    }
    Ok(renyi_entropy(d, order) / t_alpha(d, order)?)
}
