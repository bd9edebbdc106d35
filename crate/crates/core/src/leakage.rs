//! Information leakage `IL_a = H_a(O) - H_a(O | A) = H_a(O)` of deterministic
//! programs under a uniform input, sampled along size schedules.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::distributions::Distribution;
use crate::entropy::{compensated_sum, renyi_entropy, RenyiOrder};
use crate::programs::{ProgramError, ProgramFamily};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LeakageError {
    #[error(transparent)]
    Program(#[from] ProgramError),
    #[error("invalid size schedule: {0}")]
    InvalidSchedule(String),
}

/// `IL_a(family, size)` in bits.
pub fn leakage(family: &ProgramFamily, size: u64, order: RenyiOrder) -> Result<f64, ProgramError> {
    Ok(renyi_entropy(&family.distribution_at(size)?, order))
}

/// `H_a(A) - H_a(A | O)` with the conditional entropy averaged over outputs.
///
/// Under a uniform input the input given an output `o` is uniform over the
/// `c_o` preimages, so every order gives `log2 |A| - sum_o (c_o / |A|) log2 c_o`.
pub fn alt_leakage(family: &ProgramFamily, size: u64, order: RenyiOrder) -> Result<f64, ProgramError> {
    Ok(alt_leakage_of(&family.distribution_at(size)?, order))
}

pub fn alt_leakage_of(d: &Distribution, order: RenyiOrder) -> f64 {
    let uniform_entropy = |count: u64| -> f64 {
        let u = Distribution::uniform(count).expect("count is positive");
        renyi_entropy(&u, order)
    };
    let total = d.total() as f64;
    let prior = uniform_entropy(d.total());
    let posterior = compensated_sum(
        d.runs().iter().map(|r| (r.count as f64 * r.multiplicity as f64 / total) * uniform_entropy(r.count)),
    );
    (prior - posterior).max(0.0)
}

/// Input-space sizes at which a family is sampled.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SizeSchedule {
    /// `2^j` for `j_min <= j <= j_max`.
    PowersOfTwo {
        j_min: u32,
        j_max: u32,
    },
    Explicit(Vec<u64>),
}

impl SizeSchedule {
    pub fn powers_of_two(j_min: u32, j_max: u32) -> Self {
        Self::PowersOfTwo { j_min, j_max }
    }

    /// The sizes, checked to be at least 2 and strictly increasing.
    pub fn sizes(&self) -> Result<Vec<u64>, LeakageError> {
        let sizes = match self {
            Self::PowersOfTwo { j_min, j_max } => {
                if j_min > j_max || *j_max > 63 || *j_min < 1 {
                    return Err(LeakageError::InvalidSchedule(format!(
                        "exponents must satisfy 1 <= j_min <= j_max <= 63, got {j_min}..{j_max}"
                    )));
                }
                (*j_min..=*j_max).map(|j| 1u64 << j).collect()
            }
            Self::Explicit(sizes) => sizes.clone(),
        };
        if sizes.is_empty() {
            return Err(LeakageError::InvalidSchedule("no sizes".into()));
        }
        if let Some(&s) = sizes.iter().find(|&&s| s < 2) {
            return Err(LeakageError::InvalidSchedule(format!("size {s} is below 2")));
        }
        if let Some(w) = sizes.windows(2).find(|w| w[0] >= w[1]) {
            return Err(LeakageError::InvalidSchedule(format!(
                "sizes not strictly increasing at {} -> {}",
                w[0], w[1]
            )));
        }
        Ok(sizes)
    }

    /// Moves every size to the family's next valid size, dropping duplicates
    /// and sizes with no valid successor. Returns the adapted schedule and the
    /// `(requested, used)` pairs that changed.
    pub fn fit_to(&self, family: &ProgramFamily) -> Result<(SizeSchedule, Vec<(u64, u64)>), LeakageError> {
        let mut fitted: Vec<u64> = Vec::new();
        let mut moved = Vec::new();
        for size in self.sizes()? {
            let Some(snapped) = family.snap(size) else {
                moved.push((size, 0));
                continue;
            };
            if snapped != size {
                moved.push((size, snapped));
            }
            if fitted.last().is_none_or(|&last| snapped > last) {
                fitted.push(snapped);
            }
        }
        if fitted.is_empty() {
            return Err(LeakageError::InvalidSchedule(format!("no size of the schedule fits {}", family.name())));
        }
        Ok((SizeSchedule::Explicit(fitted), moved))
    }
}

impl fmt::Display for SizeSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::PowersOfTwo { j_min, j_max } => write!(f, "2^{j_min}..2^{j_max}"),
            Self::Explicit(sizes) => {
                let parts: Vec<String> = sizes.iter().map(u64::to_string).collect();
                f.write_str(&parts.join(","))
            }
        }
    }
}

fn parse_size(text: &str) -> Result<u64, LeakageError> {
    let bad = || LeakageError::InvalidSchedule(format!("cannot parse size `{text}`"));
    match text.split_once('^') {
        Some((base, exp)) => {
            let base: u64 = base.trim().parse().map_err(|_| bad())?;
            let exp: u32 = exp.trim().parse().map_err(|_| bad())?;
            base.checked_pow(exp).ok_or_else(bad)
        }
        None => text.trim().replace('_', "").parse().map_err(|_| bad()),
    }
}

impl FromStr for SizeSchedule {
    type Err = LeakageError;

    /// `2^a..2^b` for a power-of-two range, otherwise a comma-separated list of
    /// sizes written as integers or `b^e`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Some((lo, hi)) = s.split_once("..") {
            let exponent = |t: &str| -> Result<u32, LeakageError> {
                t.trim()
                    .strip_prefix("2^")
                    .and_then(|e| e.trim().parse().ok())
                    .ok_or_else(|| LeakageError::InvalidSchedule(format!("range bounds must look like 2^j, got `{t}`")))
            };
            let schedule = Self::powers_of_two(exponent(lo)?, exponent(hi)?);
            schedule.sizes()?;
            return Ok(schedule);
        }
        let sizes = s.split(',').map(parse_size).collect::<Result<Vec<_>, _>>()?;
        let schedule = Self::Explicit(sizes);
        schedule.sizes()?;
        Ok(schedule)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub size: u64,
    pub value: f64,
}

/// `(|A|, IL_a)` samples of one family at one order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeakageSeries {
    pub family: String,
    pub order: RenyiOrder,
    pub points: Vec<SeriesPoint>,
}

impl LeakageSeries {
    pub fn sizes(&self) -> impl Iterator<Item = u64> + '_ {
        self.points.iter().map(|p| p.size)
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.iter().map(|p| p.value)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// The same series with every value multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let points = self.points.iter().map(|p| SeriesPoint { size: p.size, value: p.value * factor }).collect();
        Self { family: self.family.clone(), order: self.order, points }
    }

    /// `size,value` rows with a header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("size,value\n");
        for p in &self.points {
            out.push_str(&format!("{},{}\n", p.size, p.value));
        }
        out
    }
}

fn series_from(family: &ProgramFamily, sizes: &[u64], channels: &[Distribution], order: RenyiOrder) -> LeakageSeries {
    let points =
        sizes.iter().zip(channels).map(|(&size, d)| SeriesPoint { size, value: renyi_entropy(d, order) }).collect();
    LeakageSeries { family: family.name().to_string(), order, points }
}

pub fn leakage_series(
    family: &ProgramFamily,
    schedule: &SizeSchedule,
    order: RenyiOrder,
) -> Result<LeakageSeries, LeakageError> {
    let sizes = schedule.sizes()?;
    let channels = family.distributions_at(&sizes)?;
    Ok(series_from(family, &sizes, &channels, order))
}

/// One series per order, sharing a single channel computation per size.
pub fn leakage_series_multi(
    family: &ProgramFamily,
    schedule: &SizeSchedule,
    orders: &[RenyiOrder],
) -> Result<Vec<LeakageSeries>, LeakageError> {
    let sizes = schedule.sizes()?;
    let channels = family.distributions_at(&sizes)?;
    Ok(orders.iter().map(|&order| series_from(family, &sizes, &channels, order)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OrderClass {
    #[serde(rename = "FOP-consistent")]
    FopConsistent,
    #[serde(rename = "suspected-IOP")]
    SuspectedIop,
}

impl fmt::Display for OrderClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::FopConsistent => "FOP-consistent",
            Self::SuspectedIop => "suspected-IOP",
        })
    }
}

/// Evidence about whether a family's output support stays bounded.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FiniteOrderReport {
    pub order_class: OrderClass,
    pub max_support: u64,
    /// `(size, support size)` per schedule point.
    pub supports: Vec<(u64, u64)>,
    pub note: String,
}

/// Heuristic finite-order check: a family whose support grows between the
/// last two schedule points is reported as a suspected infinite-order program.
/// Finite samples cannot establish boundedness, so the result is evidence only.
pub fn finite_order_check(family: &ProgramFamily, schedule: &SizeSchedule) -> Result<FiniteOrderReport, LeakageError> {
    let sizes = schedule.sizes()?;
    let channels = family.distributions_at(&sizes)?;
    let supports: Vec<(u64, u64)> = sizes.iter().zip(&channels).map(|(&n, d)| (n, d.support_size())).collect();
    let max_support = supports.iter().map(|&(_, s)| s).max().unwrap_or(0);
    let grows = supports.len() >= 2 && {
        let (_, last) = supports[supports.len() - 1];
        let (_, previous) = supports[supports.len() - 2];
        last > previous
    };
    let order_class = if grows { OrderClass::SuspectedIop } else { OrderClass::FopConsistent };
    Ok(FiniteOrderReport {
        order_class,
        max_support,
        supports,
        note: "heuristic over the sampled sizes; bounded support at these sizes does not prove a finite order".into(),
    })
}
