//! Explicit program pairs whose leakage orders disagree.
//!
//! A [`ConflictWitness`] is a pair of output distributions `(p, q)` with
//! `H_a(p) > H_a(q)` and `H_b(p) < H_b(q)`. `p` always has the shape
//! "one outcome of probability `p0`, then `n = 2^e` equal outcomes", `q` is
//! uniform. Which construction is used depends on where the orders sit
//! relative to 1 (with `a < b`):
//!
//! * `1 < a < b`: `p0` strictly between `2^-(1-1/b)` and `2^-(1-1/a)`, `q`
//!   uniform over two outcomes, `n` doubled until both inequalities hold.
//! * `b < 1`: `p0 = 1/2`, `q` uniform over `m` outcomes with
//!   `H_b(p) < log2 m < H_a(p)`.
//! * `a < 1 <= b`: the previous construction for `(a, (a + 1) / 2)`, which
//!   also separates `b` because `H_b(p) <= H_(a+1)/2(p)` and `q` is uniform.
//! * `a = 1 < b`: the first construction for `((1 + b) / 2, b)` (order 2
//!   when `b` is infinite).
//!
//! A [`FiniteGapWitness`] is a pair whose order-`a` ratio exceeds `D` while
//! the min-entropy ratio is below `1 / D`.
//!
//! Distributions are symbolic so that tails of `2^400` outcomes stay exact;
//! entropies use log-domain blocks. Realizing a pair as programs rounds the
//! probabilities to counts over a power-of-two input space.

use std::f64::consts::LN_2;
use std::fmt;

use num_rational::Ratio;
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::distributions::{Distribution, Run};
use crate::entropy::{ln_prob, renyi_entropy, renyi_entropy_blocks, ProbabilityBlock, RenyiOrder};

/// Largest tail exponent tried by the conflict search.
pub const MAX_TAIL_LOG2: u32 = 40;
/// Slack required on every inequality a search accepts, in bits.
const SEARCH_MARGIN: f64 = 1e-9;

/// Number of doublings of `|A|` tried when realizing a witness.
const REALIZATION_STEPS: u32 = 24;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WitnessError {
    #[error("orders must differ")]
    SameOrders,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("no witness found: {0}")]
    SearchExhausted(String),
    #[error("verification failed: {inequality} does not hold")]
    VerificationFailed { inequality: String, certification: Box<Certification> },
}

fn serialize_ratio<S: Serializer>(r: &Ratio<u64>, serializer: S) -> Result<S::Ok, S::Error> {
    serializer.collect_str(&format_args!("{}/{}", r.numer(), r.denom()))
}

/// A witness distribution, described exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum WitnessDistribution {
    /// Probability `p0`, then `2^tail_log2` outcomes sharing `1 - p0` equally.
    Peaked {
        #[serde(serialize_with = "serialize_ratio")]
        p0: Ratio<u64>,
        tail_log2: u32,
    },
    Uniform {
        outcomes: u64,
    },
}

impl WitnessDistribution {
    pub fn blocks(&self) -> Vec<ProbabilityBlock> {
        match *self {
            WitnessDistribution::Peaked { p0, tail_log2 } => {
                let (num, den) = (*p0.numer(), *p0.denom());
                let ln_tail_count = tail_log2 as f64 * LN_2;
                vec![
                    ProbabilityBlock { ln_p: ln_prob(num, den), mass: num as f64 / den as f64, ln_count: 0.0 },
                    ProbabilityBlock {
                        ln_p: ln_prob(den - num, den) - ln_tail_count,
                        mass: (den - num) as f64 / den as f64,
                        ln_count: ln_tail_count,
                    },
                ]
            }
            WitnessDistribution::Uniform { outcomes } => {
                let ln_m = (outcomes as f64).ln();
                vec![ProbabilityBlock { ln_p: -ln_m, mass: 1.0, ln_count: ln_m }]
            }
        }
    }

    /// Renyi entropy in bits.
    pub fn entropy(&self, order: RenyiOrder) -> f64 {
        renyi_entropy_blocks(&self.blocks(), order)
    }

    /// Number of outcomes, when it fits in 128 bits.
    pub fn outcomes(&self) -> Option<u128> {
        match *self {
            WitnessDistribution::Peaked { tail_log2, .. } => {
                1u128.checked_shl(tail_log2).and_then(|n| n.checked_add(1))
            }
            WitnessDistribution::Uniform { outcomes } => Some(outcomes as u128),
        }
    }

    /// Distinct outcome probabilities.
    fn probabilities(&self) -> Vec<f64> {
        match *self {
            WitnessDistribution::Peaked { p0, tail_log2 } => {
                let p = *p0.numer() as f64 / *p0.denom() as f64;
                let sub = (*p0.denom() - *p0.numer()) as f64 / *p0.denom() as f64;
                vec![p, sub / (tail_log2 as f64).exp2()]
            }
            WitnessDistribution::Uniform { outcomes } => vec![1.0 / outcomes as f64],
        }
    }

    /// Integer counts over `|A| = 2^size_log2` by largest-remainder rounding.
    /// `None` when some outcome would receive no input.
    pub fn realize(&self, size_log2: u32) -> Option<Distribution> {
        if size_log2 > 63 {
            return None;
        }
        let total = 1u64 << size_log2;
        let runs = match *self {
            WitnessDistribution::Peaked { p0, tail_log2 } => {
                if tail_log2 > size_log2 {
                    return None;
                }
                let (num, den) = (*p0.numer() as u128, *p0.denom() as u128);
                let t = total as u128;
                let n = 1u128 << tail_log2;
                let (peak, peak_rem) = ((num * t) / den, (num * t) % den);
                let share = (den - num) * (t >> tail_log2);
                let (tail, tail_rem) = (share / den, share % den);
                let mut leftover = t - peak - n * tail;
                let mut peak_extra = 0;
                let mut tail_extra = 0;
                if peak_rem >= tail_rem && leftover > 0 {
                    peak_extra = 1;
                    leftover -= 1;
                }
                tail_extra += leftover.min(n);
                leftover -= tail_extra;
                if leftover > 0 {
                    peak_extra += leftover;
                }
                let peak = (peak + peak_extra) as u64;
                let tail = tail as u64;
                let tail_extra = tail_extra as u64;
                let n = n as u64;
                if peak == 0 || tail == 0 && tail_extra < n {
                    return None;
                }
                vec![
                    Run { count: peak, multiplicity: 1 },
                    Run { count: tail + 1, multiplicity: tail_extra },
                    Run { count: tail, multiplicity: n - tail_extra },
                ]
            }
            WitnessDistribution::Uniform { outcomes } => {
                if outcomes > total {
                    return None;
                }
                let (q, r) = (total / outcomes, total % outcomes);
                vec![Run { count: q + 1, multiplicity: r }, Run { count: q, multiplicity: outcomes - r }]
            }
        };
        Distribution::from_runs(runs, total).ok()
    }

    /// Largest `|count / |A| - p|` over all outcomes of a realization.
    pub fn realization_error(&self, realized: &Distribution) -> f64 {
        let total = realized.total() as f64;
        let probabilities = self.probabilities();
        // Realized runs come from rounding each group, so every count is
        // within one of the ideal count of its group.
        realized
            .runs()
            .iter()
            .map(|r| {
                let p = r.count as f64 / total;
                probabilities.iter().map(|q| (p - q).abs()).fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max)
    }
}

impl fmt::Display for WitnessDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WitnessDistribution::Peaked { p0, tail_log2 } => {
                write!(f, "({p0}, (1-{p0})/2^{tail_log2} x 2^{tail_log2})")
            }
            WitnessDistribution::Uniform { outcomes } => write!(f, "(1/{outcomes} x {outcomes})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum WitnessCase {
    /// Both orders above 1.
    Case1,
    /// Both orders below 1.
    Case2,
    /// Orders on both sides of 1, via an auxiliary order.
    Case3,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConflictWitness {
    pub alpha: RenyiOrder,
    pub beta: RenyiOrder,
    pub case: WitnessCase,
    /// The order substituted for the one on the far side of 1 (mixed case).
    pub auxiliary_order: Option<RenyiOrder>,
    #[serde(serialize_with = "serialize_ratio")]
    pub p0: Ratio<u64>,
    /// Number of small-probability outcomes.
    pub n: u64,
    /// Size of the uniform distribution.
    pub m: u64,
    /// Distribution of the first program; leaks more at `alpha`.
    pub dist1: WitnessDistribution,
    /// Distribution of the second program; leaks more at `beta`.
    pub dist2: WitnessDistribution,
    /// Input-space size from which both programs are realizable (`n + 2`).
    pub threshold: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FiniteGapWitness {
    pub d: f64,
    pub alpha: RenyiOrder,
    pub beta: RenyiOrder,
    #[serde(serialize_with = "serialize_ratio")]
    pub p0: Ratio<u64>,
    /// `n = 2^n_log2` small-probability outcomes.
    pub n_log2: u32,
    pub dist1: WitnessDistribution,
    pub dist2: WitnessDistribution,
    /// `H_alpha(dist1) / H_alpha(dist2)`.
    pub r_alpha: f64,
    /// `H_inf(dist1) / H_inf(dist2)`.
    pub r_beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Witness {
    Conflict(ConflictWitness),
    Gap(FiniteGapWitness),
}

/// `a^-1 = 2^-(1 - 1/a)`, the admissible bound on `p0` for order `a > 1`.
fn peak_bound(order: RenyiOrder) -> f64 {
    match order {
        RenyiOrder::Infinity => 0.5,
        other => (-(1.0 - 1.0 / other.value())).exp2(),
    }
}

/// Rounds `target` to the coarsest decimal grid `10^-d`, `d >= min_digits`,
/// that lands strictly inside `(lo, hi)`.
fn decimal_inside(target: f64, lo: f64, hi: f64, min_digits: u32) -> Option<Ratio<u64>> {
    (min_digits..=15).find_map(|d| {
        let den = 10u64.pow(d);
        let num = (target * den as f64).round() as u64;
        let p = num as f64 / den as f64;
        (num > 0 && num < den && p > lo && p < hi).then(|| Ratio::new(num, den))
    })
}

fn finite(value: f64) -> RenyiOrder {
    RenyiOrder::from_value(value).expect("auxiliary orders are valid")
}

/// `(p0, e)` with `H_b(p) < 1 < H_a(p)` for `p = (p0, (1-p0)/2^e x 2^e)`, `1 < a < b`.
fn search_above_one(a: RenyiOrder, b: RenyiOrder) -> Result<(Ratio<u64>, u32), WitnessError> {
    let (lo, hi) = (peak_bound(b), peak_bound(a));
    let p0 = decimal_inside((lo + hi) / 2.0, lo, hi, 1)
        .ok_or_else(|| WitnessError::SearchExhausted(format!("no decimal p0 in ({lo}, {hi})")))?;
    for e in 1..=MAX_TAIL_LOG2 {
        let p = WitnessDistribution::Peaked { p0, tail_log2: e };
        if p.entropy(a) > 1.0 + SEARCH_MARGIN && p.entropy(b) < 1.0 - SEARCH_MARGIN {
            return Ok((p0, e));
        }
    }
    Err(WitnessError::SearchExhausted(format!("p0 = {p0}: no n <= 2^{MAX_TAIL_LOG2} separates orders {a} and {b}")))
}

/// `(e, m)` with `H_b(p) < log2 m < H_a(p)` for `p = (1/2, 1/2^(e+1) x 2^e)`, `a < b < 1`.
fn search_below_one(a: RenyiOrder, b: RenyiOrder) -> Result<(u32, u64), WitnessError> {
    let p0 = Ratio::new(1, 2);
    for e in 1..=MAX_TAIL_LOG2 {
        let p = WitnessDistribution::Peaked { p0, tail_log2: e };
        let m = p.entropy(b).exp2().floor() as u64 + 1;
        let uniform = WitnessDistribution::Uniform { outcomes: m }.entropy(a);
        if m >= 2 && uniform > p.entropy(b) + SEARCH_MARGIN && uniform < p.entropy(a) - SEARCH_MARGIN {
            return Ok((e, m));
        }
    }
    Err(WitnessError::SearchExhausted(format!("no n <= 2^{MAX_TAIL_LOG2} separates orders {a} and {b}")))
}

/// Builds a pair of distributions ordered one way by `H_alpha` and the other
/// way by `H_beta`: the first leaks more at `alpha`, less at `beta`.
pub fn build_conflict_witness(alpha: RenyiOrder, beta: RenyiOrder) -> Result<ConflictWitness, WitnessError> {
    if alpha == beta {
        return Err(WitnessError::SameOrders);
    }
    let swapped = alpha > beta;
    let (a, b) = if swapped { (beta, alpha) } else { (alpha, beta) };
    let (av, bv) = (a.value(), b.value());

    let (case, auxiliary_order, p0, tail_log2, m) = if av > 1.0 {
        let (p0, e) = search_above_one(a, b)?;
        (WitnessCase::Case1, None, p0, e, 2)
    } else if bv < 1.0 {
        let (e, m) = search_below_one(a, b)?;
        (WitnessCase::Case2, None, Ratio::new(1, 2), e, m)
    } else if av < 1.0 {
        let aux = finite((av + 1.0) / 2.0);
        let (e, m) = search_below_one(a, aux)?;
        (WitnessCase::Case3, Some(aux), Ratio::new(1, 2), e, m)
    } else {
        let aux = if bv.is_infinite() { finite(2.0) } else { finite((1.0 + bv) / 2.0) };
        let (p0, e) = search_above_one(aux, b)?;
        (WitnessCase::Case3, Some(aux), p0, e, 2)
    };

    let peaked = WitnessDistribution::Peaked { p0, tail_log2 };
    let uniform = WitnessDistribution::Uniform { outcomes: m };
    let (dist1, dist2) = if swapped { (uniform, peaked) } else { (peaked, uniform) };
    let n = 1u64 << tail_log2;
    Ok(ConflictWitness { alpha, beta, case, auxiliary_order, p0, n, m, dist1, dist2, threshold: n + 2 })
}

/// Builds a pair whose order-`alpha` leakage ratio exceeds `d` while the
/// min-entropy ratio stays below `1 / d`, for `d > 1` and `0 < alpha < 1`.
pub fn build_finite_gap_witness(d: f64, alpha: RenyiOrder) -> Result<FiniteGapWitness, WitnessError> {
    if !(d.is_finite() && d > 1.0) {
        return Err(WitnessError::InvalidParameter(format!("D must be a finite real above 1, got {d}")));
    }
    let a = match alpha {
        RenyiOrder::Finite(a) if a.get() < 1.0 => a.get(),
        other => return Err(WitnessError::InvalidParameter(format!("alpha must lie in (0, 1), got {other}"))),
    };
    let lo = (-1.0 / d).exp2();
    let p0 = decimal_inside((1.0 + lo) / 2.0, lo, 1.0, 12)
        .ok_or_else(|| WitnessError::SearchExhausted(format!("no decimal p0 in ({lo}, 1)")))?;
    let complement = (*p0.denom() - *p0.numer()) as f64 / *p0.denom() as f64;
    let bound = d - a / (1.0 - a) * complement.log2();
    let n_log2 = (bound.floor() + 1.0).max(1.0);
    if n_log2 > u32::MAX as f64 {
        return Err(WitnessError::SearchExhausted(format!("tail exponent {n_log2} is out of range")));
    }
    let n_log2 = n_log2 as u32;
    let dist1 = WitnessDistribution::Peaked { p0, tail_log2: n_log2 };
    let dist2 = WitnessDistribution::Uniform { outcomes: 2 };
    let r_alpha = dist1.entropy(alpha) / dist2.entropy(alpha);
    let r_beta = dist1.entropy(RenyiOrder::Infinity) / dist2.entropy(RenyiOrder::Infinity);
    Ok(FiniteGapWitness { d, alpha, beta: RenyiOrder::Infinity, p0, n_log2, dist1, dist2, r_alpha, r_beta })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntropyValue {
    pub distribution: String,
    pub order: RenyiOrder,
    pub bits: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Inequality {
    pub statement: String,
    pub lhs: f64,
    pub rhs: f64,
    /// Positive exactly when the inequality holds.
    pub margin: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RealizationCheck {
    pub size_log2: u32,
    /// Both distributions received a positive count for every outcome.
    pub realizable: bool,
    pub holds: bool,
    /// Largest deviation of a realized probability, times `|A|`.
    pub max_error_times_size: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Realization {
    /// Smallest tested `log2 |A|` at which both inequalities hold.
    pub first_size_log2: Option<u32>,
    pub checks: Vec<RealizationCheck>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Certification {
    pub entropies: Vec<EntropyValue>,
    pub inequalities: Vec<Inequality>,
    pub margins: (f64, f64),
    pub realization: Realization,
    pub pass: bool,
}

fn greater(statement: String, lhs: f64, rhs: f64) -> Inequality {
    Inequality { statement, lhs, rhs, margin: lhs - rhs, holds: lhs > rhs }
}

fn less(statement: String, lhs: f64, rhs: f64) -> Inequality {
    Inequality { statement, lhs, rhs, margin: rhs - lhs, holds: lhs < rhs }
}

type Checker = dyn Fn(&dyn Fn(RenyiOrder, bool) -> f64) -> [Inequality; 2];

fn realize_pair(dist1: &WitnessDistribution, dist2: &WitnessDistribution, check: &Checker) -> Realization {
    let outcomes = dist1.outcomes().zip(dist2.outcomes()).map(|(a, b)| a.max(b));
    let Some(start) = outcomes.and_then(|n| n.checked_add(1)).map(|n| n.next_power_of_two().trailing_zeros()) else {
        return Realization { first_size_log2: None, checks: vec![], note: Some("more outcomes than 2^127".into()) };
    };
    if start > 63 {
        return Realization {
            first_size_log2: None,
            checks: vec![],
            note: Some(format!("needs |A| >= 2^{start}, beyond 64-bit sizes")),
        };
    }
    let mut checks = Vec::new();
    let mut first = None;
    for j in start..=(start + REALIZATION_STEPS).min(63) {
        let realized = dist1.realize(j).zip(dist2.realize(j));
        let Some((r1, r2)) = realized else {
            checks.push(RealizationCheck {
                size_log2: j,
                realizable: false,
                holds: false,
                max_error_times_size: f64::NAN,
            });
            continue;
        };
        let entropy = |order: RenyiOrder, first: bool| renyi_entropy(if first { &r1 } else { &r2 }, order);
        let holds = check(&entropy).iter().all(|i| i.holds);
        let error = dist1.realization_error(&r1).max(dist2.realization_error(&r2)) * (1u64 << j) as f64;
        checks.push(RealizationCheck { size_log2: j, realizable: true, holds, max_error_times_size: error });
        if holds {
            first = Some(j);
            break;
        }
    }
    Realization { first_size_log2: first, checks, note: None }
}

fn certify(
    dist1: &WitnessDistribution,
    dist2: &WitnessDistribution,
    orders: [RenyiOrder; 2],
    check: &Checker,
) -> Result<Certification, WitnessError> {
    let ideal = |order: RenyiOrder, first: bool| if first { dist1.entropy(order) } else { dist2.entropy(order) };
    let inequalities = check(&ideal);
    let mut entropies = Vec::new();
    for order in orders {
        for (name, first) in [("dist1", true), ("dist2", false)] {
            entropies.push(EntropyValue { distribution: name.into(), order, bits: ideal(order, first) });
        }
    }
    let failed = inequalities.iter().find(|i| !i.holds).map(|i| i.statement.clone());
    let realization = realize_pair(dist1, dist2, check);
    let certification = Certification {
        margins: (inequalities[0].margin, inequalities[1].margin),
        pass: failed.is_none(),
        entropies,
        inequalities: inequalities.into(),
        realization,
    };
    match failed {
        Some(inequality) => {
            Err(WitnessError::VerificationFailed { inequality, certification: Box::new(certification) })
        }
        None => Ok(certification),
    }
}

pub fn verify_conflict(w: &ConflictWitness) -> Result<Certification, WitnessError> {
    let (alpha, beta) = (w.alpha, w.beta);
    let check = move |h: &dyn Fn(RenyiOrder, bool) -> f64| {
        [
            greater(format!("H_{alpha}(dist1) > H_{alpha}(dist2)"), h(alpha, true), h(alpha, false)),
            less(format!("H_{beta}(dist1) < H_{beta}(dist2)"), h(beta, true), h(beta, false)),
        ]
    };
    certify(&w.dist1, &w.dist2, [alpha, beta], &check)
}

pub fn verify_gap(w: &FiniteGapWitness) -> Result<Certification, WitnessError> {
    let (alpha, beta, d) = (w.alpha, w.beta, w.d);
    let check = move |h: &dyn Fn(RenyiOrder, bool) -> f64| {
        [
            greater(format!("H_{alpha}(dist1) / H_{alpha}(dist2) > D"), h(alpha, true) / h(alpha, false), d),
            less(format!("H_{beta}(dist1) / H_{beta}(dist2) < 1/D"), h(beta, true) / h(beta, false), 1.0 / d),
        ]
    };
    certify(&w.dist1, &w.dist2, [alpha, beta], &check)
}

/// Recomputes the entropies of a witness, checks its strict inequalities and
/// tries to realize both distributions as programs on a common input space.
pub fn verify_witness(w: &Witness) -> Result<Certification, WitnessError> {
    match w {
        Witness::Conflict(c) => verify_conflict(c),
        Witness::Gap(g) => verify_gap(g),
    }
}
