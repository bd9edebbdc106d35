//! Asymptotic comparison of leakage series and leakage-level classification.
//!
//! Two families are compared through the ratio `r(n) = IL(C1, n) / IL(C2, n)`.
//! Its upper and lower limits `f` and `g` are estimated from the tail of a
//! finite schedule:
//!
//! * If the tail is non-monotone and spans more than `osc_factor`, `f` comes
//!   from the local maxima of the tail and `g` from its local minima.
//!   Otherwise `f = g` = the trend of the whole tail.
//! * A trend is `Infinite` or `Zero` when `log2 r` moves monotonically with
//!   slope beyond `slope_delta` against `log2 n`, or beyond `log_delta`
//!   against `log2 log2 n` (this catches ratios that drift like a power of
//!   `log n`). Anything else is `Finite(geometric mean)`.
//!
//! Inverting the ratio mirrors every step, so swapping the two families swaps
//! `f` with `1/g`.

use std::cmp::Ordering;
use std::fmt;

use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::entropy::{peak_ratio, EntropyError, RenyiOrder};
use crate::leakage::{finite_order_check, leakage_series, LeakageError, LeakageSeries, OrderClass, SizeSchedule};
use crate::programs::ProgramFamily;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ComparatorError {
    #[error("series are sampled at different sizes: {0}")]
    ScheduleMismatch(String),
    #[error("series have different orders ({0} vs {1})")]
    OrderMismatch(RenyiOrder, RenyiOrder),
    #[error("expected a series of order {expected}, got {got}")]
    UnexpectedOrder { expected: RenyiOrder, got: RenyiOrder },
    #[error("degenerate series: {0}")]
    DegenerateSeries(String),
    #[error("need at least {needed} points, got {got}")]
    InsufficientPoints { needed: usize, got: usize },
    #[error("{0} is not finite-order over the schedule")]
    NotFiniteOrder(String),
    #[error(transparent)]
    Leakage(#[from] LeakageError),
    #[error(transparent)]
    Entropy(#[from] EntropyError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorConfig {
    /// Tail length; `None` means `max(4, points / 2)`.
    pub window: Option<usize>,
    /// Threshold on the slope of `log2 r` against `log2 n`.
    pub slope_delta: f64,
    /// Threshold on the slope of `log2 r` against `log2 log2 n`.
    pub log_delta: f64,
    /// Tail max/min spread above which a non-monotone tail is oscillating.
    pub osc_factor: f64,
    pub min_points: usize,
    /// Largest `L` in the `(log n)^L / n` dictionary entries.
    pub max_polylog: u32,
    /// Largest RMS residual (in `log2` units) accepted for a power-law fit.
    pub power_law_tolerance: f64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            window: None,
            slope_delta: 0.1,
            log_delta: 0.5,
            osc_factor: 8.0,
            min_points: 6,
            max_polylog: 4,
            power_law_tolerance: 0.1,
        }
    }
}

impl EstimatorConfig {
    pub fn tail_len(&self, points: usize) -> usize {
        self.window.unwrap_or((points / 2).max(4)).clamp(1, points)
    }
}

/// Estimated limit of a ratio sequence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Limit {
    Zero,
    Finite(f64),
    Infinite,
}

impl Limit {
    fn rank(self) -> u8 {
        match self {
            Limit::Zero => 0,
            Limit::Finite(_) => 1,
            Limit::Infinite => 2,
        }
    }

    pub fn recip(self) -> Self {
        match self {
            Limit::Zero => Limit::Infinite,
            Limit::Finite(v) => Limit::Finite(1.0 / v),
            Limit::Infinite => Limit::Zero,
        }
    }

    pub fn is_zero(self) -> bool {
        self == Limit::Zero
    }

    pub fn is_infinite(self) -> bool {
        self == Limit::Infinite
    }
}

impl PartialOrd for Limit {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match (self, other) {
            (Limit::Finite(a), Limit::Finite(b)) => a.partial_cmp(b),
            _ => Some(self.rank().cmp(&other.rank())),
        }
    }
}

impl fmt::Display for Limit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Limit::Zero => f.write_str("0"),
            Limit::Finite(v) => write!(f, "{v}"),
            Limit::Infinite => f.write_str("inf"),
        }
    }
}

impl Serialize for Limit {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioEstimate {
    pub f_hat: Limit,
    pub g_hat: Limit,
    pub order: RenyiOrder,
    /// `(size, ratio)` for every schedule point.
    pub evidence: Vec<(u64, f64)>,
    /// Least-squares slope of `log2 r` against `log2 n` over the tail.
    pub tail_slope: f64,
    pub oscillating: bool,
    pub window: usize,
}

impl RatioEstimate {
    /// The estimate of the inverse ratio.
    pub fn inverted(&self) -> Self {
        Self {
            f_hat: self.g_hat.recip(),
            g_hat: self.f_hat.recip(),
            order: self.order,
            evidence: self.evidence.iter().map(|&(n, r)| (n, 1.0 / r)).collect(),
            tail_slope: -self.tail_slope,
            oscillating: self.oscillating,
            window: self.window,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    FirstHigher,
    SecondHigher,
    SameLevel,
    Incomparable,
}

impl Verdict {
    /// Decision table on the estimated limits of `IL(C1) / IL(C2)`.
    pub fn from_limits(f: Limit, g: Limit) -> Self {
        match (f, g) {
            (Limit::Infinite, g) if !g.is_zero() => Verdict::FirstHigher,
            (f, Limit::Zero) if !f.is_infinite() => Verdict::SecondHigher,
            (Limit::Finite(_), Limit::Finite(_)) => Verdict::SameLevel,
            _ => Verdict::Incomparable,
        }
    }

    pub fn reversed(self) -> Self {
        match self {
            Verdict::FirstHigher => Verdict::SecondHigher,
            Verdict::SecondHigher => Verdict::FirstHigher,
            other => other,
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub first: String,
    pub second: String,
    pub verdict: Verdict,
    pub estimate: RatioEstimate,
}

fn ols_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

fn ols_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let slope = ols_slope(xs, ys);
    let n = xs.len() as f64;
    let intercept = (ys.iter().sum::<f64>() - slope * xs.iter().sum::<f64>()) / n;
    let rms = (xs.iter().zip(ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum::<f64>() / n).sqrt();
    (slope, intercept, rms)
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

const MONOTONE_TOLERANCE: f64 = 1e-12;

fn non_decreasing(ys: &[f64]) -> bool {
    ys.windows(2).all(|w| w[1] >= w[0] - MONOTONE_TOLERANCE)
}

fn non_increasing(ys: &[f64]) -> bool {
    ys.windows(2).all(|w| w[1] <= w[0] + MONOTONE_TOLERANCE)
}

/// Trend of `(log2 n, log2 r)` points.
fn trend(log_n: &[f64], log_r: &[f64], config: &EstimatorConfig) -> Limit {
    if log_n.len() >= 2 {
        let up = non_decreasing(log_r);
        let down = non_increasing(log_r);
        let slope = ols_slope(log_n, log_r);
        if slope > config.slope_delta && up {
            return Limit::Infinite;
        }
        if slope < -config.slope_delta && down {
            return Limit::Zero;
        }
        let log_log_n: Vec<f64> = log_n.iter().map(|x| x.log2()).collect();
        let elasticity = ols_slope(&log_log_n, log_r);
        if elasticity > config.log_delta && up {
            return Limit::Infinite;
        }
        if elasticity < -config.log_delta && down {
            return Limit::Zero;
        }
    }
    Limit::Finite(mean(log_r).exp2())
}

fn local_extrema(ys: &[f64], keep: impl Fn(f64, f64) -> bool) -> Vec<usize> {
    (0..ys.len())
        .filter(|&i| (i == 0 || keep(ys[i], ys[i - 1])) && (i + 1 == ys.len() || keep(ys[i], ys[i + 1])))
        .collect()
}

fn check_pair(s1: &LeakageSeries, s2: &LeakageSeries, config: &EstimatorConfig) -> Result<(), ComparatorError> {
    if s1.order != s2.order {
        return Err(ComparatorError::OrderMismatch(s1.order, s2.order));
    }
    if s1.len() != s2.len() || s1.sizes().zip(s2.sizes()).any(|(a, b)| a != b) {
        return Err(ComparatorError::ScheduleMismatch(format!("{} vs {}", s1.family, s2.family)));
    }
    if s1.len() < config.min_points {
        return Err(ComparatorError::InsufficientPoints { needed: config.min_points, got: s1.len() });
    }
    Ok(())
}

/// Estimates the upper and lower limits of `s1 / s2`.
///
/// Both series must share their order and sizes; every value of `s2` must be
/// positive. A numerator that vanishes on the whole tail gives `Zero` limits.
pub fn estimate_ratio_limits(
    s1: &LeakageSeries,
    s2: &LeakageSeries,
    config: &EstimatorConfig,
) -> Result<RatioEstimate, ComparatorError> {
    check_pair(s1, s2, config)?;
    if let Some(p) = s2.points.iter().find(|p| p.value <= 0.0) {
        return Err(ComparatorError::DegenerateSeries(format!("{} vanishes at |A| = {}", s2.family, p.size)));
    }
    let evidence: Vec<(u64, f64)> =
        s1.points.iter().zip(&s2.points).map(|(a, b)| (a.size, a.value / b.value)).collect();
    let window = config.tail_len(evidence.len());
    let tail = &evidence[evidence.len() - window..];
    let zeros = tail.iter().filter(|&&(_, r)| r == 0.0).count();
    if zeros == tail.len() {
        return Ok(RatioEstimate {
            f_hat: Limit::Zero,
            g_hat: Limit::Zero,
            order: s1.order,
            evidence,
            tail_slope: f64::NEG_INFINITY,
            oscillating: false,
            window,
        });
    }
    if zeros > 0 {
        return Err(ComparatorError::DegenerateSeries(format!("{} vanishes on part of the tail", s1.family)));
    }
    let log_n: Vec<f64> = tail.iter().map(|&(n, _)| (n as f64).log2()).collect();
    let log_r: Vec<f64> = tail.iter().map(|&(_, r)| r.log2()).collect();
    let tail_slope = ols_slope(&log_n, &log_r);
    let spread =
        log_r.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - log_r.iter().cloned().fold(f64::INFINITY, f64::min);
    let monotone = non_decreasing(&log_r) || non_increasing(&log_r);
    let oscillating = !monotone && spread > config.osc_factor.log2();

    let (f_hat, g_hat) = if oscillating {
        let pick = |idx: Vec<usize>| -> Limit {
            let xs: Vec<f64> = idx.iter().map(|&i| log_n[i]).collect();
            let ys: Vec<f64> = idx.iter().map(|&i| log_r[i]).collect();
            trend(&xs, &ys, config)
        };
        let f = pick(local_extrema(&log_r, |a, b| a >= b));
        let g = pick(local_extrema(&log_r, |a, b| a <= b));
        if f >= g {
            (f, g)
        } else {
            (g, f)
        }
    } else {
        let t = trend(&log_n, &log_r, config);
        (t, t)
    };
    Ok(RatioEstimate { f_hat, g_hat, order: s1.order, evidence, tail_slope, oscillating, window })
}

fn all_zero(s: &LeakageSeries) -> bool {
    s.values().all(|v| v == 0.0)
}

/// Verdict for a pair of series.
///
/// Two identically vanishing series are at the same level. A vanishing
/// denominator is handled by estimating the inverse ratio.
pub fn compare_series(
    s1: &LeakageSeries,
    s2: &LeakageSeries,
    config: &EstimatorConfig,
) -> Result<Comparison, ComparatorError> {
    check_pair(s1, s2, config)?;
    let estimate = if all_zero(s1) && all_zero(s2) {
        RatioEstimate {
            f_hat: Limit::Finite(1.0),
            g_hat: Limit::Finite(1.0),
            order: s1.order,
            evidence: s1.sizes().map(|n| (n, 1.0)).collect(),
            tail_slope: 0.0,
            oscillating: false,
            window: config.tail_len(s1.len()),
        }
    } else if s2.values().any(|v| v == 0.0) && s1.values().all(|v| v > 0.0) {
        estimate_ratio_limits(s2, s1, config)?.inverted()
    } else {
        estimate_ratio_limits(s1, s2, config)?
    };
    Ok(Comparison {
        first: s1.family.clone(),
        second: s2.family.clone(),
        verdict: Verdict::from_limits(estimate.f_hat, estimate.g_hat),
        estimate,
    })
}

/// Compares two families through their min-entropy leakage.
pub fn compare(
    c1: &ProgramFamily,
    c2: &ProgramFamily,
    schedule: &SizeSchedule,
    config: &EstimatorConfig,
) -> Result<Comparison, ComparatorError> {
    compare_at_order(c1, c2, schedule, RenyiOrder::Infinity, config)
}

/// [`compare`] on the leakage series of another order.
pub fn compare_at_order(
    c1: &ProgramFamily,
    c2: &ProgramFamily,
    schedule: &SizeSchedule,
    order: RenyiOrder,
    config: &EstimatorConfig,
) -> Result<Comparison, ComparatorError> {
    let s1 = leakage_series(c1, schedule, order)?;
    let s2 = leakage_series(c2, schedule, order)?;
    compare_series(&s1, &s2, config)
}

/// Canonical rate functions for leakage levels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RateTag {
    Constant,
    LogOverN,
    InvSqrtN,
    InvN,
    /// `(log n)^L / n`.
    PolyLogOverN(u32),
    /// `n^gamma`.
    PowerLaw(f64),
    Unclassified,
}

impl RateTag {
    /// `PolyLogOverN(0)` is `InvN` and `PolyLogOverN(1)` is `LogOverN`.
    pub fn canonical(self) -> Self {
        match self {
            RateTag::PolyLogOverN(0) => RateTag::InvN,
            RateTag::PolyLogOverN(1) => RateTag::LogOverN,
            other => other,
        }
    }

    /// The dictionary name and any equivalent names.
    pub fn aliases(self) -> Vec<String> {
        match self.canonical() {
            RateTag::InvN => vec!["InvN".into(), "PolyLogOverN(0)".into()],
            RateTag::LogOverN => vec!["LogOverN".into(), "PolyLogOverN(1)".into()],
            other => vec![other.to_string()],
        }
    }

    /// `log2 rho(n)` for dictionary entries.
    fn log2_rate(self, n: f64) -> Option<f64> {
        let k = n.log2();
        Some(match self.canonical() {
            RateTag::Constant => 0.0,
            RateTag::InvSqrtN => -0.5 * k,
            RateTag::InvN => -k,
            RateTag::LogOverN => k.log2() - k,
            RateTag::PolyLogOverN(l) => l as f64 * k.log2() - k,
            RateTag::PowerLaw(_) | RateTag::Unclassified => return None,
        })
    }
}

/// Equality up to the `PolyLogOverN` aliases; power laws compare exponents.
pub fn same_level(a: RateTag, b: RateTag) -> bool {
    a.canonical() == b.canonical()
}

impl fmt::Display for RateTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RateTag::PolyLogOverN(l) => write!(f, "PolyLogOverN({l})"),
            RateTag::PowerLaw(g) => write!(f, "PowerLaw({g})"),
            other => fmt::Debug::fmt(other, f),
        }
    }
}

impl Serialize for RateTag {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CandidateFit {
    pub tag: RateTag,
    /// Slope of `log2(value / rho)` against `log2 n` over the tail.
    pub slope: f64,
    /// Tail geometric mean of `value / rho`.
    pub constant: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateClass {
    pub tag: RateTag,
    /// `None` exactly when the series is unclassified.
    pub fitted_constant: Option<f64>,
    pub window: usize,
    pub candidates: Vec<CandidateFit>,
}

impl RateClass {
    pub fn same_level(&self, tag: RateTag) -> bool {
        same_level(self.tag, tag)
    }
}

fn dictionary(config: &EstimatorConfig) -> Vec<RateTag> {
    let mut tags = vec![RateTag::Constant, RateTag::InvSqrtN, RateTag::InvN, RateTag::LogOverN];
    tags.extend((2..=config.max_polylog).map(RateTag::PolyLogOverN));
    tags
}

/// Leakage level of a min-entropy series: the dictionary rate whose
/// normalized tail is flattest, a power-law fit otherwise.
pub fn classify_level(s: &LeakageSeries, config: &EstimatorConfig) -> Result<RateClass, ComparatorError> {
    if s.order != RenyiOrder::Infinity {
        return Err(ComparatorError::UnexpectedOrder { expected: RenyiOrder::Infinity, got: s.order });
    }
    if s.len() < config.min_points {
        return Err(ComparatorError::InsufficientPoints { needed: config.min_points, got: s.len() });
    }
    if let Some(p) = s.points.iter().find(|p| !(p.value > 0.0 && p.value.is_finite())) {
        return Err(ComparatorError::DegenerateSeries(format!("{} is {} at |A| = {}", s.family, p.value, p.size)));
    }
    let window = config.tail_len(s.len());
    let tail = &s.points[s.len() - window..];
    let log_n: Vec<f64> = tail.iter().map(|p| (p.size as f64).log2()).collect();
    let log_v: Vec<f64> = tail.iter().map(|p| p.value.log2()).collect();

    let candidates: Vec<CandidateFit> = dictionary(config)
        .into_iter()
        .map(|tag| {
            let normalized: Vec<f64> = tail
                .iter()
                .zip(&log_v)
                .map(|(p, lv)| lv - tag.log2_rate(p.size as f64).expect("dictionary entry"))
                .collect();
            CandidateFit { tag, slope: ols_slope(&log_n, &normalized), constant: mean(&normalized).exp2() }
        })
        .collect();
    let best = candidates
        .iter()
        .filter(|c| c.slope.abs() <= config.slope_delta)
        .min_by(|a, b| a.slope.abs().total_cmp(&b.slope.abs()));
    if let Some(best) = best {
        return Ok(RateClass { tag: best.tag, fitted_constant: Some(best.constant), window, candidates });
    }
    let (gamma, intercept, rms) = ols_fit(&log_n, &log_v);
    let (tag, fitted_constant) = if rms <= config.power_law_tolerance {
        (RateTag::PowerLaw(gamma), Some(intercept.exp2()))
    } else {
        (RateTag::Unclassified, None)
    };
    Ok(RateClass { tag, fitted_constant, window, candidates })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderRatios {
    pub order: RenyiOrder,
    pub min: f64,
    pub max: f64,
    /// `(size, IL / T)` per schedule point.
    pub ratios: Vec<(u64, f64)>,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundednessReport {
    pub family: String,
    pub orders: Vec<OrderRatios>,
    pub pass: bool,
}

/// Range of `IL_a / T_a` over the schedule for each order. The ratios are
/// bounded away from 0 and infinity for finite-order families.
pub fn order_ratio_bounds(
    family: &ProgramFamily,
    schedule: &SizeSchedule,
    orders: &[RenyiOrder],
) -> Result<BoundednessReport, ComparatorError> {
    if let Some(&order) = orders.iter().find(|o| matches!(o, RenyiOrder::Zero)) {
        return Err(EntropyError::UnsupportedOrder(order).into());
    }
    let sizes = schedule.sizes().map_err(ComparatorError::Leakage)?;
    if finite_order_check(family, schedule)?.order_class != OrderClass::FopConsistent {
        return Err(ComparatorError::NotFiniteOrder(family.name().to_string()));
    }
    let channels = family.distributions_at(&sizes).map_err(LeakageError::from)?;
    let mut reports = Vec::with_capacity(orders.len());
    for &order in orders {
        let ratios = sizes
            .iter()
            .zip(&channels)
            .map(|(&n, d)| Ok((n, peak_ratio(d, order)?)))
            .collect::<Result<Vec<_>, EntropyError>>()?;
        let min = ratios.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
        let max = ratios.iter().map(|r| r.1).fold(f64::NEG_INFINITY, f64::max);
        reports.push(OrderRatios { order, min, max, ratios, pass: min > 0.0 && max.is_finite() });
    }
    let pass = reports.iter().all(|r| r.pass);
    Ok(BoundednessReport { family: family.name().to_string(), orders: reports, pass })
}
