//! Commands behind the `qif` binary.
//!
//! Each `cmd_*` function returns a [`Report`] that can be rendered as JSON,
//! CSV or a text table. JSON reports carry `"schema": "qif-report/1"`, sort
//! their keys and round floats to 12 significant digits, so identical
//! invocations give byte-identical output.

pub mod report;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use qif_core::programs::enum_cap_from_env;
use qif_core::{
    build_conflict_witness, build_finite_gap_witness, classify_level, compare_series, corpus_family,
    finite_order_check, leakage_series_multi, verify_witness, Bindings, ComparatorError, CorpusId, EstimatorConfig,
    LeakageError, LeakageSeries, ProgramError, ProgramFamily, RateTag, RenyiOrder, SizeSchedule, Witness, WitnessError,
};
use serde_json::{json, Value};
use thiserror::Error;

use report::{limit_text, num, table};
pub use report::{Format, Report, SCHEMA};

/// Smallest accepted enumeration cap.
pub const MIN_ENUM_CAP: u64 = 1 << 10;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("witness verification failed: {0}")]
    Verification(String),
}

impl CliError {
    /// 2 for usage and program errors, 3 for failed self-checks.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) => 2,
            Self::Verification(_) => 3,
        }
    }
}

impl From<ProgramError> for CliError {
    fn from(e: ProgramError) -> Self {
        Self::Usage(e.to_string())
    }
}

impl From<LeakageError> for CliError {
    fn from(e: LeakageError) -> Self {
        Self::Usage(e.to_string())
    }
}

impl From<ComparatorError> for CliError {
    fn from(e: ComparatorError) -> Self {
        Self::Usage(e.to_string())
    }
}

/// Settings shared by the analysis commands.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub schedule: SizeSchedule,
    pub orders: Vec<RenyiOrder>,
    pub estimator: EstimatorConfig,
    pub cap: u64,
    pub format: Format,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    /// Min-entropy only, default estimator, cap from `QIF_ENUM_CAP`, JSON to stdout.
    pub fn new(schedule: SizeSchedule) -> Self {
        Self {
            schedule,
            orders: vec![RenyiOrder::Infinity],
            estimator: EstimatorConfig::default(),
            cap: enum_cap_from_env(),
            format: Format::Json,
            out: None,
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Usage(m));
        if let SizeSchedule::PowersOfTwo { j_min, j_max } = self.schedule {
            if j_min >= j_max {
                return bad(format!("size range 2^{j_min}..2^{j_max} must be increasing"));
            }
        }
        self.schedule.sizes()?;
        if self.orders.is_empty() {
            return bad("at least one order is required".into());
        }
        let e = &self.estimator;
        if !(e.slope_delta > 0.0 && e.log_delta > 0.0) {
            return bad(format!("slope thresholds must be positive, got {} and {}", e.slope_delta, e.log_delta));
        }
        if e.osc_factor.is_nan() || e.osc_factor <= 1.0 {
            return bad(format!("oscillation factor must exceed 1, got {}", e.osc_factor));
        }
        if e.window.is_some_and(|w| w < 2) {
            return bad("estimator window must cover at least 2 points".into());
        }
        if self.cap < MIN_ENUM_CAP {
            return bad(format!("enumeration cap {} is below the minimum {MIN_ENUM_CAP}", self.cap));
        }
        Ok(())
    }
}

/// A program named on the command line: `corpus:P5,L=4`, `P5`,
/// or `file:path.qif,L=5`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProgramSpec {
    Corpus { id: CorpusId, params: Vec<(String, String)> },
    File { path: PathBuf, params: Vec<(String, String)> },
}

fn parse_params<'a>(items: impl Iterator<Item = &'a str>) -> Result<Vec<(String, String)>, CliError> {
    items
        .map(|item| {
            item.split_once('=')
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                .filter(|(k, _)| !k.is_empty())
                .ok_or_else(|| CliError::Usage(format!("parameter `{item}` is not NAME=VALUE")))
        })
        .collect()
}

impl FromStr for ProgramSpec {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut parts = s.split(',');
        let head = parts.next().unwrap_or_default().trim();
        let params = parse_params(parts)?;
        if let Some(path) = head.strip_prefix("file:") {
            return Ok(Self::File { path: PathBuf::from(path), params });
        }
        let id = head.strip_prefix("corpus:").unwrap_or(head).parse()?;
        Ok(Self::Corpus { id, params })
    }
}

impl ProgramSpec {
    pub fn corpus(id: CorpusId) -> Self {
        Self::Corpus { id, params: Vec::new() }
    }

    pub fn file(path: impl Into<PathBuf>) -> Self {
        Self::File { path: path.into(), params: Vec::new() }
    }

    /// Adds `NAME=VALUE` parameters; later values win.
    pub fn with_params<'a>(mut self, extra: impl IntoIterator<Item = &'a str>) -> Result<Self, CliError> {
        let extra = parse_params(extra.into_iter())?;
        match &mut self {
            Self::Corpus { params, .. } | Self::File { params, .. } => params.extend(extra),
        }
        Ok(self)
    }

    pub fn family(&self, cap: u64) -> Result<ProgramFamily, CliError> {
        match self {
            Self::Corpus { id, params } => Ok(corpus_family(*id, params)?),
            Self::File { path, params } => {
                let text = fs::read_to_string(path)
                    .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
                let mut bindings = Bindings::new();
                for (name, value) in params {
                    let v = value.replace('_', "").parse().map_err(|_| {
                        CliError::Usage(format!("parameter {name} must be an unsigned integer, got `{value}`"))
                    })?;
                    bindings.insert(name.clone(), v);
                }
                let name = path.file_stem().map_or_else(|| "program".into(), |s| s.to_string_lossy().into_owned());
                ProgramFamily::from_source(name, &text, bindings, cap)
                    .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
            }
        }
    }
}

fn snap_warnings(family: &ProgramFamily, moved: &[(u64, u64)]) -> Vec<String> {
    moved
        .iter()
        .map(|&(from, to)| match to {
            0 => format!("|A| = {from} has no valid size at or above it for {family}; dropped"),
            to => format!("|A| = {from} is outside the domain of {family}; using {to}"),
        })
        .collect()
}

fn snapped_json(moved: &[(u64, u64)]) -> Value {
    moved
        .iter()
        .map(|&(from, to)| json!({"requested": from, "used": if to == 0 { Value::Null } else { json!(to) }}))
        .collect()
}

fn series_json(s: &LeakageSeries) -> Value {
    json!({
        "order": s.order,
        "points": s.points.iter().map(|p| json!({"size": p.size, "value": p.value})).collect::<Vec<_>>(),
    })
}

fn level_name(tag: RateTag) -> String {
    let aliases = tag.aliases();
    if aliases.len() > 1 {
        format!("{} (= {})", aliases[0], aliases[1..].join(", "))
    } else {
        aliases[0].clone()
    }
}

/// Leakage series per requested order, the leakage level of the
/// min-entropy series and the finite-order heuristic.
pub fn cmd_analyze(spec: &ProgramSpec, config: &RunConfig) -> Result<Report, CliError> {
    config.validate()?;
    let family = spec.family(config.cap)?;
    let (schedule, moved) = config.schedule.fit_to(&family)?;
    let sizes = schedule.sizes()?;
    let mut orders = config.orders.clone();
    if !orders.contains(&RenyiOrder::Infinity) {
        orders.push(RenyiOrder::Infinity);
    }
    let series = leakage_series_multi(&family, &schedule, &orders)?;
    let min_entropy = series.iter().find(|s| s.order == RenyiOrder::Infinity).expect("min-entropy series");
    let shown = &series[..config.orders.len()];
    let level = classify_level(min_entropy, &config.estimator);
    let fop = finite_order_check(&family, &schedule)?;

    let level_json = match &level {
        Ok(c) => json!({
            "order": RenyiOrder::Infinity,
            "tag": c.tag,
            "aliases": c.tag.aliases(),
            "fitted_constant": c.fitted_constant,
            "window": c.window,
            "candidates": c.candidates,
        }),
        Err(e) => json!({"order": RenyiOrder::Infinity, "tag": Value::Null, "error": e.to_string()}),
    };
    let json = json!({
        "schema": SCHEMA,
        "command": "analyze",
        "program": family.name(),
        "sizes": sizes,
        "snapped": snapped_json(&moved),
        "series": shown.iter().map(series_json).collect::<Vec<_>>(),
        "level": level_json,
        "finite_order": fop,
    });

    let mut csv = String::from("program,order,size,value\n");
    for s in shown {
        for p in &s.points {
            csv.push_str(&format!("{},{},{},{}\n", family.name(), s.order, p.size, num(p.value)));
        }
    }

    let level_text = match &level {
        Ok(c) => match c.fitted_constant {
            Some(k) => format!("{} with constant {}", level_name(c.tag), num(k)),
            None => level_name(c.tag),
        },
        Err(e) => format!("unavailable ({e})"),
    };
    let mut text = format!(
        "program       {}\nsizes         {} points, {}..{}\nlevel         {}\nfinite order  {} (max support {})\n\n",
        family.name(),
        sizes.len(),
        sizes[0],
        sizes[sizes.len() - 1],
        level_text,
        fop.order_class,
        fop.max_support,
    );
    let header: Vec<String> =
        std::iter::once("size".to_string()).chain(shown.iter().map(|s| format!("IL_{}", s.order))).collect();
    let rows: Vec<Vec<String>> = sizes
        .iter()
        .enumerate()
        .map(|(i, n)| std::iter::once(n.to_string()).chain(shown.iter().map(|s| num(s.points[i].value))).collect())
        .collect();
    text.push_str(&table(&header, &rows));

    Ok(Report::new(json, csv, text, snap_warnings(&family, &moved)))
}

/// A schedule valid for both families, after snapping.
fn common_schedule(
    config: &RunConfig,
    a: &ProgramFamily,
    b: &ProgramFamily,
) -> Result<(SizeSchedule, Vec<String>), CliError> {
    let (fitted, moved_a) = config.schedule.fit_to(a)?;
    let (fitted, moved_b) = fitted.fit_to(b)?;
    let sizes = fitted.sizes()?;
    if let Some(n) = sizes.iter().find(|&&n| !a.in_domain(n)) {
        return Err(CliError::Usage(format!("no common schedule: |A| = {n} suits {b} but not {a}")));
    }
    let mut warnings = snap_warnings(a, &moved_a);
    warnings.extend(snap_warnings(b, &moved_b));
    Ok((fitted, warnings))
}

/// Verdict of the leakage-ratio estimator for each requested order.
pub fn cmd_compare(a: &ProgramSpec, b: &ProgramSpec, config: &RunConfig) -> Result<Report, CliError> {
    config.validate()?;
    let fa = a.family(config.cap)?;
    let fb = b.family(config.cap)?;
    let (schedule, warnings) = common_schedule(config, &fa, &fb)?;
    let sizes = schedule.sizes()?;
    let sa = leakage_series_multi(&fa, &schedule, &config.orders)?;
    let sb = leakage_series_multi(&fb, &schedule, &config.orders)?;
    let comparisons =
        sa.iter().zip(&sb).map(|(x, y)| compare_series(x, y, &config.estimator)).collect::<Result<Vec<_>, _>>()?;
    let verdict = comparisons[0].verdict;
    let consistent = comparisons.iter().all(|c| c.verdict == verdict);

    let entries: Vec<Value> = comparisons
        .iter()
        .map(|c| {
            let e = &c.estimate;
            json!({
                "order": e.order,
                "verdict": c.verdict,
                "f": limit_text(e.f_hat),
                "g": limit_text(e.g_hat),
                "tail_slope": e.tail_slope,
                "oscillating": e.oscillating,
                "window": e.window,
                "evidence": e.evidence,
            })
        })
        .collect();
    let json = json!({
        "schema": SCHEMA,
        "command": "compare",
        "first": fa.name(),
        "second": fb.name(),
        "sizes": sizes,
        "verdict": verdict,
        "consistent_across_orders": consistent,
        "comparisons": entries,
    });

    let mut csv = String::from("order,size,ratio\n");
    for c in &comparisons {
        for (n, r) in &c.estimate.evidence {
            csv.push_str(&format!("{},{n},{}\n", c.estimate.order, num(*r)));
        }
    }

    let mut text = format!("first   {}\nsecond  {}\n\n", fa.name(), fb.name());
    let summary: Vec<Vec<String>> = comparisons
        .iter()
        .map(|c| {
            let e = &c.estimate;
            vec![
                e.order.to_string(),
                c.verdict.to_string(),
                limit_text(e.f_hat),
                limit_text(e.g_hat),
                num(e.tail_slope),
                if e.oscillating { "yes" } else { "no" }.to_string(),
            ]
        })
        .collect();
    let header = ["order", "verdict", "f", "g", "tail slope", "oscillating"].map(String::from);
    text.push_str(&table(&header, &summary));
    text.push('\n');
    let header: Vec<String> = std::iter::once("size".to_string())
        .chain(comparisons.iter().map(|c| format!("ratio_{}", c.estimate.order)))
        .collect();
    let rows: Vec<Vec<String>> = sizes
        .iter()
        .enumerate()
        .map(|(i, n)| {
            std::iter::once(n.to_string()).chain(comparisons.iter().map(|c| num(c.estimate.evidence[i].1))).collect()
        })
        .collect();
    text.push_str(&table(&header, &rows));

    Ok(Report::new(json, csv, text, warnings))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WitnessRequest {
    /// Two distributions ranked oppositely by orders `alpha` and `beta`.
    Conflict { alpha: RenyiOrder, beta: RenyiOrder },
    /// Order-`alpha` ratio above `d` with min-entropy ratio below `1 / d`.
    Gap { d: f64, alpha: RenyiOrder },
}

/// Builds and verifies a witness; a failed verification is exit code 3.
pub fn cmd_witness(request: &WitnessRequest) -> Result<Report, CliError> {
    let usage = |e: WitnessError| CliError::Usage(e.to_string());
    let (mode, witness) = match *request {
        WitnessRequest::Conflict { alpha, beta } => {
            ("conflict", Witness::Conflict(build_conflict_witness(alpha, beta).map_err(usage)?))
        }
        WitnessRequest::Gap { d, alpha } => ("gap", Witness::Gap(build_finite_gap_witness(d, alpha).map_err(usage)?)),
    };
    let cert = match verify_witness(&witness) {
        Ok(cert) => cert,
        Err(WitnessError::VerificationFailed { inequality, .. }) => {
            return Err(CliError::Verification(format!("`{inequality}` does not hold")))
        }
        Err(e) => return Err(usage(e)),
    };
    let json = json!({
        "schema": SCHEMA,
        "command": "witness",
        "mode": mode,
        "verified": cert.pass,
        "witness": witness,
        "certification": cert,
    });

    let mut csv = String::from("distribution,order,bits\n");
    for e in &cert.entropies {
        csv.push_str(&format!("{},{},{}\n", e.distribution, e.order, num(e.bits)));
    }

    let mut text = match &witness {
        Witness::Conflict(w) => format!(
            "conflict witness for orders {} and {} ({:?})\np0 = {}, n = {}, m = {}, threshold |A| > {}\n\n",
            w.alpha,
            w.beta,
            w.case,
            w.p0,
            w.n,
            w.m,
            w.threshold - 1
        ),
        Witness::Gap(w) => format!(
            "gap witness for D = {} at order {}\np0 = {}, n = 2^{}\nratio at {} = {}, min-entropy ratio = {}\n\n",
            num(w.d),
            w.alpha,
            w.p0,
            w.n_log2,
            w.alpha,
            num(w.r_alpha),
            num(w.r_beta)
        ),
    };
    let rows: Vec<Vec<String>> = cert
        .inequalities
        .iter()
        .map(|i| vec![i.statement.clone(), num(i.margin), if i.holds { "holds" } else { "fails" }.to_string()])
        .collect();
    text.push_str(&table(&["inequality".into(), "margin".into(), "status".into()], &rows));

    Ok(Report::new(json, csv, text, Vec::new()))
}

/// The channel of a program at one size, as output counts.
pub fn cmd_channel(spec: &ProgramSpec, size: u64, cap: u64) -> Result<Report, CliError> {
    let family = spec.family(cap)?;
    let d = family.distribution_at(size)?;
    let counts = d.to_counts();
    let json = json!({"schema": SCHEMA, "program": family.name(), "size": size, "counts": counts});
    let mut csv = String::from("count\n");
    for c in &counts {
        csv.push_str(&format!("{c}\n"));
    }
    let rows: Vec<Vec<String>> =
        d.runs().iter().map(|r| vec![r.count.to_string(), r.multiplicity.to_string()]).collect();
    let mut text = format!("{} at |A| = {size}: {} outputs\n\n", family.name(), d.support_size());
    text.push_str(&table(&["count".into(), "outputs".into()], &rows));
    Ok(Report::new(json, csv, text, Vec::new()))
}

/// Writes `report` to `out`, or standard output when `out` is `None`.
pub fn write_report(report: &Report, format: Format, out: Option<&Path>) -> Result<(), CliError> {
    let text = report.render(format);
    let io = |e: std::io::Error| CliError::Usage(format!("cannot write report: {e}"));
    match out {
        Some(path) => fs::write(path, text).map_err(io),
        None => std::io::stdout().lock().write_all(text.as_bytes()).map_err(io),
    }
}
