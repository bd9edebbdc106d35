//! Program families: the built-in corpus with closed-form channels and
//! DSL programs whose channels are extracted by exhaustive enumeration.

pub mod corpus;
pub mod dsl;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use rustc_hash::FxHashMap;
use thiserror::Error;

use crate::distributions::{Distribution, DistributionError};
pub use corpus::{CorpusId, CorpusProgram, Threshold};
pub use dsl::{parse_program, EvalErrorKind, ParseError, ProgramAst};

/// Default largest input space enumerated exhaustively.
pub const DEFAULT_ENUM_CAP: u64 = 1 << 24;

/// Environment variable overriding [`DEFAULT_ENUM_CAP`].
pub const ENUM_CAP_ENV: &str = "QIF_ENUM_CAP";

const CHUNK: u64 = 1 << 16;

/// Values for DSL parameters, by name.
pub type Bindings = BTreeMap<String, u64>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProgramError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("evaluation failed at A = {input}: {kind}")]
    Eval { input: u64, kind: EvalErrorKind },
    #[error("|A| = {size} exceeds the enumeration cap {cap}")]
    CapExceeded { size: u64, cap: u64 },
    #[error("|A| = {size} is outside the program's domain: {reason}")]
    Domain { size: u64, reason: String },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("unknown parameter `{0}`")]
    UnknownParameter(String),
    #[error("parameter `{0}` has no value and no default")]
    MissingParameter(String),
    #[error(transparent)]
    Distribution(#[from] DistributionError),
}

/// Reads the enumeration cap from `QIF_ENUM_CAP`, falling back to the default.
pub fn enum_cap_from_env() -> u64 {
    std::env::var(ENUM_CAP_ENV).ok().and_then(|v| v.trim().parse().ok()).unwrap_or(DEFAULT_ENUM_CAP)
}

/// Parameter values for one size: explicit bindings first, then defaults
/// evaluated in declaration order.
pub fn resolve_params(ast: &ProgramAst, bindings: &Bindings, size: u64) -> Result<Vec<u64>, ProgramError> {
    if let Some(name) = bindings.keys().find(|name| ast.param_index(name).is_none()) {
        return Err(ProgramError::UnknownParameter(name.clone()));
    }
    let mut values = Vec::with_capacity(ast.params.len());
    for decl in &ast.params {
        let value = match (bindings.get(&decl.name), &decl.default) {
            (Some(&v), _) => v,
            (None, Some(default)) => {
                let env = dsl::Env { input: 0, size, params: &values };
                dsl::eval(default, &env).map_err(|kind| {
                    ProgramError::InvalidParameter(format!("default of `{}` at |A| = {size}: {kind}", decl.name))
                })?
            }
            (None, None) => return Err(ProgramError::MissingParameter(decl.name.clone())),
        };
        values.push(value);
    }
    Ok(values)
}

fn tally(
    ast: &ProgramAst,
    params: &[u64],
    size: u64,
    range: std::ops::Range<u64>,
) -> Result<FxHashMap<u64, u64>, ProgramError> {
    let mut counts = FxHashMap::default();
    for input in range {
        let env = dsl::Env { input, size, params };
        let out = dsl::eval(&ast.body, &env).map_err(|kind| ProgramError::Eval { input, kind })?;
        *counts.entry(out).or_insert(0u64) += 1;
    }
    Ok(counts)
}

/// Exact channel of `ast` at `|A| = size` by evaluating every input.
///
/// Inputs are split into fixed chunks processed in parallel; per-chunk tallies
/// are merged in chunk order, so the result does not depend on scheduling. An
/// evaluation error reports the smallest failing input.
pub fn enumerate_channel(
    ast: &ProgramAst,
    bindings: &Bindings,
    size: u64,
    cap: u64,
) -> Result<Distribution, ProgramError> {
    if size < 2 {
        return Err(ProgramError::Domain { size, reason: "requires |A| >= 2".into() });
    }
    if size > cap {
        return Err(ProgramError::CapExceeded { size, cap });
    }
    let params = resolve_params(ast, bindings, size)?;
    let counts = if size <= CHUNK {
        tally(ast, &params, size, 0..size)?
    } else {
        let chunks = size.div_ceil(CHUNK);
        let parts: Vec<_> = (0..chunks)
            .into_par_iter()
            .map(|c| tally(ast, &params, size, c * CHUNK..((c + 1) * CHUNK).min(size)))
            .collect();
        let mut merged = FxHashMap::default();
        for part in parts {
            for (out, n) in part? {
                *merged.entry(out).or_insert(0u64) += n;
            }
        }
        merged
    };
    let raw: Vec<u64> = counts.into_values().collect();
    Ok(Distribution::from_counts(&raw, size)?)
}

/// Exact channels at several sizes, in the order given.
///
/// When the body does not mention `N` or `K` and the resolved parameters
/// agree between consecutive ascending sizes, the tally of the smaller size is
/// extended with the additional inputs instead of being recomputed; every
/// input is still evaluated.
pub fn enumerate_channels(
    ast: &ProgramAst,
    bindings: &Bindings,
    sizes: &[u64],
    cap: u64,
) -> Result<Vec<Distribution>, ProgramError> {
    if ast.body.mentions_size() {
        return sizes.iter().map(|&n| enumerate_channel(ast, bindings, n, cap)).collect();
    }
    let mut order: Vec<usize> = (0..sizes.len()).collect();
    order.sort_by_key(|&i| sizes[i]);
    let mut out: Vec<Option<Distribution>> = vec![None; sizes.len()];
    let mut counts: FxHashMap<u64, u64> = FxHashMap::default();
    let mut done = 0u64;
    let mut current: Option<Vec<u64>> = None;
    for i in order {
        let size = sizes[i];
        if size < 2 {
            return Err(ProgramError::Domain { size, reason: "requires |A| >= 2".into() });
        }
        if size > cap {
            return Err(ProgramError::CapExceeded { size, cap });
        }
        let params = resolve_params(ast, bindings, size)?;
        if current.as_ref() != Some(&params) {
            counts.clear();
            done = 0;
        }
        for input in done..size {
            let env = dsl::Env { input, size, params: &params };
            let value = dsl::eval(&ast.body, &env).map_err(|kind| ProgramError::Eval { input, kind })?;
            *counts.entry(value).or_insert(0u64) += 1;
        }
        done = size;
        current = Some(params);
        let raw: Vec<u64> = counts.values().copied().collect();
        out[i] = Some(Distribution::from_counts(&raw, size)?);
    }
    Ok(out.into_iter().map(|d| d.expect("every size visited")).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub enum FamilySource {
    Builtin(CorpusProgram),
    Dsl { ast: Arc<ProgramAst>, bindings: Bindings, cap: u64 },
}

/// A program indexed by input-space size, yielding one channel per size.
#[derive(Debug, Clone, PartialEq)]
pub struct ProgramFamily {
    name: String,
    source: FamilySource,
}

impl ProgramFamily {
    pub fn corpus(program: CorpusProgram) -> Self {
        Self { name: program.name(), source: FamilySource::Builtin(program) }
    }

    /// A DSL family. Every declared parameter must be bound or have a default.
    pub fn dsl(name: impl Into<String>, ast: ProgramAst, bindings: Bindings, cap: u64) -> Result<Self, ProgramError> {
        if let Some(name) = bindings.keys().find(|name| ast.param_index(name).is_none()) {
            return Err(ProgramError::UnknownParameter(name.clone()));
        }
        if let Some(decl) = ast.params.iter().find(|p| p.default.is_none() && !bindings.contains_key(&p.name)) {
            return Err(ProgramError::MissingParameter(decl.name.clone()));
        }
        let name = name.into();
        let name = if bindings.is_empty() {
            name
        } else {
            let args: Vec<String> = bindings.iter().map(|(k, v)| format!("{k}={v}")).collect();
            format!("{name}[{}]", args.join(","))
        };
        Ok(Self { name, source: FamilySource::Dsl { ast: Arc::new(ast), bindings, cap } })
    }

    /// Parses `text` and builds a DSL family from it.
    pub fn from_source(
        name: impl Into<String>,
        text: &str,
        bindings: Bindings,
        cap: u64,
    ) -> Result<Self, ProgramError> {
        Self::dsl(name, parse_program(text)?, bindings, cap)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn source(&self) -> &FamilySource {
        &self.source
    }

    pub fn distribution_at(&self, size: u64) -> Result<Distribution, ProgramError> {
        match &self.source {
            FamilySource::Builtin(p) => p.distribution_at(size),
            FamilySource::Dsl { ast, bindings, cap } => enumerate_channel(ast, bindings, size, *cap),
        }
    }

    /// Channels at several sizes; DSL families share one sweep over the inputs.
    pub fn distributions_at(&self, sizes: &[u64]) -> Result<Vec<Distribution>, ProgramError> {
        match &self.source {
            FamilySource::Builtin(p) => sizes.par_iter().map(|&n| p.distribution_at(n)).collect(),
            FamilySource::Dsl { ast, bindings, cap } => enumerate_channels(ast, bindings, sizes, *cap),
        }
    }

    pub fn in_domain(&self, size: u64) -> bool {
        match &self.source {
            FamilySource::Builtin(p) => p.in_domain(size),
            FamilySource::Dsl { cap, .. } => (2..=*cap).contains(&size),
        }
    }

    /// The smallest in-domain size at least `size`, if any.
    pub fn snap(&self, size: u64) -> Option<u64> {
        match &self.source {
            FamilySource::Builtin(p) => p.snap(size),
            FamilySource::Dsl { cap, .. } => Some(size.max(2)).filter(|s| s <= cap),
        }
    }

    /// True when valid sizes are exactly the powers of two (possibly with
    /// further restrictions).
    pub fn requires_power_of_two(&self) -> bool {
        matches!(
            &self.source,
            FamilySource::Builtin(p) if !matches!(p, CorpusProgram::P5 { .. })
        )
    }
}

impl fmt::Display for ProgramFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

/// Builds a corpus family from textual `name=value` bindings.
pub fn corpus_family(id: CorpusId, bindings: &[(String, String)]) -> Result<ProgramFamily, ProgramError> {
    Ok(ProgramFamily::corpus(CorpusProgram::from_bindings(id, bindings)?))
}

/// Checks the closed-form channel of `program` against enumeration of its
/// DSL rendering at `size`.
pub fn closed_form_matches_enumeration(program: &CorpusProgram, size: u64, cap: u64) -> Result<bool, ProgramError> {
    let closed = program.distribution_at(size)?;
    let ast = parse_program(&program.dsl_source())?;
    let enumerated = enumerate_channel(&ast, &program.dsl_bindings(size), size, cap)?;
    Ok(closed == enumerated)
}
