//! Built-in program families with closed-form channels.
//!
//! | id | program | domain |
//! |----|---------|--------|
//! | P1 | `O = A` if `A = 0 mod 8`, else `O = 1` | `N = 2^(8k)`, `k >= 2` |
//! | P2 | `O = A & (2^(k+1) - 1)` | `N = 2^(8k)`, `k >= 2` |
//! | P3 | password check `O = [A = L]` | `N = 2^k`, `k >= 2` |
//! | P4 | binary search `O = [A >= L]` | `N = 2^k`, `k >= 2` |
//! | P5 | `O = A mod L` | `N >= 2` |
//! | P6 | `O = [popcount(A) = L]` | `N = 2^k`, `k >= 1`, `L <= k` |
//! | P7 | `A mod 2` for even `k`, `[A = L]` for odd `k` | `N = 2^k`, `k >= 1` |

use std::fmt;
use std::str::FromStr;

use super::{Bindings, ProgramError};
use crate::distributions::{Distribution, Run};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CorpusId {
    P1,
    P2,
    P3,
    P4,
    P5,
    P6,
    P7,
}

impl CorpusId {
    pub const ALL: [CorpusId; 7] = [Self::P1, Self::P2, Self::P3, Self::P4, Self::P5, Self::P6, Self::P7];
}

impl fmt::Display for CorpusId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl FromStr for CorpusId {
    type Err = ProgramError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s.trim().to_ascii_uppercase().as_str() {
            "P1" => Self::P1,
            "P2" => Self::P2,
            "P3" => Self::P3,
            "P4" => Self::P4,
            "P5" => Self::P5,
            "P6" => Self::P6,
            "P7" => Self::P7,
            _ => return Err(ProgramError::InvalidParameter(format!("unknown corpus program `{s}`"))),
        })
    }
}

/// The threshold `L` of P3/P4 as a function of the input-space size `N`.
/// Non-integer values are floored.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Threshold {
    /// `L = c`.
    Constant(u64),
    /// `L = floor(c * log2 N)`.
    Log(f64),
    /// `L = floor(c * sqrt N)`.
    Sqrt(f64),
    /// `L = floor(N / c)`.
    Fraction(f64),
}

fn is_integral(c: f64) -> bool {
    c.fract() == 0.0 && c < (1u64 << 53) as f64
}

impl Threshold {
    pub fn resolve(&self, size: u64) -> u64 {
        match *self {
            Self::Constant(c) => c,
            Self::Log(c) => {
                let log = if size.is_power_of_two() { size.trailing_zeros() as f64 } else { (size as f64).log2() };
                (c * log).floor() as u64
            }
            Self::Sqrt(c) if is_integral(c) => {
                let c = c as u128;
                (c * c * size as u128).isqrt() as u64
            }
            Self::Sqrt(c) => (c * (size as f64).sqrt()).floor() as u64,
            Self::Fraction(c) if is_integral(c) => size / c as u64,
            Self::Fraction(c) => (size as f64 / c).floor() as u64,
        }
    }

    fn dsl_default(&self) -> Option<String> {
        match *self {
            Self::Constant(c) => Some(c.to_string()),
            Self::Log(c) if is_integral(c) => Some(format!("{} * K", c as u64)),
            Self::Sqrt(c) if is_integral(c) => Some(format!("isqrt({} * N)", (c * c) as u64)),
            Self::Fraction(c) if is_integral(c) => Some(format!("N / {}", c as u64)),
            _ => None,
        }
    }
}

impl fmt::Display for Threshold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Constant(c) => write!(f, "{c}"),
            Self::Log(c) => write!(f, "{c}logN"),
            Self::Sqrt(c) => write!(f, "{c}sqrtN"),
            Self::Fraction(c) => write!(f, "N/{c}"),
        }
    }
}

impl FromStr for Threshold {
    type Err = ProgramError;

    /// Accepts `c`, `N/c`, `c*logN`, `clogN`, `c*sqrtN`, `csqrtN`, `logN`, `sqrtN`
    /// (whitespace ignored, case-insensitive).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ProgramError::InvalidParameter(format!("cannot parse threshold `{s}`"));
        let text: String = s.chars().filter(|c| !c.is_whitespace()).collect::<String>().to_ascii_lowercase();
        let coefficient = |prefix: &str| -> Result<f64, ProgramError> {
            let prefix = prefix.strip_suffix('*').unwrap_or(prefix);
            let c = if prefix.is_empty() { 1.0 } else { prefix.parse::<f64>().map_err(|_| bad())? };
            if c.is_finite() && c > 0.0 {
                Ok(c)
            } else {
                Err(bad())
            }
        };
        if let Some(c) = text.strip_prefix("n/") {
            return Ok(Self::Fraction(coefficient(c)?));
        }
        for (suffix, make) in [
            ("sqrtn", Self::Sqrt as fn(f64) -> Self),
            ("sqrt(n)", Self::Sqrt),
            ("logn", Self::Log),
            ("log(n)", Self::Log),
            ("k", Self::Log),
        ] {
            if let Some(prefix) = text.strip_suffix(suffix) {
                return Ok(make(coefficient(prefix)?));
            }
        }
        text.parse::<u64>().map(Self::Constant).map_err(|_| bad())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CorpusProgram {
    P1,
    P2,
    P3 { threshold: Threshold },
    P4 { threshold: Threshold },
    P5 { modulus: u64 },
    P6 { ones: u32 },
    P7 { target: u64 },
}

fn domain_error(size: u64, reason: &str) -> ProgramError {
    ProgramError::Domain { size, reason: reason.to_string() }
}

fn binomial(n: u32, k: u32) -> u128 {
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// `[n - hits, hits]`, or a point mass when `hits` is 0 or `n`.
fn binary_channel(size: u64, hits: u64) -> Vec<Run> {
    if hits == 0 || hits >= size {
        vec![Run { count: size, multiplicity: 1 }]
    } else {
        vec![Run { count: size - hits, multiplicity: 1 }, Run { count: hits, multiplicity: 1 }]
    }
}

impl CorpusProgram {
    /// Builds a corpus program from `name=value` bindings. `L` is the only
    /// parameter; it defaults to `N/2` for P3/P4, 2 for P5 and 1 for P6/P7.
    pub fn from_bindings(id: CorpusId, bindings: &[(String, String)]) -> Result<Self, ProgramError> {
        let mut l: Option<&str> = None;
        for (name, value) in bindings {
            if name != "L" {
                return Err(ProgramError::UnknownParameter(name.clone()));
            }
            l = Some(value.as_str());
        }
        let integer = |v: &str| {
            v.trim()
                .parse::<u64>()
                .map_err(|_| ProgramError::InvalidParameter(format!("{id}: L must be an integer, got `{v}`")))
        };
        let program = match id {
            CorpusId::P1 => Self::P1,
            CorpusId::P2 => Self::P2,
            CorpusId::P3 => Self::P3 { threshold: l.map(str::parse).transpose()?.unwrap_or(Threshold::Fraction(2.0)) },
            CorpusId::P4 => Self::P4 { threshold: l.map(str::parse).transpose()?.unwrap_or(Threshold::Fraction(2.0)) },
            CorpusId::P5 => Self::P5 { modulus: l.map(integer).transpose()?.unwrap_or(2) },
            CorpusId::P6 => {
                let ones = l.map(integer).transpose()?.unwrap_or(1);
                Self::P6 {
                    ones: u32::try_from(ones)
                        .ok()
                        .filter(|&o| o <= 63)
                        .ok_or_else(|| ProgramError::InvalidParameter(format!("P6: L = {ones} exceeds 63 bits")))?,
                }
            }
            CorpusId::P7 => Self::P7 { target: l.map(integer).transpose()?.unwrap_or(1) },
        };
        program.validate()?;
        Ok(program)
    }

    pub fn validate(&self) -> Result<(), ProgramError> {
        match self {
            Self::P5 { modulus } if *modulus < 2 => {
                Err(ProgramError::InvalidParameter(format!("P5 requires L > 1, got {modulus}")))
            }
            Self::P6 { ones } if *ones > 63 => {
                Err(ProgramError::InvalidParameter(format!("P6: L = {ones} exceeds 63 bits")))
            }
            _ => Ok(()),
        }
    }

    pub fn id(&self) -> CorpusId {
        match self {
            Self::P1 => CorpusId::P1,
            Self::P2 => CorpusId::P2,
            Self::P3 { .. } => CorpusId::P3,
            Self::P4 { .. } => CorpusId::P4,
            Self::P5 { .. } => CorpusId::P5,
            Self::P6 { .. } => CorpusId::P6,
            Self::P7 { .. } => CorpusId::P7,
        }
    }

    pub fn name(&self) -> String {
        match self {
            Self::P1 | Self::P2 => self.id().to_string(),
            Self::P3 { threshold } | Self::P4 { threshold } => format!("{}[L={threshold}]", self.id()),
            Self::P5 { modulus: l } | Self::P7 { target: l } => format!("{}[L={l}]", self.id()),
            Self::P6 { ones } => format!("P6[L={ones}]"),
        }
    }

    pub fn in_domain(&self, size: u64) -> bool {
        self.domain_check(size).is_ok()
    }

    fn domain_check(&self, size: u64) -> Result<(), ProgramError> {
        match self {
            Self::P1 | Self::P2 => {
                if size.is_power_of_two() && size.trailing_zeros() % 8 == 0 && size.trailing_zeros() >= 16 {
                    Ok(())
                } else {
                    Err(domain_error(size, "requires |A| = 2^(8k) with k >= 2"))
                }
            }
            Self::P3 { .. } | Self::P4 { .. } => {
                if size.is_power_of_two() && size >= 4 {
                    Ok(())
                } else {
                    Err(domain_error(size, "requires |A| = 2^k with k >= 2"))
                }
            }
            Self::P5 { .. } => {
                if size >= 2 {
                    Ok(())
                } else {
                    Err(domain_error(size, "requires |A| >= 2"))
                }
            }
            Self::P6 { ones } => {
                if !(size.is_power_of_two() && size >= 2) {
                    Err(domain_error(size, "requires |A| = 2^k with k >= 1"))
                } else if *ones > size.trailing_zeros() {
                    Err(ProgramError::InvalidParameter(format!(
                        "P6 with L = {ones} is undefined for k = {}",
                        size.trailing_zeros()
                    )))
                } else {
                    Ok(())
                }
            }
            Self::P7 { .. } => {
                if size.is_power_of_two() && size >= 2 {
                    Ok(())
                } else {
                    Err(domain_error(size, "requires |A| = 2^k with k >= 1"))
                }
            }
        }
    }

    /// The smallest in-domain size that is at least `size`.
    pub fn snap(&self, size: u64) -> Option<u64> {
        let size = size.max(2);
        match self {
            Self::P1 | Self::P2 => {
                let exp = size.checked_next_power_of_two()?.trailing_zeros().max(16);
                let exp = exp.div_ceil(8) * 8;
                (exp < 64).then(|| 1u64 << exp)
            }
            Self::P5 { .. } => Some(size),
            Self::P3 { .. } | Self::P4 { .. } => Some(size.checked_next_power_of_two()?.max(4)),
            Self::P6 { ones } => {
                let p = size.checked_next_power_of_two()?;
                let min = 1u64.checked_shl((*ones).max(1))?;
                Some(p.max(min))
            }
            Self::P7 { .. } => size.checked_next_power_of_two(),
        }
    }

    /// Closed-form output distribution; no enumeration.
    pub fn distribution_at(&self, size: u64) -> Result<Distribution, ProgramError> {
        self.domain_check(size)?;
        let n = size;
        let runs = match *self {
            Self::P1 => vec![Run { count: n / 8 * 7, multiplicity: 1 }, Run { count: 1, multiplicity: n / 8 }],
            Self::P2 => {
                let k = n.trailing_zeros() / 8;
                vec![Run { count: 1u64 << (7 * k - 1), multiplicity: 1u64 << (k + 1) }]
            }
            Self::P3 { threshold } => binary_channel(n, (threshold.resolve(n) < n) as u64),
            Self::P4 { threshold } => binary_channel(n, threshold.resolve(n)),
            Self::P5 { modulus } => {
                let (q, r) = (n / modulus, n % modulus);
                vec![Run { count: q + 1, multiplicity: r }, Run { count: q, multiplicity: modulus - r }]
            }
            Self::P6 { ones } => binary_channel(n, binomial(n.trailing_zeros(), ones) as u64),
            Self::P7 { target } => {
                if n.trailing_zeros() % 2 == 0 {
                    vec![Run { count: n / 2, multiplicity: 2 }]
                } else {
                    binary_channel(n, (target < n) as u64)
                }
            }
        };
        Ok(Distribution::from_runs(runs, n)?)
    }

    /// DSL rendering of the program. The threshold or modulus is the
    /// parameter `L`; see [`CorpusProgram::dsl_bindings`].
    pub fn dsl_source(&self) -> String {
        let param = |default: Option<String>| match default {
            Some(d) => format!("param L = {d};\n"),
            None => "param L;\n".to_string(),
        };
        match self {
            Self::P1 => "if A % 8 == 0 { A } else { 1 }".to_string(),
            Self::P2 => "A & ((1 << (K / 8 + 1)) - 1)".to_string(),
            Self::P3 { threshold } => format!("{}if A == L {{ 1 }} else {{ 0 }}", param(threshold.dsl_default())),
            Self::P4 { threshold } => format!("{}if A >= L {{ 1 }} else {{ 0 }}", param(threshold.dsl_default())),
            Self::P5 { modulus } => format!("param L = {modulus};\nA % L"),
            Self::P6 { ones } => format!("param L = {ones};\nif popcount(A) == L {{ 1 }} else {{ 0 }}"),
            Self::P7 { target } => {
                format!("param L = {target};\nif K % 2 == 0 {{ A % 2 }} else if A == L {{ 1 }} else {{ 0 }}")
            }
        }
    }

    /// Explicit bindings for the DSL rendering at `size`: the resolved
    /// threshold for P3/P4 (covering non-integer coefficients), nothing otherwise.
    pub fn dsl_bindings(&self, size: u64) -> Bindings {
        let mut bindings = Bindings::new();
        if let Self::P3 { threshold } | Self::P4 { threshold } = self {
            bindings.insert("L".to_string(), threshold.resolve(size));
        }
        bindings
    }
}
