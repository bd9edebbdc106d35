//! Report values and their JSON, CSV and table renderings.

use std::fmt;
use std::str::FromStr;

use qif_core::Limit;
use serde_json::Value;

/// Version tag carried by every JSON report.
pub const SCHEMA: &str = "qif-report/1";

/// Significant digits kept for every float in a report.
pub const SIGNIFICANT_DIGITS: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Json,
    Csv,
    Table,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "json" => Ok(Self::Json),
            "csv" => Ok(Self::Csv),
            "table" => Ok(Self::Table),
            other => Err(format!("unknown format `{other}`; expected json, csv or table")),
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Json => "json",
            Self::Csv => "csv",
            Self::Table => "table",
        })
    }
}

/// A finished command result in all three renderings, plus warnings meant
/// for standard error.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub json: Value,
    pub csv: String,
    pub table: String,
    pub warnings: Vec<String>,
}

impl Report {
    /// Normalizes floats in `json` to [`SIGNIFICANT_DIGITS`].
    pub fn new(mut json: Value, csv: String, table: String, warnings: Vec<String>) -> Self {
        normalize(&mut json);
        Self { json, csv, table, warnings }
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Json => {
                let mut out = serde_json::to_string_pretty(&self.json).expect("reports are valid JSON");
                out.push('\n');
                out
            }
            Format::Csv => self.csv.clone(),
            Format::Table => self.table.clone(),
        }
    }
}

pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.*e}", SIGNIFICANT_DIGITS - 1).parse().expect("formatted float parses")
}

/// Text form of a float at [`SIGNIFICANT_DIGITS`].
pub fn num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        round_sig(x).to_string()
    }
}

pub fn limit_text(l: Limit) -> String {
    match l {
        Limit::Finite(v) => num(v),
        other => other.to_string(),
    }
}

/// Rounds every float in `value`. Non-finite floats are already `null`.
pub fn normalize(value: &mut Value) {
    match value {
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().expect("f64 number");
            if let Some(r) = serde_json::Number::from_f64(round_sig(x)) {
                *n = r;
            }
        }
        Value::Array(items) => items.iter_mut().for_each(normalize),
        Value::Object(map) => map.values_mut().for_each(normalize),
        _ => {}
    }
}

/// Left-aligned columns separated by two spaces.
pub fn table(header: &[String], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(String::len).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let line = |cells: &[String]| {
        let padded: Vec<String> = cells.iter().zip(&widths).map(|(c, &w)| format!("{c:<w$}")).collect();
        format!("{}\n", padded.join("  ").trim_end())
    };
    let mut out = line(header);
    for row in rows {
        out.push_str(&line(row));
    }
    out
}
