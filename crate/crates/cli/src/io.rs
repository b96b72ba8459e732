//! File formats and number formatting.

use std::fs;
use std::io::Write;
use std::path::Path;

use mixture_dynamics::smile::VolQuote;
use mixture_dynamics::{Correlation, MixtureParams};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

/// Market data for one asset or one cross: spot, rates and quotes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MarketFile {
    pub schema_version: u32,
    pub asset_id: String,
    pub spot: f64,
    #[serde(default)]
    pub domestic_rate: Option<f64>,
    #[serde(default)]
    pub foreign_rate: Option<f64>,
    pub quotes: Vec<QuoteRow>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct QuoteRow {
    pub strike: f64,
    pub maturity: f64,
    pub implied_vol: f64,
    #[serde(default = "one")]
    pub weight: f64,
}

fn one() -> f64 {
    1.0
}

impl MarketFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let m: MarketFile = read_json(path)?;
        check_schema(path, m.schema_version)?;
        if m.quotes.is_empty() {
            return Err(CliError::Input(format!("{}: no quotes", path.display())));
        }
        if !(m.spot > 0.0) {
            return Err(CliError::Input(format!("{}: spot must be positive", path.display())));
        }
        if let Some(q) = m.quotes.iter().find(|q| !(q.maturity > 0.0)) {
            return Err(CliError::Input(format!(
                "{}: non-positive maturity {} at strike {}",
                path.display(),
                q.maturity,
                q.strike
            )));
        }
        Ok(m)
    }

    /// `(domestic, foreign)` rates, zero when absent.
    pub fn rates(&self) -> (f64, f64) {
        if self.domestic_rate.is_none() || self.foreign_rate.is_none() {
            warn(&format!("{}: rates missing, assuming zero", self.asset_id));
        }
        (self.domestic_rate.unwrap_or(0.0), self.foreign_rate.unwrap_or(0.0))
    }

    /// Quotes maturing at `t`, or at the single maturity present when `t` is
    /// not given.
    pub fn slice(&self, t: Option<f64>) -> Result<(f64, Vec<VolQuote>), CliError> {
        let t = match t {
            Some(t) => t,
            None => {
                let t0 = self.quotes[0].maturity;
                if self.quotes.iter().any(|q| (q.maturity - t0).abs() > 1e-12) {
                    return Err(CliError::Input("quotes span several maturities; pass --maturity".into()));
                }
                t0
            }
        };
        let quotes: Vec<VolQuote> = self
            .quotes
            .iter()
            .filter(|q| (q.maturity - t).abs() <= 1e-9)
            .map(|q| VolQuote {
                weight: q.weight,
                ..VolQuote::new(q.strike, q.maturity, q.implied_vol)
            })
            .collect();
        if quotes.is_empty() {
            return Err(CliError::Input(format!("no quotes at maturity {t}")));
        }
        Ok((t, quotes))
    }
}

/// Calibrated single-asset parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParamsFile {
    pub schema_version: u32,
    pub asset_id: String,
    pub params: MixtureParams,
}

impl ParamsFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let p: ParamsFile = read_json(path)?;
        check_schema(path, p.schema_version)?;
        p.params.validate().map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        Ok(p)
    }
}

/// A correlation file holds either a bare correlation spec or a fit report
/// whose `fitted` field is one.
pub fn load_correlation(path: &Path) -> Result<Correlation, CliError> {
    let v: Value = read_json(path)?;
    let spec = v.get("fitted").cloned().unwrap_or(v);
    serde_json::from_value(spec).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    // serde_json reports line and column in its messages
    serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn check_schema(path: &Path, v: u32) -> Result<(), CliError> {
    if v != SCHEMA_VERSION {
        return Err(CliError::Input(format!(
            "{}: unsupported schema_version {v} (expected {SCHEMA_VERSION})",
            path.display()
        )));
    }
    Ok(())
}

pub fn warn(msg: &str) {
    eprintln!("warning: {msg}");
}

/// `%.12g`-style formatting: twelve significant digits, trailing zeros
/// removed.
pub fn fmt12(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { "0".into() } else { x.to_string() };
    }
    let s = format!("{x:.11e}");
    let (mantissa, exp) = s.split_once('e').unwrap();
    let exp: i32 = exp.parse().unwrap();
    if (-5..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        let fixed = format!("{x:.decimals$}");
        if fixed.contains('.') {
            fixed.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            fixed
        }
    } else {
        let m = if mantissa.contains('.') {
            mantissa.trim_end_matches('0').trim_end_matches('.')
        } else {
            mantissa
        };
        format!("{m}e{exp}")
    }
}

/// Rounds every number in a JSON tree to twelve significant digits.
pub fn round_json(v: Value) -> Value {
    match v {
        Value::Number(n) => match n.as_f64() {
            Some(x) if n.is_f64() => fmt12(x).parse::<f64>().ok().and_then(serde_json::Number::from_f64).map_or(Value::Number(n), Value::Number),
            _ => Value::Number(n),
        },
        Value::Array(a) => Value::Array(a.into_iter().map(round_json).collect()),
        Value::Object(o) => Value::Object(o.into_iter().map(|(k, v)| (k, round_json(v))).collect()),
        other => other,
    }
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let v = serde_json::to_value(value).expect("serializable");
    serde_json::to_string_pretty(&round_json(v)).expect("serializable") + "\n"
}

/// Writes `text` to `path`, or to stdout when no path is given.
pub fn emit(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| CliError::Input(format!("{}: {e}", p.display()))),
        None => {
            std::io::stdout().write_all(text.as_bytes()).map_err(|e| CliError::Input(e.to_string()))
        }
    }
}

/// Versioned CSV: a `#schema=` line, a header row, then the records with
/// numbers at twelve significant digits.
pub struct Table {
    schema: &'static str,
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(schema: &'static str, header: &[&'static str]) -> Self {
        Self { schema, header: header.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r).expect("in-memory write");
        }
        let body = String::from_utf8(w.into_inner().expect("in-memory write")).expect("utf8");
        format!("#schema={}/{SCHEMA_VERSION}\n{body}", self.schema)
    }
}

/// Parses `a,b,c` into numbers.
pub fn parse_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("bad number {t:?}: {e}")))
        .collect()
}

/// Parses `r11,r12;r21,r22` into a matrix.
pub fn parse_matrix(s: &str) -> Result<Vec<Vec<f64>>, String> {
    s.split(';').map(parse_list).collect()
}
