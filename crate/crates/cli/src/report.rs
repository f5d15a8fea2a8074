//! Report envelopes and number formatting.

use serde::{Deserialize, Serialize};

pub const TOOL: &str = "duality";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Metadata wrapped around every JSON report. Contains no timestamps, so
/// identical inputs give byte-identical output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Envelope<T> {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub config_hash: String,
    pub config: serde_json::Value,
    pub pass: bool,
    pub result: T,
}

impl<T> Envelope<T> {
    pub fn new<C: Serialize>(command: &str, seed: u64, config: &C, pass: bool, result: T) -> Self {
        Self {
            tool: TOOL.into(),
            version: VERSION.into(),
            command: command.into(),
            seed,
            config_hash: crate::config::config_hash(config),
            config: serde_json::to_value(config).expect("configs serialize"),
            pass,
            result,
        }
    }
}

/// One verification suite.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub name: String,
    /// The relation being checked.
    pub paper_anchor: String,
    pub samples: usize,
    /// Largest `lhs - rhs` for inequalities, largest `|lhs - rhs|` for
    /// equalities. Negative values are margins.
    pub max_violation: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub checks: Vec<CheckRecord>,
    pub notes: Vec<String>,
}

/// `%.12g`: 12 significant digits, trailing zeros dropped, scientific
/// notation outside `[1e-4, 1e12)`.
pub fn format_g12(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{x:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..12).contains(&exp) {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{m}e{sign}{:02}", exp.abs());
    }
    let decimals = (11 - exp).max(0) as usize;
    trim_zeros(&format!("{x:.decimals$}")).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}
