use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    /// The budget was too small to decide.
    Inconclusive,
}

/// Tabulated curve, written out as CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Curve {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.columns.join(",");
        s.push('\n');
        for r in &self.rows {
            let line: Vec<String> = r.iter().map(|v| format!("{v:.12e}")).collect();
            let _ = writeln!(s, "{}", line.join(","));
        }
        s
    }
}

/// Outcome of one verification check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub check: String,
    pub params: Value,
    pub estimate: Option<f64>,
    pub bound: Option<f64>,
    pub sigma: Option<f64>,
    pub status: Status,
    pub pass: bool,
    pub details: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub curve: Option<Curve>,
}

impl CheckReport {
    pub fn new(check: &str, params: Value, status: Status) -> Self {
        Self {
            check: check.to_string(),
            params,
            estimate: None,
            bound: None,
            sigma: None,
            status,
            pass: status == Status::Pass,
            details: Value::Null,
            curve: None,
        }
    }

    pub fn numbers(mut self, estimate: f64, bound: f64, sigma: f64) -> Self {
        self.estimate = finite(estimate);
        self.bound = finite(bound);
        self.sigma = finite(sigma);
        self
    }

    pub fn details(mut self, details: Value) -> Self {
        self.details = details;
        self
    }

    pub fn curve(mut self, curve: Curve) -> Self {
        self.curve = Some(curve);
        self
    }
}

/// JSON has no encoding for NaN or ±∞.
pub(crate) fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

pub(crate) fn status(pass: bool) -> Status {
    if pass {
        Status::Pass
    } else {
        Status::Fail
    }
}
