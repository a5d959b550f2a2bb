//! Experiment reports.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::Result;
use crate::stats::{guarded_ratio, MC_SIGMAS};

/// One measured comparison inside an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub label: String,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    pub se: f64,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub extra: BTreeMap<String, f64>,
}

impl Row {
    /// Row whose ratio is `lhs / rhs` with `0/0 = 0`.
    pub fn new(label: impl Into<String>, lhs: f64, rhs: f64, se: f64, pass: bool) -> Self {
        Self { label: label.into(), lhs, rhs, ratio: guarded_ratio(lhs, rhs), se, pass, extra: BTreeMap::new() }
    }

    /// Exactness row: `lhs = |deviation|`, `rhs = allowance`, passing iff the ratio is at most 1.
    pub fn deviation(label: impl Into<String>, deviation: f64, allowance: f64, se: f64) -> Self {
        let d = deviation.abs();
        Self::new(label, d, allowance, se, d <= allowance)
    }

    /// Monte Carlo zero-mean row for a difference with mean `mean` and standard error `se`.
    pub fn mc_zero(label: impl Into<String>, mean: f64, se: f64) -> Self {
        Self::deviation(label, mean, MC_SIGMAS * se + 1e-12, se)
    }

    pub fn with(mut self, key: &str, value: f64) -> Self {
        self.extra.insert(key.to_string(), value);
        self
    }
}

/// `(x, y)` points for plotting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub name: String,
    pub x_label: String,
    pub y_label: String,
    pub points: Vec<(f64, f64)>,
}

impl Series {
    pub fn new(name: impl Into<String>, x_label: &str, y_label: &str, points: Vec<(f64, f64)>) -> Self {
        Self { name: name.into(), x_label: x_label.into(), y_label: y_label.into(), points }
    }

    pub fn write_csv(&self, w: &mut impl Write) -> Result<()> {
        writeln!(w, "{},{}", self.x_label, self.y_label)?;
        for (x, y) in &self.points {
            writeln!(w, "{x:e},{y:e}")?;
        }
        Ok(())
    }
}

/// Outcome of one experiment.
///
/// `lhs`, `rhs` and `ratio` summarize the decisive row: for inequality
/// experiments they are the measured sides and their quotient, for exactness
/// checks the worst deviation, its allowance, and their quotient. Wall time is
/// kept out of the serialized form so reports are byte-identical across runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub id: String,
    pub parameters: BTreeMap<String, Value>,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    pub se: f64,
    pub pass: bool,
    pub criterion: String,
    pub rows: Vec<Row>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub series: Vec<Series>,
    #[serde(skip)]
    pub wall_time: f64,
}

impl ExperimentReport {
    pub fn new(id: &str, criterion: &str) -> Self {
        Self {
            id: id.to_string(),
            parameters: BTreeMap::new(),
            lhs: 0.0,
            rhs: 0.0,
            ratio: 0.0,
            se: 0.0,
            pass: false,
            criterion: criterion.to_string(),
            rows: Vec::new(),
            notes: Vec::new(),
            series: Vec::new(),
            wall_time: 0.0,
        }
    }

    pub fn param(&mut self, key: &str, value: impl Serialize) -> &mut Self {
        self.parameters.insert(key.to_string(), serde_json::to_value(value).unwrap_or(Value::Null));
        self
    }

    pub fn push(&mut self, row: Row) {
        self.rows.push(row);
    }

    pub fn note(&mut self, s: impl Into<String>) {
        self.notes.push(s.into());
    }

    /// Sets the headline numbers from the row with the largest ratio and
    /// passes iff every row passes and every ratio is finite.
    pub fn conclude_by_max_ratio(&mut self) {
        self.pass = !self.rows.is_empty() && self.rows.iter().all(|r| r.pass && r.ratio.is_finite());
        if let Some(r) = self.rows.iter().max_by(|a, b| a.ratio.total_cmp(&b.ratio)) {
            (self.lhs, self.rhs, self.ratio, self.se) = (r.lhs, r.rhs, r.ratio, r.se);
        }
    }

    /// Sets the headline numbers explicitly; `pass` also requires every row to pass.
    pub fn conclude(&mut self, lhs: f64, rhs: f64, se: f64) {
        self.lhs = lhs;
        self.rhs = rhs;
        self.ratio = guarded_ratio(lhs, rhs);
        self.se = se;
        self.pass = !self.rows.is_empty() && self.ratio.is_finite() && self.rows.iter().all(|r| r.pass && r.ratio.is_finite());
    }

    /// One-line summary.
    pub fn summary_line(&self) -> String {
        format!(
            "{} {}: lhs={:.6e} rhs={:.6e} ratio={:.6e} ({})",
            if self.pass { "PASS" } else { "FAIL" },
            self.id,
            self.lhs,
            self.rhs,
            self.ratio,
            self.criterion
        )
    }
}
