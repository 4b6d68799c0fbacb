//! Run reports and CSV tables.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;
use serde_json::Value;

/// A numeric table written as `<name>.csv`. `NaN` cells are written empty.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len(), "row width for table {}", self.name);
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            for (i, v) in row.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                if !v.is_nan() {
                    write!(out, "{v}").expect("write to string");
                }
            }
            out.push('\n');
        }
        out
    }
}

/// One domination or agreement check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub metric: String,
    pub passed: bool,
    pub detail: String,
}

impl Verdict {
    pub fn new(metric: &str, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            metric: metric.to_string(),
            passed,
            detail: detail.into(),
        }
    }
}

/// What a runner produces before it is written out.
#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub verdicts: Vec<Verdict>,
    pub tables: Vec<Table>,
    pub summary: BTreeMap<String, Value>,
}

impl Outcome {
    pub fn note(&mut self, key: &str, value: impl Into<Value>) {
        self.summary.insert(key.to_string(), value.into());
    }

    /// Merges `other`, prefixing its metric, table and summary names.
    pub fn absorb(&mut self, prefix: &str, other: Outcome) {
        for mut v in other.verdicts {
            v.metric = format!("{prefix}.{}", v.metric);
            self.verdicts.push(v);
        }
        for mut t in other.tables {
            t.name = format!("{prefix}_{}", t.name);
            self.tables.push(t);
        }
        for (k, v) in other.summary {
            self.summary.insert(format!("{prefix}.{k}"), v);
        }
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableRef {
    pub name: String,
    pub file: String,
    pub columns: Vec<String>,
    pub rows: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub name: String,
    pub kind: String,
    pub seed: u64,
    /// Hex SHA-256 of the exact config bytes.
    pub config_sha256: String,
    pub config: String,
    pub verdicts: Vec<Verdict>,
    pub tables: Vec<TableRef>,
    pub summary: BTreeMap<String, Value>,
    pub output_dir: String,
    pub wall_clock_seconds: f64,
    pub all_passed: bool,
    #[serde(skip)]
    pub data: Vec<Table>,
}

impl RunReport {
    pub fn failed(&self) -> impl Iterator<Item = &Verdict> {
        self.verdicts.iter().filter(|v| !v.passed)
    }

    pub fn verdict(&self, metric: &str) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.metric == metric)
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.data.iter().find(|t| t.name == name)
    }
}
