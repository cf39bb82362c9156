//! Report tables and their CSV/JSON serialization.
//!
//! Floats are written in shortest round-trip form. Undefined values are
//! empty in CSV and `null` in JSON.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use twfe_core::inference::Z_975;

use crate::config::Format;
use crate::AppError;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
    Missing,
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) if v.is_finite() => format_float(*v),
            Cell::Float(_) | Cell::Missing => String::new(),
            Cell::Text(s) => s.clone(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Int(v) => Value::from(*v),
            Cell::Float(v) => serde_json::Number::from_f64(*v).map_or(Value::Null, Value::Number),
            Cell::Text(s) => Value::from(s.as_str()),
            Cell::Missing => Value::Null,
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Missing, Cell::Float)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<Option<usize>> for Cell {
    fn from(v: Option<usize>) -> Self {
        v.map_or(Cell::Missing, |v| Cell::Int(v as i64))
    }
}

impl From<i64> for Cell {
    fn from(v: i64) -> Self {
        Cell::Int(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

/// Shortest decimal string that parses back to `v`.
pub fn format_float(v: f64) -> String {
    // `Display` for f64 is already shortest round-trip
    let s = v.to_string();
    if s == "-0" {
        "0".into()
    } else {
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Self { header: header.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.header.join(","));
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|c| quote(&c.csv())).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> Value {
        Value::Array(
            self.rows
                .iter()
                .map(|row| {
                    let obj = self.header.iter().zip(row).map(|(h, c)| (h.to_string(), c.json()));
                    Value::Object(obj.collect())
                })
                .collect(),
        )
    }
}

fn quote(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// One line of the run summary.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub term: String,
    pub estimate: f64,
    pub se: Option<f64>,
    pub k_min: Option<usize>,
    pub k_max: Option<usize>,
    pub n_pairs: usize,
}

/// Everything one analysis produced.
#[derive(Debug, Clone)]
pub struct AnalysisReport {
    pub name: String,
    pub operation: &'static str,
    /// Operation parameters, embedded in every artifact.
    pub params: BTreeMap<String, Value>,
    pub summary: Vec<SummaryRow>,
    /// Table 1 style distribution rows, one per decomposition.
    pub weighted: Vec<(String, twfe_core::WeightedSummary, f64)>,
    /// Named tables written as `<name>_<suffix>.csv`.
    pub tables: Vec<(&'static str, Table)>,
    /// Full result for the JSON report.
    pub result: Value,
}

impl AnalysisReport {
    pub fn params_string(&self) -> String {
        let mut s = String::new();
        for (i, (k, v)) in self.params.iter().enumerate() {
            if i > 0 {
                s.push(';');
            }
            let v = match v {
                Value::String(t) => t.clone(),
                other => other.to_string(),
            };
            let _ = write!(s, "{k}={v}");
        }
        s
    }
}

pub const SUMMARY_HEADER: [&str; 11] =
    ["analysis", "operation", "term", "estimate", "se", "ci_low", "ci_high", "k_min", "k_max", "n_pairs", "params"];

fn summary_table(reports: &[AnalysisReport]) -> Table {
    let mut t = Table::new(&SUMMARY_HEADER);
    for r in reports {
        for row in &r.summary {
            let ci = row.se.map(|se| (row.estimate - Z_975 * se, row.estimate + Z_975 * se));
            t.push(vec![
                r.name.as_str().into(),
                r.operation.into(),
                row.term.as_str().into(),
                row.estimate.into(),
                row.se.into(),
                ci.map(|c| c.0).into(),
                ci.map(|c| c.1).into(),
                row.k_min.into(),
                row.k_max.into(),
                row.n_pairs.into(),
                r.params_string().into(),
            ]);
        }
    }
    t
}

fn weighted_table(reports: &[AnalysisReport]) -> Table {
    let mut t = Table::new(&[
        "analysis",
        "decomposition",
        "aggregate",
        "mean",
        "sd",
        "p5",
        "p25",
        "median",
        "p75",
        "p95",
        "n_components",
    ]);
    for r in reports {
        for (label, s, agg) in &r.weighted {
            t.push(vec![
                r.name.as_str().into(),
                label.as_str().into(),
                (*agg).into(),
                s.mean.into(),
                s.sd.into(),
                s.p5.into(),
                s.p25.into(),
                s.median.into(),
                s.p75.into(),
                s.p95.into(),
                s.n_components.into(),
            ]);
        }
    }
    t
}

#[derive(Debug, Serialize)]
struct ManifestEntry<'a> {
    file: String,
    analysis: &'a str,
    operation: &'a str,
    params: &'a BTreeMap<String, Value>,
}

/// Serialized artifacts, keyed by file name. Kept in memory so writes happen
/// in one place and in a fixed order.
#[derive(Debug, Default)]
pub struct Artifacts {
    files: BTreeMap<String, String>,
    manifest: Vec<Value>,
}

impl Artifacts {
    pub fn add(
        &mut self,
        file: String,
        body: String,
        analysis: &str,
        operation: &str,
        params: &BTreeMap<String, Value>,
    ) {
        let entry = ManifestEntry { file: file.clone(), analysis, operation, params };
        self.manifest.push(serde_json::to_value(entry).expect("manifest entry serializes"));
        self.files.insert(file, body);
    }

    pub fn add_analyses(&mut self, reports: &[AnalysisReport], formats: &[Format]) -> Result<(), AppError> {
        let empty = BTreeMap::new();
        if formats.contains(&Format::Csv) {
            if !reports.is_empty() {
                self.add("summary.csv".into(), summary_table(reports).to_csv(), "*", "summary", &empty);
            }
            let w = weighted_table(reports);
            if !w.rows.is_empty() {
                self.add("weighted_summary.csv".into(), w.to_csv(), "*", "weighted_summary", &empty);
            }
            for r in reports {
                for (suffix, table) in &r.tables {
                    self.add(format!("{}_{suffix}.csv", r.name), table.to_csv(), &r.name, r.operation, &r.params);
                }
            }
        }
        if formats.contains(&Format::Json) {
            for r in reports {
                let mut tables = serde_json::Map::new();
                for (suffix, table) in &r.tables {
                    tables.insert(suffix.to_string(), table.to_json());
                }
                let body = serde_json::json!({
                    "analysis": r.name,
                    "operation": r.operation,
                    "params": r.params,
                    "summary": summary_rows_json(r),
                    "result": r.result,
                    "tables": tables,
                });
                self.add(format!("{}.json", r.name), pretty(&body)?, &r.name, r.operation, &r.params);
            }
        }
        Ok(())
    }

    pub fn finish(mut self) -> Result<BTreeMap<String, String>, AppError> {
        let manifest = pretty(&Value::Array(std::mem::take(&mut self.manifest)))?;
        self.files.insert("manifest.json".into(), manifest);
        Ok(self.files)
    }
}

fn summary_rows_json(r: &AnalysisReport) -> Value {
    let t = summary_table(std::slice::from_ref(r));
    t.to_json()
}

pub fn pretty(v: &Value) -> Result<String, AppError> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s)
}

/// Write every artifact under `dir`, creating it if needed.
pub fn write_all(dir: &Path, files: &BTreeMap<String, String>) -> Result<Vec<PathBuf>, AppError> {
    std::fs::create_dir_all(dir).map_err(|source| AppError::Io { path: dir.into(), source })?;
    let mut written = Vec::with_capacity(files.len());
    for (name, body) in files {
        let path = dir.join(name);
        std::fs::write(&path, body).map_err(|source| AppError::Io { path: path.clone(), source })?;
        written.push(path);
    }
    Ok(written)
}
