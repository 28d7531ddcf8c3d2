//! Tables, acceptance checks and the CSV/JSON writers.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    F(f64),
    I(i64),
    U(u64),
    S(String),
}

impl From<f64> for Cell {
    fn from(x: f64) -> Cell {
        Cell::F(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Cell {
        Cell::I(x as i64)
    }
}

impl From<u64> for Cell {
    fn from(x: u64) -> Cell {
        Cell::U(x)
    }
}

impl From<&str> for Cell {
    fn from(x: &str) -> Cell {
        Cell::S(x.to_string())
    }
}

impl From<String> for Cell {
    fn from(x: String) -> Cell {
        Cell::S(x)
    }
}

fn quote(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

impl Cell {
    /// Shortest decimal that round-trips, in exponent form outside `[1e-5, 1e16)`.
    pub fn render(&self) -> String {
        match self {
            Cell::F(x) if x.is_nan() => "nan".into(),
            Cell::F(x) if *x == 0.0 || (1e-5..1e16).contains(&x.abs()) => format!("{x}"),
            Cell::F(x) => format!("{x:e}"),
            Cell::I(i) => i.to_string(),
            Cell::U(u) => u.to_string(),
            Cell::S(s) => quote(s),
        }
    }
}

/// One measurement per row; column headers carry units.
#[derive(Clone, Debug, Default)]
pub struct Table {
    pub columns: Vec<(String, String)>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[(&str, &str)]) -> Table {
        Table {
            columns: columns
                .iter()
                .map(|(n, u)| (n.to_string(), u.to_string()))
                .collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width");
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|(n, _)| n == name)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let header: Vec<String> = self
            .columns
            .iter()
            .map(|(n, u)| {
                if u.is_empty() {
                    quote(n)
                } else {
                    quote(&format!("{n} [{u}]"))
                }
            })
            .collect();
        out.push_str(&header.join(","));
        out.push_str("\r\n");
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::render).collect();
            out.push_str(&cells.join(","));
            out.push_str("\r\n");
        }
        out
    }
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct CheckResult {
    pub check: String,
    pub value: f64,
    pub bound: String,
    pub pass: bool,
}

impl CheckResult {
    pub fn at_most(check: &str, value: f64, bound: f64) -> CheckResult {
        CheckResult {
            check: check.into(),
            value,
            bound: format!("<= {bound}"),
            pass: value <= bound,
        }
    }

    pub fn at_least(check: &str, value: f64, bound: f64) -> CheckResult {
        CheckResult {
            check: check.into(),
            value,
            bound: format!(">= {bound}"),
            pass: value >= bound,
        }
    }

    pub fn within(check: &str, value: f64, lo: f64, hi: f64) -> CheckResult {
        CheckResult {
            check: check.into(),
            value,
            bound: format!("[{lo}, {hi}]"),
            pass: lo <= value && value <= hi,
        }
    }

    pub fn flag(check: &str, ok: bool, value: f64, bound: &str) -> CheckResult {
        CheckResult {
            check: check.into(),
            value,
            bound: bound.into(),
            pass: ok,
        }
    }
}

/// Output of one experiment.
#[derive(Clone, Debug, Default)]
pub struct Report {
    pub table: Table,
    pub checks: Vec<CheckResult>,
    /// Fitted constants and other scalar summaries.
    pub fitted: serde_json::Map<String, serde_json::Value>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn fit(&mut self, key: &str, value: impl Into<serde_json::Value>) {
        self.fitted.insert(key.into(), value.into());
    }

    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.check == name)
    }
}

#[derive(Serialize)]
pub struct Summary<'a> {
    pub command: &'a str,
    pub config_echo: std::collections::BTreeMap<String, String>,
    pub results: &'a [CheckResult],
    pub fitted: &'a serde_json::Map<String, serde_json::Value>,
    pub seed: u64,
    pub version: &'static str,
    pub git_describe: String,
    pub wall_time_s: f64,
}

/// `git describe --always --dirty` of the working directory, if available.
pub fn git_describe() -> String {
    std::process::Command::new("git")
        .args(["describe", "--always", "--dirty"])
        .output()
        .ok()
        .filter(|o| o.status.success())
        .and_then(|o| String::from_utf8(o.stdout).ok())
        .map(|s| s.trim().to_string())
        .unwrap_or_else(|| "unknown".into())
}

pub fn write_file(path: &Path, contents: &str) -> std::io::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(contents.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for x in [
            0.1,
            1.0 / 3.0,
            4.0 * std::f64::consts::PI * std::f64::consts::PI,
            1e-300,
            -2.5e17,
        ] {
            let s = Cell::F(x).render();
            assert_eq!(s.parse::<f64>().unwrap(), x);
        }
        assert_eq!(Cell::F(0.1).render(), "0.1");
        assert_eq!(Cell::F(2.5e-8).render(), "2.5e-8");
    }

    #[test]
    fn csv_quotes_and_units() {
        let mut t = Table::new(&[("lambda", ""), ("E", "energy units"), ("note", "")]);
        t.push(vec![16.0.into(), 4.5.into(), "a,b".into()]);
        assert_eq!(
            t.to_csv(),
            "lambda,E [energy units],note\r\n16,4.5,\"a,b\"\r\n"
        );
    }
}
