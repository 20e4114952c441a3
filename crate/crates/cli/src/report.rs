//! CSV tables and the structured text report.

use std::fmt::Write as _;
use std::io;
use std::path::Path;

/// One CSV artifact; every column carries a one-line description for the report header.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub file: String,
    pub columns: Vec<(String, String)>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(file: &str, columns: &[(&str, &str)]) -> Self {
        Table {
            file: file.to_string(),
            columns: columns.iter().map(|(c, d)| (c.to_string(), d.to_string())).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len(), "row width for {}", self.file);
        self.rows.push(row);
    }

    pub fn write(&self, dir: &Path) -> io::Result<()> {
        let mut w = csv::Writer::from_path(dir.join(&self.file))?;
        w.write_record(self.columns.iter().map(|c| c.0.as_str()))?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        w.flush()
    }
}

/// Float cell: shortest round-trip text, empty for missing values.
pub fn num(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v}")
    }
}

pub fn opt<T: ToString>(v: Option<T>) -> String {
    v.map_or(String::new(), |x| x.to_string())
}

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Outcome {
    pub tables: Vec<Table>,
    /// (section, key, value) in output order.
    pub results: Vec<(String, String, String)>,
    pub checks: Vec<Check>,
    pub notes: Vec<String>,
}

impl Outcome {
    pub fn result(&mut self, section: &str, key: &str, value: impl ToString) {
        self.results.push((section.to_string(), key.to_string(), value.to_string()));
    }

    pub fn check(&mut self, name: &str, pass: bool, detail: impl Into<String>) {
        self.checks.push(Check { name: name.to_string(), pass, detail: detail.into() });
    }

    pub fn note(&mut self, text: impl Into<String>) {
        self.notes.push(text.into());
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

/// Sectioned `key: value` text. Nothing run-dependent (paths, timings, workers) is included.
pub fn render(experiment: &str, header: &[(String, String)], outcome: &Outcome) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# hitstat report");
    let _ = writeln!(s, "# experiment: {experiment}");
    if !outcome.tables.is_empty() {
        let _ = writeln!(s, "# columns:");
        for t in &outcome.tables {
            let _ = writeln!(s, "#   {}", t.file);
            for (c, d) in &t.columns {
                let _ = writeln!(s, "#     {c}: {d}");
            }
        }
    }
    let _ = writeln!(s, "\n[run]");
    for (k, v) in header {
        let _ = writeln!(s, "{k}: {v}");
    }
    let mut current = "";
    for (section, k, v) in &outcome.results {
        if section != current {
            let _ = writeln!(s, "\n[{section}]");
            current = section;
        }
        let _ = writeln!(s, "{k}: {v}");
    }
    if !outcome.notes.is_empty() {
        let _ = writeln!(s, "\n[notes]");
        for (i, n) in outcome.notes.iter().enumerate() {
            let _ = writeln!(s, "note_{}: {n}", i + 1);
        }
    }
    let _ = writeln!(s, "\n[checks]");
    for c in &outcome.checks {
        let _ = writeln!(s, "{}: {} ({})", c.name, if c.pass { "PASS" } else { "FAIL" }, c.detail);
    }
    let failed = outcome.checks.iter().filter(|c| !c.pass).count();
    let _ = writeln!(s, "\n[summary]");
    let _ = writeln!(s, "checks: {}", outcome.checks.len());
    let _ = writeln!(s, "failed: {failed}");
    let _ = writeln!(s, "verdict: {}", if failed == 0 { "PASS" } else { "FAIL" });
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn report_sections_and_column_docs() {
        let mut o = Outcome::default();
        let mut t = Table::new("x.csv", &[("n", "index"), ("v", "value")]);
        t.push(vec!["1".into(), num(0.5)]);
        o.tables.push(t);
        o.result("results", "mean", 2.0);
        o.check("kac", true, "z = 0.1");
        o.check("other", false, "bad");
        let r = render("kac", &[("system".into(), "doubling".into())], &o);
        assert!(r.contains("#     v: value"));
        assert!(r.contains("[results]\nmean: 2"));
        assert!(r.contains("kac: PASS (z = 0.1)"));
        assert!(r.contains("verdict: FAIL"));
        assert_eq!(num(f64::NAN), "");
        assert_eq!(num(0.1), "0.1");
    }
}
