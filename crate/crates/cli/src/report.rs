use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

#[derive(Debug, Clone)]
pub struct Verdict {
    pub key: String,
    pub passed: bool,
    pub text: String,
    pub tol: f64,
}

#[derive(Debug, Clone, Default)]
pub struct Report {
    pub command: String,
    pub input: String,
    pub digest: String,
    pub scalars: Vec<(String, String)>,
    pub verdicts: Vec<Verdict>,
    pub csv: Vec<PathBuf>,
    pub notes: Vec<String>,
}

pub fn num(x: f64) -> String {
    format!("{x:.6e}")
}

/// Short form for tolerances: `1e-7` stays `1e-7`, long mantissas are cut.
pub fn tol(x: f64) -> String {
    let s = format!("{x:e}");
    if s.len() <= 8 {
        s
    } else {
        format!("{x:.3e}")
    }
}

pub fn point(x: &[f64]) -> String {
    let parts: Vec<String> = x.iter().map(|v| format!("{v:.6}")).collect();
    format!("({})", parts.join(", "))
}

impl Report {
    pub fn scalar(&mut self, key: &str, value: impl ToString) {
        self.scalars.push((key.to_string(), value.to_string()));
    }

    pub fn real(&mut self, key: &str, value: f64) {
        self.scalar(key, num(value));
    }

    pub fn verdict(&mut self, key: &str, passed: bool, text: impl Into<String>, tol: f64) {
        self.verdicts.push(Verdict {
            key: key.to_string(),
            passed,
            text: text.into(),
            tol,
        });
    }

    pub fn note(&mut self, text: impl Into<String>) {
        self.notes.push(text.into());
    }

    pub fn text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "command: {}", self.command);
        let _ = writeln!(s, "input:   {}", self.input);
        let _ = writeln!(s, "digest:  {}", self.digest);
        if !self.scalars.is_empty() {
            let width = self.scalars.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
            s.push_str("results:\n");
            for (k, v) in &self.scalars {
                let _ = writeln!(s, "  {k:<width$}  {v}");
            }
        }
        if !self.verdicts.is_empty() {
            s.push_str("verdicts:\n");
            for v in &self.verdicts {
                let mark = if v.passed { "ok" } else { "--" };
                let _ = writeln!(s, "  [{mark}] {} (tol {})", v.text, tol(v.tol));
            }
        }
        for n in &self.notes {
            let _ = writeln!(s, "note: {n}");
        }
        if !self.csv.is_empty() {
            s.push_str("csv:\n");
            for p in &self.csv {
                let _ = writeln!(s, "  {}", p.display());
            }
        }
        s
    }

    pub fn key_values(&self) -> String {
        let mut s = String::from("[report]\n");
        let _ = writeln!(s, "command={}", self.command);
        let _ = writeln!(s, "input={}", self.input);
        let _ = writeln!(s, "digest={}", self.digest);
        for (k, v) in &self.scalars {
            let _ = writeln!(s, "{k}={v}");
        }
        for v in &self.verdicts {
            let _ = writeln!(s, "verdict.{}={}", v.key, if v.passed { "pass" } else { "fail" });
            let _ = writeln!(s, "verdict.{}.tol={:e}", v.key, v.tol);
            let _ = writeln!(s, "verdict.{}.text={}", v.key, v.text);
        }
        for (i, p) in self.csv.iter().enumerate() {
            let _ = writeln!(s, "csv.{i}={}", p.display());
        }
        s
    }
}

/// Writes a CSV with a header row; floats use the shortest round-trip form.
pub fn write_csv(report: &mut Report, dir: &Path, name: &str, header: &[String], rows: &[Vec<f64>]) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create output directory {}", dir.display()))?;
    let path = dir.join(name);
    let mut w = csv::Writer::from_path(&path).with_context(|| format!("cannot write {}", path.display()))?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.iter().map(|x| format!("{x:e}")))?;
    }
    w.flush()?;
    report.csv.push(path);
    Ok(())
}

pub fn coord_header(n: usize) -> Vec<String> {
    (1..=n).map(|k| format!("x{k}")).collect()
}

pub fn matrix_header(name: &str, n: usize) -> Vec<String> {
    (1..=n)
        .flat_map(|i| (1..=n).map(move |j| format!("{name}{i}{j}")))
        .collect()
}
