//! Run reports and their JSON, CSV and text renderings.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::axioms::{AxiomKind, AxiomReport, Witness};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("cannot write report to {path}: {source}")]
    Unwritable { path: String, source: std::io::Error },
    #[error("cannot serialise report: {0}")]
    Serialise(#[from] serde_json::Error),
}

/// One line of the `residuals` array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualEntry {
    pub check: String,
    pub axiom: AxiomKind,
    pub pass: bool,
    pub max_residual: f64,
    pub tolerance: f64,
    pub samples_used: usize,
}

impl From<&AxiomReport> for ResidualEntry {
    fn from(r: &AxiomReport) -> Self {
        ResidualEntry {
            check: r.check.clone(),
            axiom: r.axiom,
            pass: r.pass,
            max_residual: r.max_residual,
            tolerance: r.tolerance,
            samples_used: r.samples_used,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledWitness {
    pub check: String,
    pub witness: Witness,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub command: String,
    pub config_echo: Value,
    pub pass: bool,
    pub residuals: Vec<ResidualEntry>,
    pub witnesses: Vec<LabeledWitness>,
    /// `(x, φ̂(x))` rows for commands that tabulate a generator.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<Vec<(f64, f64)>>,
    #[serde(default, skip_serializing_if = "Value::is_null")]
    pub details: Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub timing_ms: u64,
    pub seed: u64,
}

impl RunReport {
    pub fn new(command: impl Into<String>, config_echo: Value, seed: u64) -> Self {
        RunReport {
            command: command.into(),
            config_echo,
            pass: true,
            residuals: Vec::new(),
            witnesses: Vec::new(),
            table: None,
            details: Value::Null,
            error: None,
            timing_ms: 0,
            seed,
        }
    }

    /// Records a check; a failure clears `pass` and keeps its witness.
    pub fn add(&mut self, r: &AxiomReport) {
        self.add_expecting(r, true);
    }

    /// Records a check whose expected outcome is `expected`; `pass` is
    /// cleared when the outcome differs.
    pub fn add_expecting(&mut self, r: &AxiomReport, expected: bool) {
        self.residuals.push(ResidualEntry::from(r));
        if let Some(w) = &r.witness {
            self.witnesses.push(LabeledWitness {
                check: r.check.clone(),
                witness: w.clone(),
            });
        }
        if r.pass != expected {
            self.pass = false;
        }
    }

    pub fn detail(&mut self, key: &str, value: impl Serialize) {
        if !self.details.is_object() {
            self.details = Value::Object(Default::default());
        }
        let v = serde_json::to_value(value).unwrap_or(Value::Null);
        self.details.as_object_mut().expect("object").insert(key.to_string(), v);
    }

    pub fn to_json(&self) -> Result<String, ReportError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// The table as `x,phi` rows when present; otherwise one row per check.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        match &self.table {
            Some(rows) => {
                out.push_str("x,phi\n");
                for (x, y) in rows {
                    let _ = writeln!(out, "{x:?},{y:?}");
                }
            }
            None => {
                out.push_str("check,pass,max_residual,tolerance,samples_used\n");
                for r in &self.residuals {
                    let _ = writeln!(
                        out,
                        "{},{},{:?},{:?},{}",
                        r.check, r.pass, r.max_residual, r.tolerance, r.samples_used
                    );
                }
            }
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let verdict = if self.pass { "PASS" } else { "FAIL" };
        let _ = writeln!(out, "{}: {verdict} (seed {}, {} ms)", self.command, self.seed, self.timing_ms);
        if let Some(e) = &self.error {
            let _ = writeln!(out, "  error: {e}");
        }
        let width = self.residuals.iter().map(|r| r.check.chars().count()).max().unwrap_or(0);
        for r in &self.residuals {
            let _ = writeln!(
                out,
                "  [{}] {:<width$} max residual {:.3e} (tolerance {:.3e}, {} samples)",
                if r.pass { "ok" } else { "!!" },
                r.check,
                r.max_residual,
                r.tolerance,
                r.samples_used
            );
        }
        for w in &self.witnesses {
            let _ = writeln!(
                out,
                "  witness for {}: inputs {:?}, lhs {}, rhs {}",
                w.check, w.witness.inputs, w.witness.lhs, w.witness.rhs
            );
        }
        if let Some(rows) = &self.table {
            let _ = writeln!(out, "  {:>14}  {:>14}", "x", "phi");
            for (x, y) in rows {
                let _ = writeln!(out, "  {x:>14.6}  {y:>14.6}");
            }
        }
        if let Value::Object(map) = &self.details {
            for (k, v) in map {
                let _ = writeln!(out, "  {k}: {v}");
            }
        }
        out
    }

    pub fn render(&self, format: Format) -> Result<String, ReportError> {
        Ok(match format {
            Format::Json => self.to_json()? + "\n",
            Format::Csv => self.to_csv(),
            Format::Text => self.to_text(),
        })
    }
}

/// Writes the rendered report to `path`, or to stdout when `path` is `None`.
pub fn write_report(report: &RunReport, format: Format, path: Option<&Path>) -> Result<(), ReportError> {
    let body = report.render(format)?;
    match path {
        Some(p) => std::fs::write(p, body).map_err(|source| ReportError::Unwritable {
            path: p.display().to_string(),
            source,
        }),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(body.as_bytes())
                .map_err(|source| ReportError::Unwritable {
                    path: "<stdout>".into(),
                    source,
                })
        }
    }
}
