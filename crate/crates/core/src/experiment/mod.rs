//! End-to-end runs behind the command line: each run fills a [`Report`]
//! (named text artifacts plus scalar metrics) which is then written to a
//! fresh directory.

pub mod config;
mod runs;

use serde::Serialize;
use serde_json::{Map, Value};
use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

pub use config::{parse_config, resolve_config, ExperimentConfig, Problem};
pub use runs::{run_convergence, run_regularity, run_solve, run_test1, run_test2, generate_data};

/// Which pipeline a run executes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verb {
    Solve,
    GenerateData,
    Train,
    Convergence,
    Regularity,
}

impl Verb {
    pub fn name(self) -> &'static str {
        match self {
            Verb::Solve => "solve",
            Verb::GenerateData => "generate-data",
            Verb::Train => "train",
            Verb::Convergence => "convergence",
            Verb::Regularity => "regularity",
        }
    }
}

/// Artifacts of one run. File contents are kept in memory until
/// [`Report::write`] so a failed run can still flush what it has.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    pub label: String,
    pub files: BTreeMap<String, String>,
    pub metrics: Map<String, Value>,
    pub error: Option<String>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    label: &'a str,
    created: String,
    partial: bool,
    error: Option<&'a str>,
    files: Vec<&'a str>,
}

impl Report {
    pub fn new(label: impl Into<String>) -> Self {
        Self { label: label.into(), ..Default::default() }
    }

    pub fn file(&mut self, name: impl Into<String>, contents: String) {
        self.files.insert(name.into(), contents);
    }

    pub fn metric(&mut self, key: &str, value: impl Into<Value>) {
        self.metrics.insert(key.to_string(), value.into());
    }

    pub fn metric_f64(&self, key: &str) -> Option<f64> {
        self.metrics.get(key).and_then(Value::as_f64)
    }

    pub fn is_partial(&self) -> bool {
        self.error.is_some()
    }

    pub fn metrics_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.metrics)?)
    }

    /// Writes every artifact plus `metrics.json` and `manifest.json` into a
    /// new directory `<root>/<label>-<timestamp>` and returns its path.
    pub fn write(&self, root: &Path) -> Result<PathBuf> {
        fs::create_dir_all(root)?;
        let stamp = chrono::Utc::now().format("%Y%m%d-%H%M%S").to_string();
        let base = format!("{}-{stamp}", self.label);
        let mut dir = root.join(&base);
        let mut n = 1;
        while dir.exists() {
            dir = root.join(format!("{base}-{n}"));
            n += 1;
        }
        fs::create_dir(&dir)?;
        for (name, text) in &self.files {
            fs::write(dir.join(name), text)?;
        }
        fs::write(dir.join("metrics.json"), self.metrics_json()?)?;
        let mut names: Vec<&str> = self.files.keys().map(String::as_str).collect();
        names.push("metrics.json");
        let manifest = Manifest {
            label: &self.label,
            created: chrono::Utc::now().to_rfc3339(),
            partial: self.is_partial(),
            error: self.error.as_deref(),
            files: names,
        };
        fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
        Ok(dir)
    }
}

/// Runs `verb` on `cfg`. The report is returned even when the run fails;
/// the error is recorded in it and handed back alongside.
pub fn execute(verb: Verb, cfg: &ExperimentConfig) -> (Report, Result<()>) {
    let label = match verb {
        Verb::Train => cfg.problem.name().to_string(),
        v => v.name().to_string(),
    };
    let mut report = Report::new(label);
    let outcome = cfg.to_json().and_then(|text| {
        report.file("config.json", text);
        match verb {
            Verb::Solve => run_solve(cfg, &mut report),
            Verb::GenerateData => generate_data(cfg, &mut report),
            Verb::Convergence => run_convergence(cfg, &mut report),
            Verb::Regularity => run_regularity(cfg, &mut report),
            Verb::Train => match cfg.problem {
                Problem::Test2 => run_test2(cfg, &mut report),
                Problem::Convergence => run_convergence(cfg, &mut report),
                Problem::Regularity => run_regularity(cfg, &mut report),
                _ => run_test1(cfg, &mut report),
            },
        }
    });
    if let Err(e) = &outcome {
        report.error = Some(e.to_string());
    }
    (report, outcome)
}

/// Summary of the run directories found under `root`, newest name last.
pub fn summarize_runs(root: &Path) -> Result<String> {
    let mut dirs: Vec<PathBuf> = fs::read_dir(root)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join("manifest.json").is_file())
        .collect();
    dirs.sort();
    let mut out = String::new();
    for d in dirs {
        let manifest: Value = serde_json::from_str(&fs::read_to_string(d.join("manifest.json"))?)?;
        let metrics: Value = fs::read_to_string(d.join("metrics.json"))
            .ok()
            .and_then(|t| serde_json::from_str(&t).ok())
            .unwrap_or(Value::Null);
        let name = d.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        let status = if manifest["partial"].as_bool().unwrap_or(false) { "partial" } else { "ok" };
        out.push_str(&format!("{name} [{status}]\n"));
        if let Some(m) = metrics.as_object() {
            for (k, v) in m {
                out.push_str(&format!("  {k} = {v}\n"));
            }
        }
        if let Some(e) = manifest["error"].as_str() {
            out.push_str(&format!("  error: {e}\n"));
        }
    }
    if out.is_empty() {
        return Err(Error::invalid(format!("no run directories under {}", root.display())));
    }
    Ok(out)
}

/// Comma-joined rows with a header line.
pub(crate) fn csv(header: &str, rows: impl IntoIterator<Item = Vec<f64>>) -> String {
    let mut s = String::from(header);
    s.push('\n');
    for r in rows {
        let line: Vec<String> = r.iter().map(|v| format!("{v:e}")).collect();
        s.push_str(&line.join(","));
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn report_writes_bundle() {
        let tmp = tempfile::tempdir().unwrap();
        let mut r = Report::new("demo");
        r.file("a.csv", "x\n1\n".into());
        r.metric("value", 1.5);
        let d1 = r.write(tmp.path()).unwrap();
        let d2 = r.write(tmp.path()).unwrap();
        assert_ne!(d1, d2);
        assert_eq!(fs::read_to_string(d1.join("a.csv")).unwrap(), "x\n1\n");
        let m: Value = serde_json::from_str(&fs::read_to_string(d1.join("manifest.json")).unwrap()).unwrap();
        assert_eq!(m["partial"], false);
        assert_eq!(m["files"].as_array().unwrap().len(), 2);
        let s = summarize_runs(tmp.path()).unwrap();
        assert!(s.contains("value = 1.5"), "{s}");
    }

    #[test]
    fn csv_roundtrips_values() {
        let s = csv("a,b", [vec![0.1, -2.5e-17]]);
        let row: Vec<f64> = s.lines().nth(1).unwrap().split(',').map(|t| t.parse().unwrap()).collect();
        assert_eq!(row, vec![0.1, -2.5e-17]);
    }
}
