//! Report bundles: named metrics with tolerances, JSON summaries and CSV tables.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::Result;

/// How a metric is compared with its tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Compare {
    /// `value <= tolerance`
    AtMost,
    /// `value >= tolerance`
    AtLeast,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metric {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub compare: Compare,
    pub pass: bool,
}

impl Metric {
    pub fn at_most(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Metric {
            name: name.into(),
            value,
            tolerance,
            compare: Compare::AtMost,
            pass: value <= tolerance,
        }
    }

    pub fn at_least(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Metric {
            name: name.into(),
            value,
            tolerance,
            compare: Compare::AtLeast,
            pass: value >= tolerance,
        }
    }
}

/// CSV artifact. `units` is written as a leading `#` comment line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub file: String,
    pub units: String,
    pub csv: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportBundle {
    pub scenario: String,
    pub seed: u64,
    pub version: String,
    pub metrics: Vec<Metric>,
    /// Reported values without a pass/fail flag.
    pub values: BTreeMap<String, Value>,
    #[serde(skip)]
    pub tables: Vec<Table>,
    #[serde(skip)]
    pub config: String,
}

impl ReportBundle {
    pub fn new(scenario: &str, seed: u64, config: &str) -> Self {
        ReportBundle {
            scenario: scenario.to_string(),
            seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            config: config.to_string(),
            ..Default::default()
        }
    }

    pub fn push(&mut self, m: Metric) {
        self.metrics.push(m);
    }

    pub fn value(&mut self, key: impl Into<String>, v: impl Serialize) {
        self.values
            .insert(key.into(), serde_json::to_value(v).unwrap_or(Value::Null));
    }

    pub fn table(&mut self, file: impl Into<String>, units: impl Into<String>, csv: String) {
        self.tables.push(Table {
            file: file.into(),
            units: units.into(),
            csv,
        });
    }

    pub fn all_pass(&self) -> bool {
        self.metrics.iter().all(|m| m.pass)
    }

    pub fn failures(&self) -> Vec<&Metric> {
        self.metrics.iter().filter(|m| !m.pass).collect()
    }

    pub fn summary_json(&self) -> String {
        let mut v = serde_json::to_value(self).unwrap_or(Value::Null);
        if let Value::Object(map) = &mut v {
            map.insert("all_pass".into(), Value::Bool(self.all_pass()));
        }
        serde_json::to_string_pretty(&v).unwrap_or_default()
    }

    /// Writes `summary.json`, `config.toml` and every table into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("summary.json"), self.summary_json() + "\n")?;
        if !self.config.is_empty() {
            fs::write(dir.join("config.toml"), &self.config)?;
        }
        for t in &self.tables {
            fs::write(dir.join(&t.file), format!("# units: {}\n{}", t.units, t.csv))?;
        }
        Ok(())
    }

    /// One line per metric, for the terminal.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for m in &self.metrics {
            let op = match m.compare {
                Compare::AtMost => "<=",
                Compare::AtLeast => ">=",
            };
            out.push_str(&format!(
                "{} {}: {:.4e} ({} {:.4e})\n",
                if m.pass { "PASS" } else { "FAIL" },
                m.name,
                m.value,
                op,
                m.tolerance
            ));
        }
        out
    }
}
