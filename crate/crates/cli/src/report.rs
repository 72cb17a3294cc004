//! Reports (JSON) and traces (CSV).

use std::path::Path;

use anyhow::Context;
use serde::Serialize;

use crate::config::RunConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Self { name: name.into(), header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push<I: IntoIterator<Item = String>>(&mut self, row: I) {
        self.rows.push(row.into_iter().collect());
    }

    pub fn to_csv(&self) -> anyhow::Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        Ok(String::from_utf8(w.into_inner()?)?)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub results: serde_json::Value,
}

/// What a command produced, before it is written anywhere.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub command: &'static str,
    pub summary: String,
    pub results: serde_json::Value,
    pub tables: Vec<Table>,
    /// Extra text artifacts as (file name, contents).
    pub files: Vec<(String, String)>,
}

impl Outcome {
    pub fn report(&self, cfg: &RunConfig) -> Report {
        Report {
            command: self.command.into(),
            config_hash: cfg.hash(),
            seed: cfg.sim.seed,
            results: self.results.clone(),
        }
    }

    /// Writes `<command>.json`, one CSV per table and the extra files into `dir`.
    pub fn write(&self, cfg: &RunConfig, dir: &Path) -> anyhow::Result<()> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let json = serde_json::to_string_pretty(&self.report(cfg))?;
        std::fs::write(dir.join(format!("{}.json", self.command)), json + "\n")?;
        for t in &self.tables {
            std::fs::write(dir.join(format!("{}.csv", t.name)), t.to_csv()?)?;
        }
        for (name, text) in &self.files {
            std::fs::write(dir.join(name), text)?;
        }
        Ok(())
    }
}

/// Wilson score interval at 95% confidence.
pub fn wilson(successes: u64, trials: u64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959_963_984_540_054;
    let n = trials as f64;
    let p = successes as f64 / n;
    let denom = 1.0 + z * z / n;
    let centre = (p + z * z / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt() / denom;
    let lo = if successes == 0 { 0.0 } else { (centre - half).max(0.0) };
    let hi = if successes == trials { 1.0 } else { (centre + half).min(1.0) };
    (lo, hi)
}

pub fn fmt(v: f64) -> String {
    format!("{v:.6}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_known_value() {
        // 5 of 10: 0.2366 to 0.7634
        let (lo, hi) = wilson(5, 10);
        assert!((lo - 0.2366).abs() < 1e-4 && (hi - 0.7634).abs() < 1e-4);
        let (lo, hi) = wilson(10, 10);
        assert!(hi == 1.0 && lo > 0.69);
    }

    #[test]
    fn csv_layout() {
        let mut t = Table::new("x", &["a", "b"]);
        t.push(["1".to_string(), "2".to_string()]);
        assert_eq!(t.to_csv().unwrap(), "a,b\n1,2\n");
    }
}
