use std::collections::BTreeSet;

use crate::error::{Issues, Result};
use crate::units::{parse_quantity, Dimension};

/// Reads an experiment's parameter table, collecting every problem before
/// reporting.
pub struct Params<'a> {
    section: String,
    table: &'a toml::Table,
    issues: Issues,
    seen: BTreeSet<String>,
}

impl<'a> Params<'a> {
    pub fn new(section: &str, table: &'a toml::Table) -> Self {
        Self { section: section.into(), table, issues: Issues::new(), seen: BTreeSet::new() }
    }

    fn key(&self, k: &str) -> String {
        format!("{}.{k}", self.section)
    }

    fn get(&mut self, k: &str) -> Option<&'a toml::Value> {
        self.seen.insert(k.to_string());
        self.table.get(k)
    }

    /// The raw value, for shapes the typed readers do not cover.
    pub fn raw(&mut self, k: &str) -> Option<&'a toml::Value> {
        self.get(k)
    }

    pub fn issue(&mut self, k: &str, message: impl Into<String>) {
        let key = self.key(k);
        self.issues.push(key, message);
    }

    pub fn optional(&mut self, k: &str, dim: Dimension) -> Option<f64> {
        let v = self.get(k)?;
        match parse_quantity(&self.key(k), v, dim) {
            Ok(x) => Some(x),
            Err(e) => {
                for i in e.issues() {
                    self.issues.push(i.key.clone(), i.message.clone());
                }
                None
            }
        }
    }

    pub fn quantity(&mut self, k: &str, dim: Dimension, default: f64) -> f64 {
        self.optional(k, dim).unwrap_or(default)
    }

    pub fn count(&mut self, k: &str, default: usize) -> usize {
        match self.get(k) {
            None => default,
            Some(toml::Value::Integer(i)) if *i >= 0 => *i as usize,
            Some(other) => {
                self.issue(k, format!("expected a non-negative integer, got {other}"));
                default
            }
        }
    }

    pub fn flag(&mut self, k: &str, default: bool) -> bool {
        match self.get(k) {
            None => default,
            Some(toml::Value::Boolean(b)) => *b,
            Some(other) => {
                self.issue(k, format!("expected true or false, got {other}"));
                default
            }
        }
    }

    pub fn string(&mut self, k: &str, default: &str) -> String {
        match self.get(k) {
            None => default.into(),
            Some(toml::Value::String(s)) => s.clone(),
            Some(other) => {
                self.issue(k, format!("expected a string, got {other}"));
                default.into()
            }
        }
    }

    /// A list of quantities, or a table `{start, stop, points}`.
    pub fn grid(&mut self, k: &str, dim: Dimension, default: impl FnOnce() -> Vec<f64>) -> Vec<f64> {
        let key = self.key(k);
        match self.get(k) {
            None => default(),
            Some(toml::Value::Array(items)) => {
                let mut out = Vec::new();
                for (i, v) in items.iter().enumerate() {
                    match parse_quantity(&format!("{key}[{i}]"), v, dim) {
                        Ok(x) => out.push(x),
                        Err(e) => {
                            for is in e.issues() {
                                self.issues.push(is.key.clone(), is.message.clone());
                            }
                        }
                    }
                }
                if items.is_empty() {
                    self.issues.push(key, "needs at least one value");
                }
                out
            }
            Some(toml::Value::Table(t)) => {
                let mut sub = Params::new(&key, t);
                let start = sub.optional("start", dim);
                let stop = sub.optional("stop", dim);
                let points = sub.count("points", 0);
                if start.is_none() {
                    sub.issue("start", "missing");
                }
                if stop.is_none() {
                    sub.issue("stop", "missing");
                }
                if points == 0 {
                    sub.issue("points", "must be >= 1");
                }
                let issues = sub.into_issues();
                let ok = issues.is_empty();
                self.issues.extend(issues);
                match (start, stop, ok) {
                    (Some(a), Some(b), true) => linspace(a, b, points),
                    _ => Vec::new(),
                }
            }
            Some(other) => {
                self.issues.push(key, format!("expected a list of quantities or {{start, stop, points}}, got {other}"));
                Vec::new()
            }
        }
    }

    /// Every collected problem, including unknown keys.
    pub fn into_issues(mut self) -> Issues {
        let unknown: Vec<String> = self.table.keys().filter(|k| !self.seen.contains(*k)).cloned().collect();
        let valid: Vec<String> = self.seen.iter().cloned().collect();
        for k in unknown {
            let key = self.key(&k);
            self.issues.push(key, format!("unknown key; valid keys: {}", valid.join(", ")));
        }
        self.issues
    }

    /// Fails with every collected problem, including unknown keys.
    pub fn finish(self) -> Result<()> {
        self.into_issues().finish()
    }
}

pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(s: &str) -> toml::Table {
        s.parse().unwrap()
    }

    #[test]
    fn grids_and_lists() {
        let t = table("tau = { start = \"0 ns\", stop = \"4 ns\", points = 5 }\nwaits = [\"1 ms\", \"2 ms\"]");
        let mut p = Params::new("experiment", &t);
        assert_eq!(p.grid("tau", Dimension::Time, Vec::new), linspace(0.0, 4e-9, 5));
        assert_eq!(p.grid("waits", Dimension::Time, Vec::new), [1e-3, 2e-3]);
        assert_eq!(p.grid("other", Dimension::Time, || vec![1.0]), [1.0]);
        p.finish().unwrap();
    }

    #[test]
    fn all_problems_reported_together() {
        let t = table("tau = { start = \"0 ns\", points = 0 }\nenergy = 3\ntypo = 1");
        let mut p = Params::new("experiment", &t);
        p.grid("tau", Dimension::Time, Vec::new);
        p.quantity("energy", Dimension::Energy, 0.0);
        let err = p.finish().unwrap_err();
        let keys: Vec<&str> = err.issues().iter().map(|i| i.key.as_str()).collect();
        for k in ["experiment.tau.stop", "experiment.tau.points", "experiment.energy", "experiment.typo"] {
            assert!(keys.contains(&k), "{k} missing from {keys:?}");
        }
    }
}
