//! Metric curves stored as CSV with header `t_age,t_G,init,metric,value,seed`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rbmlab::data::write_atomic;
use rbmlab::{RbmError, Result};

use crate::config::InitMode;

pub const HEADER: &str = "t_age,t_G,init,metric,value,seed";

#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub t_age: u64,
    pub t_g: u64,
    pub init: InitMode,
    pub metric: String,
    pub value: f64,
    pub seed: u64,
}

impl Record {
    fn key(&self) -> (u64, u64, InitMode, &str) {
        (self.t_age, self.t_g, self.init, &self.metric)
    }
}

/// Records ordered by `(t_age, t_G, init, metric)`, one per key.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricCurve {
    records: Vec<Record>,
}

impl MetricCurve {
    pub fn records(&self) -> &[Record] {
        &self.records
    }

    /// Adds records, replacing any with the same key.
    pub fn merge(&mut self, new: impl IntoIterator<Item = Record>) {
        let mut map: BTreeMap<(u64, u64, InitMode, String), Record> = self
            .records
            .drain(..)
            .map(|r| ((r.t_age, r.t_g, r.init, r.metric.clone()), r))
            .collect();
        for r in new {
            map.insert((r.t_age, r.t_g, r.init, r.metric.clone()), r);
        }
        self.records = map.into_values().collect();
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(HEADER);
        s.push('\n');
        for r in &self.records {
            writeln!(
                s,
                "{},{},{},{},{:?},{}",
                r.t_age,
                r.t_g,
                r.init.as_str(),
                r.metric,
                r.value,
                r.seed
            )
            .unwrap();
        }
        s
    }

    pub fn parse(text: &str, name: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h.trim() == HEADER => {}
            _ => {
                return Err(RbmError::Format {
                    location: format!("{name}, line 1"),
                    message: format!("expected header '{HEADER}'"),
                })
            }
        }
        let mut records = Vec::new();
        for (i, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let bad = |msg: String| RbmError::Format {
                location: format!("{name}, line {}", i + 1),
                message: msg,
            };
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 6 {
                return Err(bad(format!("expected 6 fields, found {}", f.len())));
            }
            let int = |s: &str| s.trim().parse::<u64>().map_err(|e| bad(format!("'{s}': {e}")));
            records.push(Record {
                t_age: int(f[0])?,
                t_g: int(f[1])?,
                init: f[2].trim().parse().map_err(|e: RbmError| bad(e.to_string()))?,
                metric: f[3].trim().to_string(),
                value: f[4].trim().parse().map_err(|e| bad(format!("'{}': {e}", f[4])))?,
                seed: int(f[5])?,
            });
        }
        let mut curve = MetricCurve::default();
        let n = records.len();
        curve.merge(records);
        if curve.records.len() != n {
            return Err(RbmError::Format {
                location: name.to_string(),
                message: "duplicate (t_age, t_G, init, metric) records".into(),
            });
        }
        Ok(curve)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| RbmError::Input(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_csv().as_bytes())
    }

    pub fn t_ages(&self) -> Vec<u64> {
        let mut a: Vec<u64> = self.records.iter().map(|r| r.t_age).collect();
        a.dedup();
        a
    }

    /// The `(t_G, value)` series of one metric, sorted by `t_G`.
    pub fn series(&self, t_age: u64, init: InitMode, metric: &str) -> (Vec<u64>, Vec<f64>) {
        self.records
            .iter()
            .filter(|r| r.t_age == t_age && r.init == init && r.metric == metric)
            .map(|r| (r.t_g, r.value))
            .unzip()
    }

    pub fn metrics(&self) -> Vec<String> {
        let mut m: Vec<String> = self.records.iter().map(|r| r.metric.clone()).collect();
        m.sort();
        m.dedup();
        m
    }

    pub fn has_init(&self, t_age: u64, init: InitMode) -> bool {
        self.records.iter().any(|r| r.t_age == t_age && r.init == init)
    }

    pub fn contains_key(&self, r: &Record) -> bool {
        self.records.iter().any(|x| x.key() == r.key())
    }
}
