//! Experiment reports (`report.json`) and plot data (`trace*.csv`).

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::enumeration::SCHEME_VERSION;
use crate::hardy::GrowthRow;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Versions {
    pub artifact: String,
    pub enumeration_scheme: String,
}

impl Default for Versions {
    fn default() -> Self {
        Versions {
            artifact: env!("CARGO_PKG_VERSION").to_string(),
            enumeration_scheme: SCHEME_VERSION.to_string(),
        }
    }
}

/// One structured result. `certified = false` marks undetermined or flagged
/// entries and turns the exit code to 2.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultEntry {
    pub label: String,
    pub certified: bool,
    pub data: Value,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadialPoint {
    pub t: u32,
    pub r: f64,
    pub value: f64,
    pub flagged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndexPoint {
    pub k: u64,
    pub partial_sum: f64,
    pub lower_bound: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Trace {
    Radial { label: String, points: Vec<RadialPoint> },
    Index { label: String, points: Vec<IndexPoint> },
}

impl Trace {
    pub fn radial(label: impl Into<String>, rows: &[GrowthRow]) -> Self {
        Trace::Radial {
            label: label.into(),
            points: rows
                .iter()
                .map(|r| RadialPoint { t: r.t, r: r.r, value: r.value, flagged: r.flagged })
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub command: String,
    pub parameters: BTreeMap<String, Value>,
    pub results: Vec<ResultEntry>,
    pub traces: Vec<Trace>,
    pub versions: Versions,
    /// Seconds since the Unix epoch; absent unless requested, so that
    /// identical runs give identical files.
    pub timestamp: Option<u64>,
}

impl ExperimentReport {
    pub fn new(command: impl Into<String>) -> Self {
        ExperimentReport {
            command: command.into(),
            parameters: BTreeMap::new(),
            results: Vec::new(),
            traces: Vec::new(),
            versions: Versions::default(),
            timestamp: None,
        }
    }

    pub fn param(&mut self, key: &str, value: impl Serialize) {
        self.parameters.insert(key.to_string(), to_value(&value));
    }

    pub fn push(&mut self, label: impl Into<String>, certified: bool, data: impl Serialize) {
        self.results.push(ResultEntry { label: label.into(), certified, data: to_value(&data) });
    }

    pub fn all_certified(&self) -> bool {
        self.results.iter().all(|r| r.certified)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report values are plain data");
        s.push('\n');
        s
    }

    /// Write `report.json` and the trace files into `dir`, refusing to
    /// replace an existing report.
    pub fn write(&self, dir: &Path) -> io::Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let path = dir.join("report.json");
        let mut written = Vec::new();
        let mut file = fs::OpenOptions::new().write(true).create_new(true).open(&path)?;
        io::Write::write_all(&mut file, self.to_json().as_bytes())?;
        written.push(path);
        for (name, body) in emit_plot_data(self) {
            let p = dir.join(name);
            fs::write(&p, body)?;
            written.push(p);
        }
        Ok(written)
    }
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("serializable report data")
}

fn num(x: f64) -> String {
    // shortest round-trip representation
    format!("{x:?}")
}

fn radial_csv(points: &[RadialPoint]) -> String {
    let mut s = String::from("t,r,value,log_inv_one_minus_r,log_value,flagged\n");
    for p in points {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            p.t,
            num(p.r),
            num(p.value),
            num(f64::from(p.t) * std::f64::consts::LN_2),
            num(p.value.ln()),
            u8::from(p.flagged)
        );
    }
    s
}

fn index_csv(points: &[IndexPoint]) -> String {
    let mut s = String::from("K,partial_sum,lower_bound\n");
    for p in points {
        let _ = writeln!(s, "{},{},{}", p.k, num(p.partial_sum), num(p.lower_bound));
    }
    s
}

/// `(file name, contents)` for each trace: `trace.csv`, then `trace_2.csv`, ….
pub fn emit_plot_data(report: &ExperimentReport) -> Vec<(String, String)> {
    report
        .traces
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let name = if i == 0 { "trace.csv".to_string() } else { format!("trace_{}.csv", i + 1) };
            let body = match t {
                Trace::Radial { points, .. } => radial_csv(points),
                Trace::Index { points, .. } => index_csv(points),
            };
            (name, body)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ExperimentReport {
        let mut r = ExperimentReport::new("hardy-growth");
        r.param("gamma", 0.75);
        r.push("slope", true, 0.5);
        r.traces.push(Trace::Radial {
            label: "I(r)".into(),
            points: vec![
                RadialPoint { t: 1, r: 0.5, value: std::f64::consts::TAU, flagged: false },
                RadialPoint { t: 2, r: 0.75, value: std::f64::consts::TAU, flagged: true },
            ],
        });
        r
    }

    #[test]
    fn json_round_trip() {
        let r = sample();
        let back: ExperimentReport = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn csv_layout() {
        let files = emit_plot_data(&sample());
        assert_eq!(files.len(), 1);
        let (name, body) = &files[0];
        assert_eq!(name, "trace.csv");
        let lines: Vec<_> = body.lines().collect();
        assert_eq!(lines[0], "t,r,value,log_inv_one_minus_r,log_value,flagged");
        assert!(lines[1].starts_with("1,0.5,6.283185307179586,0.6931471805599453,"));
        assert!(lines[2].ends_with(",1"));
        assert!(!body.contains('\r'));
    }

    #[test]
    fn traceless_report_emits_nothing() {
        assert!(emit_plot_data(&ExperimentReport::new("witness")).is_empty());
    }

    #[test]
    fn existing_report_is_not_replaced() {
        let dir = tempfile::tempdir().unwrap();
        sample().write(dir.path()).unwrap();
        assert!(sample().write(dir.path()).is_err());
    }
}
