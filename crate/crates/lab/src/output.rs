//! CSV formatting, gates and the run manifest.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ExperimentConfig;

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// A CSV table with a fixed header. Cells are written verbatim.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Self { header: header.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.header.len(), "row width must match the header");
        self.rows.push(row);
    }

    /// Appends a row of floats after leading text cells.
    pub fn push_mixed(&mut self, text: &[&str], nums: &[f64]) {
        let row = text.iter().map(|s| s.to_string()).chain(nums.iter().map(|&x| fmt_f64(x))).collect();
        self.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GateOp {
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = ">=")]
    AtLeast,
}

impl GateOp {
    pub fn symbol(self) -> &'static str {
        match self {
            GateOp::AtMost => "<=",
            GateOp::AtLeast => ">=",
        }
    }
}

/// One gated quantity of a run. NaN values never pass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gate {
    pub name: String,
    pub value: f64,
    pub op: GateOp,
    pub threshold: f64,
    pub pass: bool,
}

impl Gate {
    pub fn at_most(name: &str, value: f64, threshold: f64) -> Self {
        Self { name: name.into(), value, op: GateOp::AtMost, threshold, pass: value <= threshold }
    }

    pub fn at_least(name: &str, value: f64, threshold: f64) -> Self {
        Self { name: name.into(), value, op: GateOp::AtLeast, threshold, pass: value >= threshold }
    }

    /// A yes/no outcome, recorded as value 1 or 0 against threshold 1.
    pub fn flag(name: &str, ok: bool) -> Self {
        Self::at_least(name, if ok { 1.0 } else { 0.0 }, 1.0)
    }
}

pub fn summary_table(gates: &[Gate]) -> Table {
    let mut t = Table::new(&["name", "value", "threshold", "pass"]);
    for g in gates {
        t.push(vec![g.name.clone(), fmt_f64(g.value), fmt_f64(g.threshold), g.pass.to_string()]);
    }
    t
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    /// Path relative to the output directory.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

impl FileEntry {
    pub fn new(path: &str, contents: &[u8]) -> Self {
        Self { path: path.into(), sha256: hex::encode(Sha256::digest(contents)), bytes: contents.len() as u64 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

/// Bunching numbers of the cocycle under study.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BunchingFlags {
    pub lambda: f64,
    pub sigma: f64,
    pub beta: f64,
    pub theta: f64,
    pub e1: bool,
    pub e3: bool,
    pub e3prime: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub seed: u64,
    pub wall_seconds: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bunching: Option<BunchingFlags>,
    /// Qualitative outcomes, such as an obstruction verdict.
    #[serde(default)]
    pub verdicts: Vec<String>,
    #[serde(default)]
    pub gates: Vec<Gate>,
    #[serde(default)]
    pub timings: Vec<StageTiming>,
    #[serde(default)]
    pub files: Vec<FileEntry>,
    pub config: ExperimentConfig,
}

impl RunManifest {
    pub fn new(command: &str, config: ExperimentConfig) -> Self {
        Self {
            command: command.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            seed: config.seed,
            wall_seconds: 0.0,
            bunching: None,
            verdicts: Vec::new(),
            gates: Vec::new(),
            timings: Vec::new(),
            files: Vec::new(),
            config,
        }
    }

    pub fn passed(&self) -> bool {
        self.gates.iter().all(|g| g.pass)
    }

    pub fn gate(&self, name: &str) -> Option<&Gate> {
        self.gates.iter().find(|g| g.name == name)
    }

    pub fn file(&self, path: &str) -> Option<&FileEntry> {
        self.files.iter().find(|f| f.path == path)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("manifests contain only TOML-representable values")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip_through_csv() {
        for x in [0.1, -1.0 / 3.0, 1e-300, 6.02214076e23, f64::MIN_POSITIVE] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn nan_gates_fail() {
        assert!(!Gate::at_most("x", f64::NAN, 1.0).pass);
        assert!(!Gate::at_least("x", f64::NAN, 1.0).pass);
    }

    #[test]
    fn digest_of_empty_file() {
        let e = FileEntry::new("a.csv", b"");
        assert_eq!(e.sha256, "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    }
}
