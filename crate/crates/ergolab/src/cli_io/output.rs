//! Output files of a run: fixed-format CSV, JSON reports and the manifest that lists them.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{LabError, Result};

use super::config::LabConfig;

pub const MANIFEST_FILE: &str = "manifest.json";

/// A float with 17 significant digits; −0 is written as 0.
pub fn fmt17(x: f64) -> String {
    let x = if x == 0.0 { 0.0 } else { x };
    format!("{x:.16e}")
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Rows of already formatted cells under a header.
#[derive(Debug, Clone, Default)]
pub struct Csv {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        Csv { header: header.iter().map(|s| s.to_string()).collect(), rows: vec![] }
    }

    pub fn row(&mut self, cells: Vec<String>) {
        debug_assert_eq!(cells.len(), self.header.len());
        self.rows.push(cells);
    }

    /// A row of floats.
    pub fn floats(&mut self, values: &[f64]) {
        self.row(values.iter().map(|&v| fmt17(v)).collect());
    }

    pub fn render(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.join(","));
            s.push('\n');
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputRecord {
    pub file: String,
    pub bytes: u64,
    pub sha256: String,
}

/// Files written into one subcommand directory, in write order.
#[derive(Debug)]
pub struct OutputSet {
    pub dir: PathBuf,
    pub records: Vec<OutputRecord>,
}

impl OutputSet {
    /// Prepares `dir`, removing the files listed by a manifest from an earlier run.
    pub fn open(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        let old = dir.join(MANIFEST_FILE);
        if let Ok(text) = fs::read_to_string(&old) {
            if let Ok(m) = serde_json::from_str::<RunManifest>(&text) {
                for r in m.outputs {
                    let p = dir.join(&r.file);
                    if p.is_file() {
                        fs::remove_file(p)?;
                    }
                }
            }
            fs::remove_file(old)?;
        }
        Ok(OutputSet { dir: dir.to_path_buf(), records: vec![] })
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        if self.records.iter().any(|r| r.file == name) || name == MANIFEST_FILE {
            return Err(LabError::Io(format!("output {name} written twice")));
        }
        fs::write(self.dir.join(name), bytes)?;
        self.records.push(OutputRecord { file: name.into(), bytes: bytes.len() as u64, sha256: sha256_hex(bytes) });
        Ok(())
    }

    pub fn csv(&mut self, name: &str, table: &Csv) -> Result<()> {
        self.write(name, table.render().as_bytes())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| LabError::Io(e.to_string()))?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    /// Files in the directory that no record accounts for, and records whose file is
    /// missing or changed.
    pub fn audit(&self) -> Result<Vec<String>> {
        let listed: BTreeSet<&str> = self.records.iter().map(|r| r.file.as_str()).collect();
        let mut problems = vec![];
        let mut names: Vec<String> = fs::read_dir(&self.dir)?
            .filter_map(|e| e.ok())
            .map(|e| e.file_name().to_string_lossy().into_owned())
            .collect();
        names.sort();
        for n in names {
            if n != MANIFEST_FILE && !listed.contains(n.as_str()) {
                problems.push(format!("orphan output {n}"));
            }
        }
        for r in &self.records {
            match fs::read(self.dir.join(&r.file)) {
                Ok(b) if sha256_hex(&b) == r.sha256 => {}
                Ok(_) => problems.push(format!("{} changed after it was written", r.file)),
                Err(_) => problems.push(format!("{} is missing", r.file)),
            }
        }
        Ok(problems)
    }
}

/// One named pass/fail check of a subcommand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CheckResult {
    pub fn new(name: &str, passed: bool, detail: impl Into<String>) -> Self {
        CheckResult { name: name.into(), passed, detail: detail.into() }
    }
}

/// Ties the outputs of one subcommand run to the configuration that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub subcommand: String,
    pub config: LabConfig,
    /// SHA-256 of the canonical TOML text of `config`.
    pub config_hash: String,
    pub seed: u64,
    pub wall_time_seconds: f64,
    pub outputs: Vec<OutputRecord>,
    pub checks: Vec<CheckResult>,
    pub passed: bool,
}

impl RunManifest {
    pub fn config_hash(config: &LabConfig) -> String {
        sha256_hex(config.to_toml().as_bytes())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let text = fs::read_to_string(dir.join(MANIFEST_FILE))?;
        serde_json::from_str(&text).map_err(|e| LabError::Io(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, f64::MIN_POSITIVE, 1.0 + f64::EPSILON] {
            let s = fmt17(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
            let digits = s.split('e').next().unwrap().chars().filter(|c| c.is_ascii_digit()).count();
            assert_eq!(digits, 17);
        }
        assert_eq!(fmt17(-0.0), fmt17(0.0));
    }

    #[test]
    fn audit_flags_orphans_and_changes() {
        let dir = std::env::temp_dir().join(format!("ergolab-audit-{}", std::process::id()));
        let _ = fs::remove_dir_all(&dir);
        let mut out = OutputSet::open(&dir).unwrap();
        let mut t = Csv::new(&["a", "b"]);
        t.floats(&[1.0, 2.0]);
        out.csv("t.csv", &t).unwrap();
        assert!(out.audit().unwrap().is_empty());
        fs::write(dir.join("stray.txt"), b"x").unwrap();
        fs::write(dir.join("t.csv"), b"a,b\n").unwrap();
        let p = out.audit().unwrap();
        assert_eq!(p.len(), 2, "{p:?}");
        assert!(out.write("t.csv", b"again").is_err());
        fs::remove_dir_all(&dir).unwrap();
    }
}
