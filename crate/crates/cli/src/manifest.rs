//! `manifest.jsonl`: one line per stage run with content hashes of the files
//! it read and wrote.

use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const MANIFEST: &str = "manifest.jsonl";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Entry {
    pub stage: String,
    pub seed: u64,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
    pub wall_time_s: f64,
}

pub fn sha256_file(path: &Path) -> Result<String, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
    Ok(format!("{:x}", Sha256::digest(&bytes)))
}

/// Manifest key for a path: relative to the output directory when inside it.
pub fn key(out: &Path, path: &Path) -> String {
    path.strip_prefix(out).unwrap_or(path).to_string_lossy().replace('\\', "/")
}

/// Collects hashes while a stage runs, then appends the entry.
pub struct Recorder {
    stage: &'static str,
    seed: u64,
    out: PathBuf,
    started: Instant,
    inputs: BTreeMap<String, String>,
    outputs: BTreeMap<String, String>,
}

impl Recorder {
    pub fn new(stage: &'static str, seed: u64, out: &Path) -> Self {
        Recorder {
            stage,
            seed,
            out: out.to_path_buf(),
            started: Instant::now(),
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
        }
    }

    pub fn input(&mut self, path: &Path) -> Result<(), CliError> {
        self.inputs.insert(key(&self.out, path), sha256_file(path)?);
        Ok(())
    }

    pub fn output(&mut self, path: &Path) -> Result<(), CliError> {
        self.outputs.insert(key(&self.out, path), sha256_file(path)?);
        Ok(())
    }

    pub fn finish(self) -> Result<Entry, CliError> {
        let entry = Entry {
            stage: self.stage.to_string(),
            seed: self.seed,
            inputs: self.inputs,
            outputs: self.outputs,
            wall_time_s: self.started.elapsed().as_secs_f64(),
        };
        let path = self.out.join(MANIFEST);
        let mut file = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
        let line = serde_json::to_string(&entry).expect("serializable");
        writeln!(file, "{line}").map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
        Ok(entry)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_of_known_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("abc");
        std::fs::write(&path, "abc").unwrap();
        assert_eq!(
            sha256_file(&path).unwrap(),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn entries_append_and_read_back() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("x.txt");
        std::fs::write(&file, "x").unwrap();
        for stage in ["synth", "train"] {
            let mut r = Recorder::new(stage, 3, dir.path());
            r.output(&file).unwrap();
            r.finish().unwrap();
        }
        let text = std::fs::read_to_string(dir.path().join(MANIFEST)).unwrap();
        let entries: Vec<Entry> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
        assert_eq!(entries.len(), 2);
        assert_eq!(entries[1].stage, "train");
        assert!(entries[0].outputs.contains_key("x.txt"));
    }
}
