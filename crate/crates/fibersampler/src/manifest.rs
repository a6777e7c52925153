//! Run manifests: config snapshot, versions, timings and output checksums.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::error::{RunError, RunResult};
use crate::formats::{BASIS_FORMAT_VERSION, POLICY_FORMAT_VERSION};

pub const MANIFEST_FILE: &str = "manifest.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes through a temporary sibling and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> RunResult<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, bytes).map_err(|e| RunError::io("output", &tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| RunError::io("output", path, e))
}

#[derive(Debug)]
pub struct RunManifest {
    command: String,
    config: BTreeMap<String, String>,
    timings: Vec<(String, f64)>,
    outputs: BTreeMap<String, String>,
    notes: Vec<String>,
    dir: PathBuf,
}

impl RunManifest {
    pub fn new(command: &str, config: BTreeMap<String, String>, dir: &Path) -> RunResult<Self> {
        std::fs::create_dir_all(dir).map_err(|e| RunError::io("output", dir, e))?;
        Ok(Self {
            command: command.into(),
            config,
            timings: Vec::new(),
            outputs: BTreeMap::new(),
            notes: Vec::new(),
            dir: dir.to_path_buf(),
        })
    }

    /// Runs `f` and records its wall-clock time under `stage`.
    pub fn time<T>(&mut self, stage: &str, f: impl FnOnce() -> RunResult<T>) -> RunResult<T> {
        let t = Instant::now();
        let out = f()?;
        self.timings.push((stage.into(), t.elapsed().as_secs_f64()));
        Ok(out)
    }

    pub fn note(&mut self, msg: impl Into<String>) {
        self.notes.push(msg.into());
    }

    /// Writes an output file and records its checksum.
    pub fn emit(&mut self, name: &str, contents: &str) -> RunResult<PathBuf> {
        let path = self.dir.join(name);
        write_atomic(&path, contents.as_bytes())?;
        self.outputs.insert(name.into(), sha256_hex(contents.as_bytes()));
        Ok(path)
    }

    pub fn checksums(&self) -> &BTreeMap<String, String> {
        &self.outputs
    }

    pub fn to_json(&self) -> Value {
        json!({
            "command": self.command,
            "config": self.config,
            "versions": {
                "fibersampler": env!("CARGO_PKG_VERSION"),
                "policy_format": POLICY_FORMAT_VERSION,
                "basis_format": BASIS_FORMAT_VERSION,
            },
            "timings_seconds": self.timings.iter().map(|(s, t)| json!({ "stage": s, "seconds": t })).collect::<Vec<_>>(),
            "outputs": self.outputs,
            "notes": self.notes,
        })
    }

    pub fn finish(self) -> RunResult<PathBuf> {
        let path = self.dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(&self.to_json()).expect("manifest serializes");
        write_atomic(&path, text.as_bytes())?;
        Ok(path)
    }
}

/// Output checksums recorded in a manifest file.
pub fn read_checksums(path: &Path) -> RunResult<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path).map_err(|e| RunError::io("manifest", path, e))?;
    let v: Value = serde_json::from_str(&text).map_err(|e| RunError::validation("manifest", e.to_string()))?;
    let outputs = v
        .get("outputs")
        .and_then(Value::as_object)
        .ok_or_else(|| RunError::validation("manifest", "no outputs object"))?;
    Ok(outputs.iter().map(|(k, v)| (k.clone(), v.as_str().unwrap_or_default().to_string())).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checksums_match_emitted_files() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = RunManifest::new("train", BTreeMap::new(), dir.path()).unwrap();
        let p = m.emit("a.csv", "x,y\n1,2\n").unwrap();
        let sums = m.checksums().clone();
        let path = m.finish().unwrap();
        assert_eq!(sums["a.csv"], sha256_hex(&std::fs::read(p).unwrap()));
        assert_eq!(read_checksums(&path).unwrap(), sums);
        assert!(!dir.path().join("manifest.json.tmp").exists());
    }
}
