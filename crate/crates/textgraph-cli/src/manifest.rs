//! Run manifests: for every produced artifact the CLI records the resolved
//! configuration, SHA-256 hashes of all inputs, the output paths, the
//! seed, and the wall-clock time, as `<output>.manifest.json` next to the
//! artifact. Written atomically.

use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Serialize)]
pub struct InputHash {
    pub path: String,
    pub sha256: String,
}

#[derive(Serialize)]
pub struct Manifest {
    pub command: String,
    pub config: serde_json::Value,
    pub inputs: Vec<InputHash>,
    pub outputs: Vec<String>,
    pub seed: u64,
    pub started_unix_seconds: u64,
    pub wall_clock_seconds: f64,
}

pub struct ManifestBuilder {
    command: String,
    config: serde_json::Value,
    inputs: Vec<InputHash>,
    outputs: Vec<PathBuf>,
    seed: u64,
    started_unix: u64,
    started: Instant,
}

impl ManifestBuilder {
    pub fn new(command: &str, config: serde_json::Value, seed: u64) -> Self {
        ManifestBuilder {
            command: command.to_string(),
            config,
            inputs: Vec::new(),
            outputs: Vec::new(),
            seed,
            started_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            started: Instant::now(),
        }
    }

    /// Hashes one input file.
    pub fn input_file(&mut self, path: &Path) -> Result<()> {
        self.inputs.push(InputHash {
            path: path.display().to_string(),
            sha256: sha256_file(path)?,
        });
        Ok(())
    }

    /// Hashes a corpus directory: file names and contents of `truth.txt`
    /// plus every `.xml`, in sorted name order, as one digest.
    pub fn input_dir(&mut self, dir: &Path) -> Result<()> {
        let mut names: Vec<PathBuf> = std::fs::read_dir(dir)
            .with_context(|| format!("reading directory {}", dir.display()))?
            .filter_map(|entry| entry.ok().map(|e| e.path()))
            .filter(|p| {
                p.file_name().is_some_and(|n| n == "truth.txt")
                    || p.extension().is_some_and(|e| e == "xml")
            })
            .collect();
        names.sort();
        let mut hasher = Sha256::new();
        for path in &names {
            hasher.update(path.file_name().unwrap().to_string_lossy().as_bytes());
            hasher.update([0u8]);
            let bytes = std::fs::read(path)
                .with_context(|| format!("reading {}", path.display()))?;
            hasher.update(&bytes);
        }
        self.inputs.push(InputHash {
            path: dir.display().to_string(),
            sha256: hex(&hasher.finalize()),
        });
        Ok(())
    }

    pub fn output(&mut self, path: &Path) {
        self.outputs.push(path.to_path_buf());
    }

    /// Writes `<primary_output>.manifest.json`.
    pub fn write(self, primary_output: &Path) -> Result<()> {
        let manifest = Manifest {
            command: self.command,
            config: self.config,
            inputs: self.inputs,
            outputs: self
                .outputs
                .iter()
                .map(|p| p.display().to_string())
                .collect(),
            seed: self.seed,
            started_unix_seconds: self.started_unix,
            wall_clock_seconds: self.started.elapsed().as_secs_f64(),
        };
        let mut name = primary_output.file_name().unwrap_or_default().to_os_string();
        name.push(".manifest.json");
        let path = primary_output.with_file_name(name);
        let json = serde_json::to_string_pretty(&manifest)?;
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, json).with_context(|| format!("writing {}", tmp.display()))?;
        std::fs::rename(&tmp, &path)
            .with_context(|| format!("renaming manifest into {}", path.display()))?;
        Ok(())
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes =
        std::fs::read(path).with_context(|| format!("reading input {}", path.display()))?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Ok(hex(&hasher.finalize()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_hash_changes_with_content() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("input.txt");
        std::fs::write(&path, "one").unwrap();
        let a = sha256_file(&path).unwrap();
        std::fs::write(&path, "two").unwrap();
        let b = sha256_file(&path).unwrap();
        assert_ne!(a, b);
        std::fs::write(&path, "one").unwrap();
        assert_eq!(sha256_file(&path).unwrap(), a);
    }

    #[test]
    fn manifest_written_next_to_output() {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("in.txt");
        std::fs::write(&input, "data").unwrap();
        let output = dir.path().join("out.bin");
        std::fs::write(&output, "artifact").unwrap();

        let mut builder = ManifestBuilder::new("test", serde_json::json!({"k": 1}), 7);
        builder.input_file(&input).unwrap();
        builder.output(&output);
        builder.write(&output).unwrap();

        let manifest_path = dir.path().join("out.bin.manifest.json");
        let text = std::fs::read_to_string(manifest_path).unwrap();
        let value: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(value["command"], "test");
        assert_eq!(value["seed"], 7);
        assert_eq!(value["inputs"][0]["sha256"], sha256_file(&input).unwrap());
    }
}
