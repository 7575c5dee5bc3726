use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::Failure;

pub const MANIFEST_FILE: &str = "manifest.json";

/// Provenance of one command invocation.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    /// SHA-256 over the command, its result-affecting flags and the bytes of
    /// every input file.
    pub config_digest: String,
    pub seed: u64,
    pub versions: BTreeMap<String, String>,
    /// From `SOURCE_DATE_EPOCH` when set, otherwise absent.
    pub timestamp: Option<String>,
    pub flags: BTreeMap<String, String>,
    /// Input role to SHA-256 of its bytes.
    pub inputs: BTreeMap<String, String>,
    pub decisions: Vec<String>,
    /// Output file to SHA-256 of its bytes.
    pub outputs: BTreeMap<String, String>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn timestamp() -> Option<String> {
    let secs: i64 = std::env::var("SOURCE_DATE_EPOCH").ok()?.trim().parse().ok()?;
    chrono::DateTime::from_timestamp(secs, 0).map(|t| t.format("%Y-%m-%dT%H:%M:%SZ").to_string())
}

/// Collects flags, inputs and outputs of a command, then writes them to the
/// output directory alongside a manifest.
pub struct Run {
    pub manifest: RunManifest,
    out_dir: Option<PathBuf>,
}

impl Run {
    pub fn new(command: &str, seed: u64, out_dir: Option<&Path>) -> Run {
        Run {
            manifest: RunManifest {
                command: command.to_string(),
                config_digest: String::new(),
                seed,
                versions: BTreeMap::from([
                    ("nsum".to_string(), nsum::VERSION.to_string()),
                    ("nsum-cli".to_string(), env!("CARGO_PKG_VERSION").to_string()),
                ]),
                timestamp: timestamp(),
                flags: BTreeMap::new(),
                inputs: BTreeMap::new(),
                decisions: Vec::new(),
                outputs: BTreeMap::new(),
            },
            out_dir: out_dir.map(Path::to_path_buf),
        }
    }

    pub fn flag(&mut self, name: &str, value: impl ToString) {
        self.manifest.flags.insert(name.to_string(), value.to_string());
    }

    pub fn flag_opt<T: ToString>(&mut self, name: &str, value: Option<T>) {
        if let Some(v) = value {
            self.flag(name, v);
        }
    }

    /// Reads an input file, recording the hash of its bytes under `role`.
    pub fn input(&mut self, role: &str, path: &Path) -> Result<String, Failure> {
        let bytes = fs::read(path).map_err(|e| Failure::data(format!("cannot read {}: {e}", path.display())))?;
        self.manifest.inputs.insert(role.to_string(), sha256_hex(&bytes));
        String::from_utf8(bytes).map_err(|_| Failure::data(format!("{} is not UTF-8 text", path.display())))
    }

    pub fn decision(&mut self, text: impl Into<String>) {
        let text = text.into();
        if !self.manifest.decisions.contains(&text) {
            self.manifest.decisions.push(text);
        }
    }

    /// Digest of everything recorded so far; call after the last flag and input.
    pub fn digest(&mut self) -> String {
        let key = serde_json::json!({
            "command": self.manifest.command,
            "seed": self.manifest.seed,
            "flags": self.manifest.flags,
            "inputs": self.manifest.inputs,
        });
        let d = sha256_hex(key.to_string().as_bytes());
        self.manifest.config_digest = d.clone();
        d
    }

    pub fn has_out_dir(&self) -> bool {
        self.out_dir.is_some()
    }

    /// Writes `name` under the output directory; a no-op without one.
    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), Failure> {
        let Some(dir) = &self.out_dir else {
            return Ok(());
        };
        let path = dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| Failure::data(format!("cannot create {}: {e}", parent.display())))?;
        }
        fs::write(&path, bytes).map_err(|e| Failure::data(format!("cannot write {}: {e}", path.display())))?;
        self.manifest.outputs.insert(name.to_string(), sha256_hex(bytes));
        Ok(())
    }

    pub fn write_json(&mut self, name: &str, value: &impl Serialize) -> Result<(), Failure> {
        let text = to_json(value)?;
        self.write(name, text.as_bytes())
    }

    /// Prints `value` as JSON on stdout and writes the manifest.
    pub fn finish(self, value: &impl Serialize) -> Result<(), Failure> {
        let text = to_json(value)?;
        if let Some(dir) = &self.out_dir {
            fs::create_dir_all(dir).map_err(|e| Failure::data(format!("cannot create {}: {e}", dir.display())))?;
            let manifest = to_json(&self.manifest)?;
            let path = dir.join(MANIFEST_FILE);
            fs::write(&path, manifest).map_err(|e| Failure::data(format!("cannot write {}: {e}", path.display())))?;
        }
        print!("{text}");
        Ok(())
    }
}

pub fn to_json(value: &impl Serialize) -> Result<String, Failure> {
    serde_json::to_string_pretty(value)
        .map(|s| s + "\n")
        .map_err(|e| Failure::data(format!("cannot serialize output: {e}")))
}
