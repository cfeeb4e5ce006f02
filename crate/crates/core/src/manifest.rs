//! Run manifests: what produced a set of output files.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    pub seed: u64,
    pub config: BTreeMap<String, String>,
    /// Input path -> SHA-256 of its content.
    pub inputs: BTreeMap<String, String>,
    pub outputs: Vec<String>,
    /// Only part of the manifest that is not hashed.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timestamps: Option<Timestamps>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timestamps {
    pub started_unix: u64,
    pub finished_unix: u64,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn hash_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

impl RunManifest {
    pub fn new(command: impl Into<String>, seed: u64) -> Self {
        Self {
            command: command.into(),
            tool_version: TOOL_VERSION.into(),
            seed,
            config: BTreeMap::new(),
            inputs: BTreeMap::new(),
            outputs: Vec::new(),
            timestamps: None,
        }
    }

    pub fn set(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.config.insert(key.into(), value.to_string());
        self
    }

    /// Records an input file and its content hash; directories hash every file inside, sorted.
    pub fn add_input(&mut self, path: &Path) -> Result<()> {
        if path.is_dir() {
            let mut entries: Vec<_> = std::fs::read_dir(path)
                .map_err(|e| Error::io(path, e))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.is_file())
                .collect();
            entries.sort();
            for p in entries {
                self.inputs.insert(p.display().to_string(), hash_file(&p)?);
            }
        } else {
            self.inputs.insert(path.display().to_string(), hash_file(path)?);
        }
        Ok(())
    }

    /// Hash over everything except timestamps and the output list.
    pub fn hash(&self) -> String {
        let mut stripped = self.clone();
        stripped.timestamps = None;
        stripped.outputs.clear();
        let json = serde_json::to_vec(&stripped).expect("manifest serializes");
        sha256_hex(&json)[..16].to_string()
    }

    /// One-line config echo for output headers.
    pub fn echo(&self) -> String {
        let cfg: Vec<String> = self.config.iter().map(|(k, v)| format!("{k}={v}")).collect();
        format!(
            "manifest={} command={} version={} seed={} {}",
            self.hash(),
            self.command,
            self.tool_version,
            self.seed,
            cfg.join(" ")
        )
    }
}
