//! Run manifest written beside every set of outputs.
//!
//! It records what is needed to reproduce the files and nothing that varies
//! between identical reruns, so the manifest itself is deterministic.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::Result;


#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputRecord {
    pub file: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub package: String,
    pub version: String,
    pub seed: u64,
    /// Hash of the canonical TOML of the effective configuration.
    pub config_sha256: String,
    pub outputs: Vec<OutputRecord>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl Manifest {
    pub fn new(command: &str, seed: u64, canonical_config: &str) -> Self {
        Self {
            command: command.to_string(),
            package: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            config_sha256: sha256_hex(canonical_config.as_bytes()),
            outputs: Vec::new(),
        }
    }

    pub fn record(&mut self, file: &str, contents: &[u8]) {
        self.outputs.push(OutputRecord { file: file.to_string(), sha256: sha256_hex(contents) });
    }

    /// `<command>.manifest.json`, so runs of different commands can share a directory.
    pub fn file_name(&self) -> String {
        format!("{}.manifest.json", self.command)
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self).map_err(std::io::Error::other)?;
        text.push('\n');
        std::fs::write(dir.join(self.file_name()), text)?;
        Ok(())
    }
}
