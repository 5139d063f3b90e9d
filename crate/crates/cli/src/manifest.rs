use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

/// Everything needed to reproduce an output file. Written next to it as
/// `<output>.manifest.json`.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: &'static str,
    pub config: serde_json::Value,
    pub model_digest: Option<String>,
    pub input_digest: Option<String>,
    pub references_digest: Option<String>,
    pub seed: Option<u64>,
    pub versions: Versions,
}

#[derive(Debug, Serialize)]
pub struct Versions {
    pub uiddec: &'static str,
}

impl RunManifest {
    pub fn new(command: &'static str, config: serde_json::Value) -> Self {
        Self {
            command,
            config,
            model_digest: None,
            input_digest: None,
            references_digest: None,
            seed: None,
            versions: Versions { uiddec: env!("CARGO_PKG_VERSION") },
        }
    }

    pub fn write_beside(&self, output: &Path) -> Result<PathBuf> {
        let path = manifest_path(output);
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}

pub fn manifest_path(output: &Path) -> PathBuf {
    let mut name = output.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".manifest.json");
    output.with_file_name(name)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}
