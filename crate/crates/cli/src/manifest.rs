//! Provenance record written next to every output.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::CliResult;
use crate::output::{read_bytes, write_atomic};

pub const MANIFEST_NAME: &str = "manifest.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    /// Full argument list, program name excluded.
    pub args: Vec<String>,
    pub tool_version: String,
    pub timestamp_unix_s: u64,
    /// Resolved configuration text, if the command uses one.
    pub config: Option<String>,
    pub config_digest: Option<String>,
    /// SHA-256 of every input file, by path.
    pub inputs: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        Self {
            command: command.to_string(),
            args: std::env::args().skip(1).collect(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp_unix_s: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
            config: None,
            config_digest: None,
            inputs: BTreeMap::new(),
        }
    }

    pub fn with_config(mut self, text: String) -> Self {
        self.config_digest = Some(sha256_hex(text.as_bytes()));
        self.config = Some(text);
        self
    }

    pub fn add_input(&mut self, path: &Path) -> CliResult<()> {
        let digest = sha256_hex(&read_bytes(path)?);
        self.inputs.insert(path.display().to_string(), digest);
        Ok(())
    }

    pub fn add_digest(&mut self, path: &Path, bytes: &[u8]) {
        self.inputs.insert(path.display().to_string(), sha256_hex(bytes));
    }

    /// `manifest.json` inside an output directory.
    pub fn write_in_dir(&self, dir: &Path) -> CliResult<()> {
        write_atomic(&dir.join(MANIFEST_NAME), self.to_json().as_bytes())
    }

    /// `<file>.manifest.json` beside a single output file.
    pub fn write_beside(&self, file: &Path) -> CliResult<()> {
        let mut name = file.as_os_str().to_owned();
        name.push(".manifest.json");
        write_atomic(&PathBuf::from(name), self.to_json().as_bytes())
    }

    fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }
}
