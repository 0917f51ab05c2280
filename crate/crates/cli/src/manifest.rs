//! Provenance block attached to every report.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

pub const TOOL_VERSION: &str = concat!("synacc ", env!("CARGO_PKG_VERSION"));

/// Enough to rerun a subcommand and get the same bytes back. Inputs are
/// pinned by content digest.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub config: BTreeMap<String, Value>,
    pub seeds: BTreeMap<String, u64>,
    /// Input path as given on the command line -> sha256 hex of its content.
    pub input_digests: BTreeMap<String, String>,
    pub tool_version: String,
}

impl RunManifest {
    pub fn new(subcommand: &str, base_seed: u64) -> Self {
        RunManifest {
            subcommand: subcommand.to_owned(),
            config: BTreeMap::new(),
            seeds: BTreeMap::from([("base".to_owned(), base_seed)]),
            input_digests: BTreeMap::new(),
            tool_version: TOOL_VERSION.to_owned(),
        }
    }

    /// Merges the fields of a serializable struct into `config`.
    pub fn with_config<T: Serialize>(mut self, config: &T) -> Result<Self> {
        match serde_json::to_value(config)? {
            Value::Object(map) => self.config.extend(map),
            other => bail!("config must serialize to an object, got {other}"),
        }
        Ok(self)
    }

    pub fn seed(&mut self, name: &str, value: u64) {
        self.seeds.insert(name.to_owned(), value);
    }

    /// Hashes `path` and records the digest.
    pub fn record_input(&mut self, path: &Path) -> Result<()> {
        let digest = file_digest(path)?;
        self.input_digests.insert(path.display().to_string(), digest);
        Ok(())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn file_digest(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(sha256_hex(&bytes))
}

/// A report body with the manifest alongside its fields.
#[derive(Serialize)]
pub struct Report<'a, T: Serialize> {
    pub manifest: &'a RunManifest,
    #[serde(flatten)]
    pub body: &'a T,
}

pub fn report_json<T: Serialize>(manifest: &RunManifest, body: &T) -> Result<Vec<u8>> {
    to_json_bytes(&Report { manifest, body })
}

/// Pretty JSON with a trailing newline.
pub fn to_json_bytes<T: Serialize + ?Sized>(value: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}
