//! Artifact plumbing: the JSON header every output starts with, config
//! hashing, and atomic file writes (temp + rename).

use serde::Serialize;
use sha2::{Digest, Sha256};
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::CliError;

/// Embedded at the top of every artifact so any output can be traced back
/// to the exact configuration that produced it.
#[derive(Debug, Clone, Serialize)]
pub struct ArtifactHeader {
    pub tool: &'static str,
    pub version: &'static str,
    pub config_hash: String,
    pub base_seed: u64,
}

impl ArtifactHeader {
    pub fn new(config_hash: String, base_seed: u64) -> Self {
        ArtifactHeader {
            tool: "topdown",
            version: env!("CARGO_PKG_VERSION"),
            config_hash,
            base_seed,
        }
    }
}

/// SHA-256 of the resolved config rendered as canonical JSON (sorted keys).
pub fn config_hash(resolved: &serde_json::Value) -> String {
    let bytes = serde_json::to_vec(resolved).expect("value serializes");
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    hex_string(&hasher.finalize())
}

fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Write bytes atomically: a temp file in the same directory is renamed
/// over the target, so a crash never leaves a torn artifact.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let tmp = tmp_path(path);
    {
        let mut f = std::fs::File::create(&tmp)
            .map_err(|e| CliError::io(format!("create {}: {e}", tmp.display())))?;
        f.write_all(bytes)
            .map_err(|e| CliError::io(format!("write {}: {e}", tmp.display())))?;
        f.sync_all().ok();
    }
    std::fs::rename(&tmp, path)
        .map_err(|e| CliError::io(format!("rename to {}: {e}", path.display())))
}

fn tmp_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(format!(".tmp-{}", std::process::id()));
    path.with_file_name(name)
}

/// Serialize a header-first JSON artifact and write it atomically.
pub fn write_json_artifact<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut bytes = serde_json::to_vec_pretty(value)
        .map_err(|e| CliError::io(format!("serialize {}: {e}", path.display())))?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

/// CSV artifact: a `#`-prefixed JSON header line, then the CSV payload.
pub fn write_csv_artifact(
    path: &Path,
    header: &ArtifactHeader,
    csv_bytes: &[u8],
) -> Result<(), CliError> {
    let mut bytes = Vec::with_capacity(csv_bytes.len() + 128);
    let header_json =
        serde_json::to_string(header).map_err(|e| CliError::io(e.to_string()))?;
    bytes.extend_from_slice(b"# ");
    bytes.extend_from_slice(header_json.as_bytes());
    bytes.push(b'\n');
    bytes.extend_from_slice(csv_bytes);
    write_atomic(path, &bytes)
}
