//! Output plumbing for finished runs: atomic file writes, content digests,
//! and the run manifest that makes an output directory self-describing.

use std::fs;
use std::io;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};
use wavetraj_core::dynamics::Event;
use wavetraj_core::model::ValidatedConfig;
use wavetraj_core::wavefront::GaussianComponent;
use wavetraj_core::Medium;

/// Inventory entry for one written output file.
#[derive(Debug, Clone, Serialize)]
pub struct WrittenFile {
    pub file: String,
    pub bytes: usize,
    pub sha256: String,
}

/// Writes `bytes` to `dir/name` atomically (temp file + rename) and returns
/// the inventory entry with the content digest.
pub fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> io::Result<WrittenFile> {
    let tmp = dir.join(format!(".{name}.tmp"));
    fs::write(&tmp, bytes)?;
    let path = dir.join(name);
    if let Err(e) = fs::rename(&tmp, &path) {
        let _ = fs::remove_file(&tmp);
        return Err(e);
    }
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    let mut sha256 = String::with_capacity(64);
    for byte in digest {
        use std::fmt::Write;
        write!(sha256, "{byte:02x}").expect("writing to a String cannot fail");
    }
    Ok(WrittenFile { file: name.to_string(), bytes: bytes.len(), sha256 })
}

/// One scenario setting as applied, in application order.
#[derive(Debug, Clone, Serialize)]
pub struct AppliedSetting {
    pub key: String,
    pub value: String,
}

/// The fully resolved run configuration: every default materialized, the
/// medium spelled out, and the unit map included (inside `validated.units`).
#[derive(Debug, Clone, Serialize)]
pub struct ResolvedConfig {
    pub validated: ValidatedConfig,
    pub medium: Medium,
    pub launch_components: Vec<GaussianComponent>,
    pub energy_ratio: Option<f64>,
    pub quantum_n: Option<u32>,
    pub paper_scale: bool,
}

/// The run manifest: together with the code version and the applied settings
/// it reproduces the run bit for bit, and its digest inventory identifies the
/// artifacts the run produced.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub scenario: String,
    pub code_version: String,
    /// Wall-clock seconds for the whole command: integration plus
    /// serialization.
    pub duration_seconds: f64,
    /// Settings in application order: configuration file first, then
    /// command-line overrides and flags.
    pub applied_settings: Vec<AppliedSetting>,
    pub config: ResolvedConfig,
    pub events: Vec<Event>,
    pub outputs: Vec<WrittenFile>,
}

/// Pretty JSON plus a trailing newline, so files end cleanly.
pub fn to_json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("JSON serialization cannot fail");
    bytes.push(b'\n');
    bytes
}
