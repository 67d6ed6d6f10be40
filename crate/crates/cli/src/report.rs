//! Run manifests, digests, and atomic report output.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::commands::CliError;

/// Provenance block embedded in every report: the exact invocation, the
/// resolved configuration, and a content digest of each input file. Reruns
/// with an identical manifest reproduce identical reports with the local
/// backend.
#[derive(Serialize, Debug)]
pub struct RunManifest {
    pub command: String,
    pub config: serde_json::Value,
    pub inputs: BTreeMap<String, String>,
    pub tool_version: String,
}

impl RunManifest {
    pub fn new(config: serde_json::Value, inputs: &[&Path]) -> Result<Self, CliError> {
        let mut digests = BTreeMap::new();
        for path in inputs {
            digests.insert(path.display().to_string(), digest_file(path)?);
        }
        Ok(Self {
            command: std::env::args().collect::<Vec<_>>().join(" "),
            config,
            inputs: digests,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
        })
    }
}

/// SHA-256 of a file's bytes, lowercase hex.
pub fn digest_file(path: &Path) -> Result<String, CliError> {
    let bytes = std::fs::read(path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    let hash = Sha256::digest(&bytes);
    Ok(hash.iter().map(|b| format!("{b:02x}")).collect())
}

/// Assembles the standard JSON envelope: manifest first, then the payload
/// under a command-specific key.
pub fn json_envelope<T: Serialize>(
    manifest: &RunManifest,
    payload_key: &str,
    payload: &T,
) -> Result<String, CliError> {
    let mut root = serde_json::Map::new();
    root.insert(
        "manifest".to_string(),
        serde_json::to_value(manifest).map_err(|e| CliError::Input(e.to_string()))?,
    );
    root.insert(
        payload_key.to_string(),
        serde_json::to_value(payload).map_err(|e| CliError::Input(e.to_string()))?,
    );
    let mut text = serde_json::to_string_pretty(&serde_json::Value::Object(root))
        .map_err(|e| CliError::Input(e.to_string()))?;
    text.push('\n');
    Ok(text)
}

/// Prefixes CSV bytes with the manifest as a `#` comment line so the
/// provenance travels with the data.
pub fn csv_envelope(manifest: &RunManifest, csv_body: &str) -> Result<String, CliError> {
    let line = serde_json::to_string(manifest).map_err(|e| CliError::Input(e.to_string()))?;
    Ok(format!("# manifest: {line}\n{csv_body}"))
}

/// Writes the report to the target file via a same-directory temp file and
/// rename, or to standard output when no target was given.
pub fn emit(out: Option<&Path>, content: &str) -> Result<(), CliError> {
    match out {
        None => {
            print!("{content}");
            Ok(())
        }
        Some(path) => {
            write_atomic(path, content.as_bytes())
                .map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))?;
            eprintln!("wrote {}", path.display());
            Ok(())
        }
    }
}

/// Atomic file write: the target never holds a partial report.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}
