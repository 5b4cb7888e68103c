use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputRecord {
    pub path: PathBuf,
    pub bytes: u64,
    pub sha256: String,
}

/// Written next to every output file as `<out>.manifest.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub experiment: String,
    pub seed: u64,
    pub threads: usize,
    pub units: String,
    pub config: Value,
    pub started_unix: f64,
    pub wall_clock_seconds: f64,
    pub outputs: Vec<OutputRecord>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn manifest_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

pub fn record(path: &Path, bytes: &[u8]) -> OutputRecord {
    OutputRecord {
        path: path.to_path_buf(),
        bytes: bytes.len() as u64,
        sha256: sha256_hex(bytes),
    }
}

impl RunManifest {
    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(self).expect("serializable manifest");
        text.push('\n');
        fs::write(path, text).map_err(|e| CliError::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::io(path, format!("invalid manifest: {e}")))
    }

    /// Outputs whose size or checksum no longer match.
    pub fn verify(&self) -> Vec<PathBuf> {
        self.outputs
            .iter()
            .filter(|o| match fs::read(&o.path) {
                Ok(bytes) => bytes.len() as u64 != o.bytes || sha256_hex(&bytes) != o.sha256,
                Err(_) => true,
            })
            .map(|o| o.path.clone())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_digest() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn manifest_sits_beside_output() {
        assert_eq!(
            manifest_path(Path::new("run/decay.csv")),
            PathBuf::from("run/decay.csv.manifest.json")
        );
    }
}
