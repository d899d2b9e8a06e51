//! Result files and the run manifest.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{ResolvedSeeds, RunConfig};
use crate::CliError;

pub const REPORT_FILE: &str = "report.json";
pub const SAMPLES_FILE: &str = "samples.csv";
pub const CDF_FILE: &str = "cdf.csv";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const CDF_HEADER: [&str; 4] = ["x", "ecdf", "phi", "diff"];

/// CSV bytes with a fixed header and LF line endings; floats use the
/// shortest representation that round-trips.
pub fn csv_bytes<T: Serialize>(header: &[&str], rows: &[T]) -> Result<Vec<u8>, CliError> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let io = |e: csv::Error| CliError::Io(format!("csv: {e}"));
    w.write_record(header).map_err(io)?;
    for r in rows {
        w.serialize(r).map_err(io)?;
    }
    w.into_inner().map_err(|e| CliError::Io(format!("csv: {e}")))
}

pub fn json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("report serializes");
    out.push(b'\n');
    out
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    pub name: String,
    pub bytes: u64,
    pub sha256: String,
}

/// Writes `bytes` to `dir/name` and returns its inventory entry.
pub fn write_file(dir: &Path, name: &str, bytes: &[u8]) -> Result<FileEntry, CliError> {
    let path = dir.join(name);
    std::fs::write(&path, bytes).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    Ok(FileEntry {
        name: name.into(),
        bytes: bytes.len() as u64,
        sha256: sha256_hex(bytes),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub tool_version: String,
    pub command: String,
    pub config: RunConfig,
    pub seeds: ResolvedSeeds,
    pub workers: usize,
    pub started_at: String,
    pub finished_at: String,
    pub wall_clock_seconds: f64,
    pub exit_code: i32,
    pub files: Vec<FileEntry>,
}

impl RunManifest {
    pub fn digest(&self, name: &str) -> Option<&str> {
        self.files.iter().find(|f| f.name == name).map(|f| f.sha256.as_str())
    }
}

pub fn read_manifest(path: &Path) -> Result<RunManifest, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Serialize)]
    struct Row {
        x: f64,
        n: u64,
    }

    #[test]
    fn csv_layout() {
        let b = csv_bytes(&["x", "n"], &[Row { x: 0.1, n: 3 }, Row { x: 2.0, n: 4 }]).unwrap();
        assert_eq!(String::from_utf8(b).unwrap(), "x,n\n0.1,3\n2.0,4\n");
        let empty = csv_bytes::<Row>(&CDF_HEADER, &[]).unwrap();
        assert_eq!(empty, b"x,ecdf,phi,diff\n");
    }

    #[test]
    fn digest_is_stable() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
