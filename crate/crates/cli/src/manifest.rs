//! Append-only run manifests: one JSON line per command that wrote files,
//! with enough detail (argv, input and output hashes, seed, tool version)
//! to rerun it and verify the result.

use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const MANIFEST_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.jsonl";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const GIT_DESCRIBE: &str = env!("SWARM_GIT_DESCRIBE");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: PathBuf,
    pub sha256: String,
    pub bytes: u64,
}

impl FileDigest {
    pub fn of(path: &Path) -> std::io::Result<FileDigest> {
        let data = std::fs::read(path)?;
        Ok(FileDigest {
            path: std::path::absolute(path)?,
            sha256: sha256_hex(&data),
            bytes: data.len() as u64,
        })
    }
}

pub fn sha256_hex(data: &[u8]) -> String {
    Sha256::digest(data).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub manifest_version: u32,
    pub command: String,
    pub argv: Vec<String>,
    /// Main input file (config, plan or measurements).
    pub config: PathBuf,
    pub inputs: Vec<FileDigest>,
    pub seed: Option<u64>,
    pub outputs: Vec<FileDigest>,
    pub tool_version: String,
    pub git_describe: String,
    pub timestamp: String,
    /// Whether a rerun reproduced every output byte for byte; absent when
    /// no check was requested.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deterministic_check: Option<bool>,
}

impl RunManifest {
    pub fn new(command: &str, argv: Vec<String>, config: &Path) -> RunManifest {
        RunManifest {
            manifest_version: MANIFEST_VERSION,
            command: command.into(),
            argv,
            config: std::path::absolute(config).unwrap_or_else(|_| config.to_path_buf()),
            inputs: Vec::new(),
            seed: None,
            outputs: Vec::new(),
            tool_version: TOOL_VERSION.into(),
            git_describe: GIT_DESCRIBE.into(),
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true),
            deterministic_check: None,
        }
    }

    /// Appends this entry as one line; existing lines are never touched.
    pub fn append(&self, path: &Path) -> std::io::Result<()> {
        let mut line = serde_json::to_string(self)?;
        line.push('\n');
        let mut f = OpenOptions::new().create(true).append(true).open(path)?;
        f.write_all(line.as_bytes())
    }
}

/// All entries of a manifest file.
pub fn read_manifest(path: &Path) -> std::io::Result<Vec<RunManifest>> {
    std::fs::read_to_string(path)?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(std::io::Error::from))
        .collect()
}

/// Default manifest location: beside the primary output.
pub fn default_manifest_path(primary_output: &Path) -> PathBuf {
    match primary_output.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => dir.join(MANIFEST_FILE),
        _ => PathBuf::from(MANIFEST_FILE),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_matches_known_digests() {
        assert_eq!(
            sha256_hex(b""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn appends_without_rewriting() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(MANIFEST_FILE);
        let a = RunManifest::new("run", vec!["swarm".into()], Path::new("a.json"));
        a.append(&path).unwrap();
        let first = std::fs::read_to_string(&path).unwrap();
        let b = RunManifest {
            seed: Some(3),
            ..RunManifest::new("sweep", vec![], Path::new("b.json"))
        };
        b.append(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with(&first));
        assert_eq!(read_manifest(&path).unwrap(), vec![a, b]);
    }

    #[test]
    fn manifest_sits_beside_the_output() {
        assert_eq!(default_manifest_path(Path::new("out/x.csv")), Path::new("out/manifest.jsonl"));
        assert_eq!(default_manifest_path(Path::new("x.csv")), Path::new("manifest.jsonl"));
    }
}
