//! Provenance records for scan runs.

use std::fs::File;
use std::io::{self, Read};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const MANIFEST_VERSION: u32 = 1;

pub fn sha256_hex(bytes: impl AsRef<[u8]>) -> String {
    hex::encode(Sha256::digest(bytes.as_ref()))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    /// Relative to the manifest's directory when the file lives there.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

impl FileDigest {
    /// Hashes `path`, recording it relative to `base` when it lies below
    /// `base` and as an absolute path otherwise.
    pub fn of(path: &Path, base: &Path) -> io::Result<Self> {
        let mut f = File::open(path)?;
        let mut h = Sha256::new();
        let mut buf = vec![0u8; 1 << 16];
        let mut bytes = 0u64;
        loop {
            let n = f.read(&mut buf)?;
            if n == 0 {
                break;
            }
            h.update(&buf[..n]);
            bytes += n as u64;
        }
        let full = path.canonicalize()?;
        let base = base.canonicalize().unwrap_or_else(|_| base.to_path_buf());
        let shown = full.strip_prefix(&base).unwrap_or(&full);
        Ok(Self {
            path: shown.to_string_lossy().into_owned(),
            sha256: hex::encode(h.finalize()),
            bytes,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PassRecord {
    pub scan_id: String,
    pub pass: u32,
    pub started_at: String,
    pub finished_at: String,
    pub probes_sent: u64,
    pub replies: u64,
    pub output: FileDigest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanManifest {
    pub version: u32,
    pub tool_version: String,
    /// Effective configuration, secret excluded.
    pub config: serde_json::Value,
    /// SHA-256 of the payload secret, so runs can be told apart without
    /// disclosing it.
    pub secret_sha256: String,
    pub inputs: Vec<FileDigest>,
    pub passes: Vec<PassRecord>,
    pub started_at: String,
    pub finished_at: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DigestProblem {
    Missing {
        path: String,
    },
    Mismatch {
        path: String,
        expected: String,
        actual: String,
    },
}

impl std::fmt::Display for DigestProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DigestProblem::Missing { path } => write!(f, "{path}: missing"),
            DigestProblem::Mismatch { path, expected, actual } => {
                write!(f, "{path}: expected sha256 {expected}, found {actual}")
            }
        }
    }
}

impl ScanManifest {
    pub fn files(&self) -> impl Iterator<Item = &FileDigest> {
        self.inputs.iter().chain(self.passes.iter().map(|p| &p.output))
    }

    /// Re-hashes every recorded file; relative paths resolve against
    /// `base`. Returns the files that no longer match.
    pub fn verify(&self, base: &Path) -> Vec<DigestProblem> {
        let mut problems = Vec::new();
        for d in self.files() {
            let path = base.join(&d.path);
            match FileDigest::of(&path, base) {
                Err(_) => problems.push(DigestProblem::Missing { path: d.path.clone() }),
                Ok(actual) if actual.sha256 != d.sha256 => problems.push(DigestProblem::Mismatch {
                    path: d.path.clone(),
                    expected: d.sha256.clone(),
                    actual: actual.sha256,
                }),
                Ok(_) => {}
            }
        }
        problems
    }
}

/// Stable scan identifier from the configuration digest and pass number.
pub fn scan_id(config_digest: &str, pass: u32) -> String {
    sha256_hex(format!("{config_digest}/{pass}"))[..16].to_string()
}
