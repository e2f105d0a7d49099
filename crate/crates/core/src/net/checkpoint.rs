//! On-disk checkpoints: a JSON manifest plus one raw little-endian `f64`
//! array per matrix (row-major), each guarded by a SHA-256 digest.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::NetConfig;
use super::params::ParamSet;
use crate::error::{Error, Result};
use crate::numerics::DenseMatrix;
use crate::scalar::Scalar;

pub const CHECKPOINT_VERSION: u32 = 1;
const MANIFEST: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArrayEntry {
    pub file: String,
    pub rows: usize,
    pub cols: usize,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointManifest {
    pub version: u32,
    pub config: NetConfig,
    pub step: u64,
    pub arrays: Vec<ArrayEntry>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn encode<T: Scalar>(m: &DenseMatrix<T>) -> Vec<u8> {
    let mut bytes = Vec::with_capacity(m.as_slice().len() * 8);
    for v in m.as_slice() {
        bytes.extend_from_slice(&v.as_f64().to_le_bytes());
    }
    bytes
}

/// Writes `arrays` into `dir` and returns their manifest entries.
pub fn write_arrays<T: Scalar>(dir: &Path, arrays: &[(String, &DenseMatrix<T>)]) -> Result<Vec<ArrayEntry>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    arrays
        .iter()
        .map(|(name, m)| {
            let bytes = encode(m);
            let file = format!("{name}.bin");
            let path = dir.join(&file);
            fs::write(&path, &bytes).map_err(|e| Error::io(&path, e))?;
            Ok(ArrayEntry { file, rows: m.rows(), cols: m.cols(), sha256: sha256_hex(&bytes) })
        })
        .collect()
}

/// Reads one array, verifying its size and digest.
pub fn read_array<T: Scalar>(dir: &Path, entry: &ArrayEntry) -> Result<DenseMatrix<T>> {
    let path = dir.join(&entry.file);
    let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
    let malformed = |reason: String| Error::MalformedArtifact { path: path.clone(), reason };
    if bytes.len() != entry.rows * entry.cols * 8 {
        return Err(malformed(format!("expected {} bytes, found {}", entry.rows * entry.cols * 8, bytes.len())));
    }
    if sha256_hex(&bytes) != entry.sha256 {
        return Err(malformed("digest mismatch".into()));
    }
    let data = bytes.chunks_exact(8).map(|c| T::lit(f64::from_le_bytes(c.try_into().expect("8-byte chunk")))).collect();
    DenseMatrix::from_vec(entry.rows, entry.cols, data)
}

pub fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

pub fn read_json<S: for<'de> Deserialize<'de>>(path: &Path) -> Result<S> {
    let text = fs::read_to_string(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            Error::MissingCheckpoint(path.to_path_buf())
        } else {
            Error::io(path, e)
        }
    })?;
    serde_json::from_str(&text).map_err(|e| Error::MalformedArtifact { path: path.to_path_buf(), reason: e.to_string() })
}

/// Writes the checkpoint into `dir` atomically (staged in a sibling, then renamed).
pub fn save_checkpoint<T: Scalar>(dir: &Path, config: &NetConfig, step: u64, params: &ParamSet<T>) -> Result<()> {
    params.check_config(config)?;
    let staging = staging_path(dir);
    if staging.exists() {
        fs::remove_dir_all(&staging).map_err(|e| Error::io(&staging, e))?;
    }
    let named: Vec<(String, &DenseMatrix<T>)> = params.layers.iter().enumerate().map(|(l, w)| (format!("W{l}"), w)).collect();
    let arrays = write_arrays(&staging, &named)?;
    let manifest = CheckpointManifest { version: CHECKPOINT_VERSION, config: config.clone(), step, arrays };
    write_json(&staging.join(MANIFEST), &manifest)?;
    if dir.exists() {
        fs::remove_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::rename(&staging, dir).map_err(|e| Error::io(dir, e))
}

pub(crate) fn staging_path(dir: &Path) -> std::path::PathBuf {
    let name = dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    dir.with_file_name(format!(".{name}.partial"))
}

pub fn load_checkpoint<T: Scalar>(dir: &Path) -> Result<(CheckpointManifest, ParamSet<T>)> {
    let manifest: CheckpointManifest = read_json(&dir.join(MANIFEST))?;
    if manifest.version != CHECKPOINT_VERSION {
        return Err(Error::MalformedArtifact { path: dir.to_path_buf(), reason: format!("unsupported version {}", manifest.version) });
    }
    let layers = manifest.arrays.iter().map(|e| read_array(dir, e)).collect::<Result<Vec<_>>>()?;
    let params = ParamSet { layers };
    params.check_config(&manifest.config)?;
    Ok((manifest, params))
}
