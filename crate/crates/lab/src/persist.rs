//! Artifact files: JSON documents, raw kernel matrices with sidecars, and
//! the run manifest.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use qklab_core::kernels::{Backend, KernelKind, KernelMatrix, KernelMeta};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{LabError, LabResult};

pub const MANIFEST_FILE: &str = "MANIFEST.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn hash_file(path: &Path) -> LabResult<String> {
    Ok(sha256_hex(&std::fs::read(path).map_err(|e| LabError::io(path, e))?))
}

/// Hash of a value's compact JSON encoding.
pub fn hash_json<T: Serialize>(value: &T) -> String {
    sha256_hex(&serde_json::to_vec(value).expect("serializable value"))
}

/// Writes through a temporary sibling and renames, so readers never see a
/// half-written file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> LabResult<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| LabError::io(parent, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, bytes).map_err(|e| LabError::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| LabError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> LabResult<()> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| LabError::json(path, e))?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> LabResult<T> {
    let bytes = std::fs::read(path).map_err(|e| LabError::io(path, e))?;
    serde_json::from_slice(&bytes).map_err(|e| LabError::json(path, e))
}

pub fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

/// Metadata stored next to every `.bin` kernel matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSidecar {
    pub rows: usize,
    pub cols: usize,
    pub kind: KernelKind,
    /// `c` for the quantum kernel, `gamma` for the RBF.
    pub bandwidth: f64,
    pub backend: Option<Backend>,
    pub symmetric: bool,
    pub feature_count: usize,
    pub dataset_hash: String,
    pub config_hash: String,
    pub seed: u64,
    /// SHA-256 of the `.bin` payload.
    pub values_sha256: String,
    /// Unix seconds; the only field that differs between identical runs.
    pub created_at: u64,
}

pub fn kernel_paths(stem: &Path) -> (PathBuf, PathBuf) {
    (stem.with_extension("bin"), stem.with_extension("json"))
}

/// Little-endian `f64`, row-major.
pub fn kernel_bytes(k: &KernelMatrix) -> Vec<u8> {
    k.values().iter().flat_map(|v| v.to_le_bytes()).collect()
}

pub fn write_kernel(stem: &Path, k: &KernelMatrix, config_hash: &str, seed: u64) -> LabResult<KernelSidecar> {
    let (bin, json) = kernel_paths(stem);
    let bytes = kernel_bytes(k);
    let sidecar = KernelSidecar {
        rows: k.rows(),
        cols: k.cols(),
        kind: k.kind(),
        bandwidth: k.bandwidth_or_gamma(),
        backend: k.meta.backend,
        symmetric: k.is_symmetric_gram(),
        feature_count: k.meta.feature_count,
        dataset_hash: k.meta.dataset_hash.clone(),
        config_hash: config_hash.to_string(),
        seed,
        values_sha256: sha256_hex(&bytes),
        created_at: unix_now(),
    };
    write_atomic(&bin, &bytes)?;
    write_json(&json, &sidecar)?;
    Ok(sidecar)
}

pub fn read_kernel(stem: &Path) -> LabResult<KernelMatrix> {
    let (bin, json) = kernel_paths(stem);
    let sidecar: KernelSidecar = read_json(&json)?;
    let bytes = std::fs::read(&bin).map_err(|e| LabError::io(&bin, e))?;
    if bytes.len() != sidecar.rows * sidecar.cols * 8 {
        return Err(LabError::config(
            bin.display().to_string(),
            format!(
                "expected {} bytes, found {}",
                sidecar.rows * sidecar.cols * 8,
                bytes.len()
            ),
        ));
    }
    if sha256_hex(&bytes) != sidecar.values_sha256 {
        return Err(LabError::config(
            bin.display().to_string(),
            "payload hash does not match sidecar",
        ));
    }
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    let meta = KernelMeta {
        backend: sidecar.backend,
        feature_count: sidecar.feature_count,
        dataset_hash: sidecar.dataset_hash,
    };
    Ok(KernelMatrix::new(
        sidecar.rows,
        sidecar.cols,
        values,
        sidecar.kind,
        sidecar.bandwidth,
        sidecar.symmetric,
        meta,
    )?)
}

/// True when a sidecar exists for `stem` and records `config_hash`.
pub fn kernel_is_current(stem: &Path, config_hash: &str) -> bool {
    let (bin, json) = kernel_paths(stem);
    bin.exists() && read_json::<KernelSidecar>(&json).is_ok_and(|s| s.config_hash == config_hash)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config_hash: String,
    pub seed: u64,
    /// Relative path → SHA-256, sorted.
    pub files: BTreeMap<String, String>,
}

fn collect_files(dir: &Path, out: &mut Vec<PathBuf>) -> LabResult<()> {
    let entries = std::fs::read_dir(dir).map_err(|e| LabError::io(dir, e))?;
    for entry in entries {
        let path = entry.map_err(|e| LabError::io(dir, e))?.path();
        if path.is_dir() {
            collect_files(&path, out)?;
        } else {
            out.push(path);
        }
    }
    Ok(())
}

/// Hashes every file under `run_dir` and writes the manifest.
pub fn write_manifest(run_dir: &Path, config_hash: &str, seed: u64) -> LabResult<Manifest> {
    let mut paths = Vec::new();
    collect_files(run_dir, &mut paths)?;
    let mut files = BTreeMap::new();
    for p in paths {
        let rel = p
            .strip_prefix(run_dir)
            .expect("under run dir")
            .to_string_lossy()
            .replace('\\', "/");
        if rel == MANIFEST_FILE || rel.ends_with(".tmp") {
            continue;
        }
        files.insert(rel, hash_file(&p)?);
    }
    let manifest = Manifest {
        config_hash: config_hash.to_string(),
        seed,
        files,
    };
    write_json(&run_dir.join(MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_known_vector() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn kernel_round_trip_and_tamper_detection() {
        let dir = tempfile::tempdir().unwrap();
        let k = KernelMatrix::new(
            2,
            2,
            vec![1.0, 0.25, 0.25, 1.0],
            KernelKind::FidelityQuantum,
            0.5,
            true,
            KernelMeta {
                backend: Some(Backend::Tn),
                feature_count: 3,
                dataset_hash: "abc".into(),
            },
        )
        .unwrap();
        let stem = dir.path().join("k/train");
        write_kernel(&stem, &k, "cfg", 7).unwrap();
        assert_eq!(std::fs::read(stem.with_extension("bin")).unwrap().len(), 32);
        assert_eq!(read_kernel(&stem).unwrap(), k);
        assert!(kernel_is_current(&stem, "cfg"));
        assert!(!kernel_is_current(&stem, "other"));

        std::fs::write(stem.with_extension("bin"), [0u8; 32]).unwrap();
        assert!(read_kernel(&stem).is_err());
    }

    #[test]
    fn manifest_lists_files_sorted() {
        let dir = tempfile::tempdir().unwrap();
        write_atomic(&dir.path().join("b/x.txt"), b"x").unwrap();
        write_atomic(&dir.path().join("a.txt"), b"a").unwrap();
        let m = write_manifest(dir.path(), "h", 1).unwrap();
        assert_eq!(m.files.keys().cloned().collect::<Vec<_>>(), vec!["a.txt", "b/x.txt"]);
        let again = write_manifest(dir.path(), "h", 1).unwrap();
        assert_eq!(m, again);
    }
}
