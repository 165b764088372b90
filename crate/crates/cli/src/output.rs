use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::PipelineConfig;

/// Per-file tally that becomes the exit status.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Outcome {
    pub processed: usize,
    pub failed: usize,
}

impl Outcome {
    pub const OK: u8 = 0;
    pub const PARTIAL: u8 = 1;
    pub const INVALID: u8 = 2;

    pub fn from_results<T, E>(results: &[Result<T, E>]) -> Self {
        Self {
            processed: results.len(),
            failed: results.iter().filter(|r| r.is_err()).count(),
        }
    }

    pub fn exit_code(self) -> u8 {
        if self.failed == 0 {
            Self::OK
        } else if self.failed < self.processed {
            Self::PARTIAL
        } else {
            Self::INVALID
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes through a temporary file in the target directory and renames it
/// into place, so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        tmp.as_file().set_permissions(fs::Permissions::from_mode(0o644))?;
    }
    tmp.persist(path).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn to_json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_atomic(path, &to_json_bytes(value)?)
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_slice(&bytes).with_context(|| format!("parsing {}", path.display()))
}

/// File stem with artifact suffixes removed: `home.draft.json` and
/// `home.json` both give `home`.
pub fn stem_of(path: &Path) -> String {
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let name = name
        .strip_suffix(".json")
        .or_else(|| name.strip_suffix(".jsonl"))
        .unwrap_or(&name);
    let name = name
        .strip_suffix(".merged.draft")
        .or_else(|| name.strip_suffix(".draft"))
        .unwrap_or(name);
    name.to_string()
}

/// Stems for a batch of inputs; repeats get `-2`, `-3`, .. suffixes.
pub fn unique_stems(paths: &[PathBuf]) -> Vec<String> {
    let mut seen: HashMap<String, usize> = HashMap::new();
    paths
        .iter()
        .map(|p| {
            let stem = stem_of(p);
            let n = seen.entry(stem.clone()).or_insert(0);
            *n += 1;
            if *n == 1 {
                stem
            } else {
                format!("{stem}-{n}")
            }
        })
        .collect()
}

#[derive(Serialize)]
struct InputRecord {
    path: String,
    sha256: Option<String>,
}

#[derive(Serialize)]
struct Versions {
    layermerge: &'static str,
    draft_schema: u32,
    predictions_schema: u32,
    tiles_schema: u32,
}

#[derive(Serialize)]
struct RunMeta<'a> {
    command: &'a str,
    versions: Versions,
    seed: u64,
    config_sha256: String,
    config: &'a PipelineConfig,
    inputs: Vec<InputRecord>,
}

/// Writes `run.json` into `out_dir`: command, versions, seed, the effective
/// configuration and its hash, and a digest of every input. No timestamps, so
/// reruns with the same inputs produce the same bytes.
pub fn write_run_meta(out_dir: &Path, command: &str, cfg: &PipelineConfig, inputs: &[PathBuf]) -> Result<()> {
    let config_sha256 = sha256_hex(&serde_json::to_vec(cfg)?);
    let meta = RunMeta {
        command,
        versions: Versions {
            layermerge: env!("CARGO_PKG_VERSION"),
            draft_schema: layermerge_core::draft::SCHEMA_VERSION,
            predictions_schema: layermerge_core::detector::PREDICTIONS_VERSION,
            tiles_schema: layermerge_core::tiling::MANIFEST_VERSION,
        },
        seed: cfg.seed,
        config_sha256,
        config: cfg,
        inputs: inputs
            .iter()
            .map(|p| InputRecord {
                path: p.display().to_string(),
                sha256: fs::read(p).ok().map(|b| sha256_hex(&b)),
            })
            .collect(),
    };
    write_json(&out_dir.join("run.json"), &meta)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        let o = |processed, failed| Outcome { processed, failed }.exit_code();
        assert_eq!(o(3, 0), 0);
        assert_eq!(o(3, 1), 1);
        assert_eq!(o(3, 3), 2);
        assert_eq!(o(0, 0), 0);
    }

    #[test]
    fn stems() {
        assert_eq!(stem_of(Path::new("a/home.draft.json")), "home");
        assert_eq!(stem_of(Path::new("home.merged.draft.json")), "home");
        assert_eq!(stem_of(Path::new("x/y.json")), "y");
        let paths = vec![PathBuf::from("a/x.json"), PathBuf::from("b/x.json"), PathBuf::from("y.json")];
        assert_eq!(unique_stems(&paths), vec!["x", "x-2", "y"]);
    }

    #[test]
    fn atomic_write_replaces_content() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub/f.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(fs::read(&p).unwrap(), b"two");
        assert_eq!(fs::read_dir(p.parent().unwrap()).unwrap().count(), 1);
    }
}
