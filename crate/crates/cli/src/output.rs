//! Atomic report writing and the run manifest.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::config::RunConfig;
use crate::CliError;

/// Writes `bytes` to `path` via a temp file in the same directory plus a
/// rename, so a crash never leaves a half-written report behind.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = path
        .parent()
        .filter(|d| !d.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .map_err(|e| CliError::Config(format!("cannot create temp file in {dir:?}: {e}")))?;
    tmp.write_all(bytes)
        .map_err(|e| CliError::Config(format!("cannot write {path:?}: {e}")))?;
    tmp.persist(path)
        .map_err(|e| CliError::Config(format!("cannot move report into place at {path:?}: {e}")))?;
    Ok(())
}

/// Ensures the output directory exists and returns it as a path.
pub fn prepare_out_dir(cfg: &RunConfig) -> Result<PathBuf, CliError> {
    let dir = PathBuf::from(&cfg.out);
    fs::create_dir_all(&dir)
        .map_err(|e| CliError::Config(format!("cannot create output directory {dir:?}: {e}")))?;
    Ok(dir)
}

/// Writes `manifest.json` next to the reports: the full config, its hash,
/// tool versions, and the run's wall time. The manifest is the one output
/// that legitimately differs between reruns (wall time); report files must
/// be byte-identical for identical configs.
pub fn write_manifest(dir: &Path, cfg: &RunConfig, started: Instant) -> Result<(), CliError> {
    let manifest = serde_json::json!({
        "config": cfg,
        "config_hash": cfg.hash(),
        "versions": {
            "mtype-cli": env!("CARGO_PKG_VERSION"),
            "mtype": mtype::VERSION,
        },
        "wall_time_ms": started.elapsed().as_secs_f64() * 1e3,
    });
    let text = serde_json::to_string_pretty(&manifest)
        .map_err(|e| CliError::Config(format!("manifest serialization: {e}")))?;
    write_atomic(&dir.join("manifest.json"), text.as_bytes())
}
