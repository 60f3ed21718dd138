//! Output plumbing for batch runs: config hashing, CSV and JSON writers
//! that embed the hash, grayscale heatmaps, and failure markers.
//!
//! Every artifact a run produces carries the 16-hex-digit hash of the
//! resolved configuration, so a results file can always be traced to the
//! exact parameters that generated it.

use serde::Serialize;
use sha2::{Digest, Sha256};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::{Error, Result};

/// Environment variable naming the directory for angular-coupling and
/// eigensystem caches.
pub const CACHE_DIR_VAR: &str = "KTOPS_CACHE_DIR";

/// First 16 hex digits of the SHA-256 of the value's canonical JSON
/// rendering (keys sorted, no whitespace).
pub fn config_hash<T: Serialize>(value: &T) -> Result<String> {
    // serde_json's Value keeps object keys in sorted order, so serializing
    // through it canonicalizes field order.
    let canonical = serde_json::to_value(value)
        .and_then(|v| serde_json::to_string(&v))
        .map_err(|e| Error::Config(format!("cannot hash configuration: {e}")))?;
    let digest = Sha256::digest(canonical.as_bytes());
    Ok(digest[..8].iter().map(|b| format!("{b:02x}")).collect())
}

/// Writes a CSV file whose first line is `# config_hash=<hash>`.
pub fn write_csv<P: AsRef<Path>>(
    path: P,
    hash: &str,
    header: &[&str],
    rows: &[Vec<String>],
) -> Result<()> {
    let mut out = Vec::with_capacity(rows.len() * 32 + 64);
    writeln!(out, "# config_hash={hash}")?;
    writeln!(out, "{}", header.join(","))?;
    for row in rows {
        writeln!(out, "{}", row.join(","))?;
    }
    fs::write(path, out)?;
    Ok(())
}

/// Writes pretty-printed JSON with a `config_hash` field injected at the top
/// level.
pub fn write_json<P: AsRef<Path>, T: Serialize>(path: P, hash: &str, value: &T) -> Result<()> {
    let mut v = serde_json::to_value(value)
        .map_err(|e| Error::Config(format!("cannot serialize report: {e}")))?;
    match &mut v {
        serde_json::Value::Object(map) => {
            map.insert(
                "config_hash".into(),
                serde_json::Value::String(hash.to_owned()),
            );
        }
        _ => {
            return Err(Error::Config(
                "JSON reports must serialize to an object".into(),
            ));
        }
    }
    let text = serde_json::to_string_pretty(&v)
        .map_err(|e| Error::Config(format!("cannot serialize report: {e}")))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

/// Writes an 8-bit binary PGM (P5) heatmap, max-normalized so the largest
/// value maps to 255. Values are row-major, `height` rows of `width`.
pub fn write_pgm<P: AsRef<Path>>(path: P, width: usize, height: usize, values: &[f64]) -> Result<()> {
    if values.len() != width * height || width == 0 || height == 0 {
        return Err(Error::DimensionMismatch(format!(
            "PGM of {width}x{height} cannot hold {} values",
            values.len()
        )));
    }
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let scale = if max > 0.0 { 255.0 / max } else { 0.0 };
    let mut out = Vec::with_capacity(values.len() + 32);
    write!(out, "P5\n{width} {height}\n255\n")?;
    out.extend(
        values
            .iter()
            .map(|&v| (v.max(0.0) * scale).round().clamp(0.0, 255.0) as u8),
    );
    fs::write(path, out)?;
    Ok(())
}

/// Drops `<stem>.FAILED` next to the named output, recording why a run died
/// so partial artifacts are never mistaken for complete ones.
pub fn write_failure_marker<P: AsRef<Path>>(output: P, message: &str) {
    let path = marker_path(output.as_ref());
    // Best effort: the marker must not mask the original error.
    let _ = fs::write(path, format!("{message}\n"));
}

/// Removes a stale failure marker before a fresh attempt.
pub fn clear_failure_marker<P: AsRef<Path>>(output: P) {
    let _ = fs::remove_file(marker_path(output.as_ref()));
}

fn marker_path(output: &Path) -> PathBuf {
    let mut name = output.file_name().unwrap_or_default().to_os_string();
    name.push(".FAILED");
    output.with_file_name(name)
}

/// Cache directory from the environment, created if missing. `None` when the
/// variable is unset or the directory cannot be created.
pub fn cache_dir() -> Option<PathBuf> {
    let dir = PathBuf::from(std::env::var_os(CACHE_DIR_VAR)?);
    fs::create_dir_all(&dir).ok()?;
    Some(dir)
}
