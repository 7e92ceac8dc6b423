//! Atomic CSV and metadata emission.
//!
//! Files are written to a `.tmp` sibling and renamed into place, so a
//! killed run never leaves a half-written table. Float cells use the
//! shortest round-trip formatting, which is deterministic, so rerunning
//! with the same seed yields byte-identical files.

use crate::error::Result;
use serde::Serialize;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

pub fn write_csv_atomic(
    path: &Path,
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let tmp = tmp_path(path);
    {
        let mut w = std::io::BufWriter::new(fs::File::create(&tmp)?);
        writeln!(w, "{}", header.join(","))?;
        for row in rows {
            debug_assert_eq!(row.len(), header.len());
            writeln!(w, "{}", row.join(","))?;
        }
        w.flush()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn write_json_atomic<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let tmp = tmp_path(path);
    fs::write(&tmp, serde_json::to_string_pretty(value).expect("serializable"))?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn tmp_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".tmp");
    path.with_file_name(name)
}

/// Sidecar metadata written next to every result set.
#[derive(Debug, Serialize)]
pub struct Sidecar<'a, S: Serialize> {
    pub spec: &'a S,
    pub files: Vec<String>,
    pub crate_version: &'static str,
    pub git_hash: &'static str,
}

pub fn sidecar<'a, S: Serialize>(spec: &'a S, files: &[PathBuf]) -> Sidecar<'a, S> {
    Sidecar {
        spec,
        files: files
            .iter()
            .map(|p| {
                p.file_name()
                    .map(|n| n.to_string_lossy().into_owned())
                    .unwrap_or_default()
            })
            .collect(),
        crate_version: env!("CARGO_PKG_VERSION"),
        git_hash: option_env!("CSOFDM_GIT_HASH").unwrap_or("unknown"),
    }
}

pub fn format_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else {
        "nan".to_string()
    }
}
