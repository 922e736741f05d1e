// SPDX-License-Identifier: Apache-2.0

//! File discovery and atomic output.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use bzshape::{BinaryMask, PiecewiseContour};

/// Writes through a temporary file in the destination directory, then
/// renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .with_context(|| format!("creating temporary file in {}", dir.display()))?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path)
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn ensure_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).with_context(|| format!("creating directory {}", path.display()))
}

pub fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn has_ext(path: &Path, exts: &[&str]) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| exts.iter().any(|x| e.eq_ignore_ascii_case(x)))
}

/// Expands directories to their files with one of `exts`, sorted by name.
/// Every path must exist; stems must be unique since outputs are named by
/// stem.
pub fn collect_inputs(paths: &[PathBuf], exts: &[&str]) -> Result<Vec<PathBuf>> {
    if paths.is_empty() {
        bail!("no input paths given");
    }
    let mut out = Vec::new();
    for p in paths {
        if p.is_dir() {
            out.extend(list_dir(p, exts)?);
        } else if p.exists() {
            out.push(p.clone());
        } else {
            bail!("input {} does not exist", p.display());
        }
    }
    let mut seen = BTreeMap::new();
    for p in &out {
        if let Some(prev) = seen.insert(stem(p), p) {
            bail!("inputs {} and {} share a file stem", prev.display(), p.display());
        }
    }
    Ok(out)
}

pub fn list_dir(dir: &Path, exts: &[&str]) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).with_context(|| format!("reading directory {}", dir.display()))? {
        let path = entry?.path();
        if path.is_file() && has_ext(&path, exts) {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

pub fn read_mask(path: &Path, threshold: u8) -> Result<BinaryMask> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(BinaryMask::from_pgm(&bytes, threshold)?)
}

pub fn read_contour(path: &Path) -> Result<PiecewiseContour> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(PiecewiseContour::from_json(&text)?)
}

pub fn is_contour_file(path: &Path) -> bool {
    has_ext(path, &["json"])
}

pub fn is_mask_file(path: &Path) -> bool {
    has_ext(path, &["pgm"])
}
