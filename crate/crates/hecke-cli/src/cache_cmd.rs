//! `hecke cache {list,clear}`: inspect or empty the on-disk coset-count cache.

use std::fs;
use std::path::Path;

use serde::Serialize;

#[derive(Serialize)]
struct CacheEntry {
    file: String,
    bytes: u64,
}

#[derive(Serialize)]
pub struct CacheListing {
    command: &'static str,
    dir: String,
    entries: Vec<CacheEntry>,
    total_bytes: u64,
}

#[derive(Serialize)]
pub struct CacheClearance {
    command: &'static str,
    dir: String,
    removed: usize,
}

fn records(dir: &Path) -> anyhow::Result<Vec<(String, u64)>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir)? {
        let entry = entry?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if entry.file_type()?.is_file() && name.ends_with(".json") {
            out.push((name, entry.metadata()?.len()));
        }
    }
    out.sort();
    Ok(out)
}

pub fn list(dir: &Path) -> anyhow::Result<CacheListing> {
    let entries: Vec<CacheEntry> = records(dir)?
        .into_iter()
        .map(|(file, bytes)| CacheEntry { file, bytes })
        .collect();
    let total_bytes = entries.iter().map(|e| e.bytes).sum();
    Ok(CacheListing { command: "cache-list", dir: dir.display().to_string(), entries, total_bytes })
}

pub fn clear(dir: &Path) -> anyhow::Result<CacheClearance> {
    let mut removed = 0;
    for (name, _) in records(dir)? {
        fs::remove_file(dir.join(name))?;
        removed += 1;
    }
    Ok(CacheClearance { command: "cache-clear", dir: dir.display().to_string(), removed })
}
