//! On-disk memo for coset tallies. Tallies depend only on the group, ν, the
//! enumerated positions, and the depth windows — not on coefficient precision
//! — so they are shared across runs with different moduli.
//!
//! Each entry is a two-line file named by the FNV-1a hash of the canonical
//! key: line one is the key (verified on read, so hash collisions degrade to
//! misses), line two the tally. Writes go through a fresh temp file and a
//! rename, so readers never observe a torn entry; corrupted files are dropped
//! and recomputed.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::config::ComputeOpts;
use crate::cosets::{satake_counts, CellCounts};
use crate::error::Result;
use crate::root_datum::{Family, RootDatum};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountsKey {
    pub family: Family,
    pub n: usize,
    pub p: u64,
    pub nu: Vec<i64>,
    pub positions: Vec<(usize, usize)>,
    pub windows: Vec<u32>,
}

impl CountsKey {
    pub fn new(
        datum: &RootDatum,
        p: u64,
        nu: &[i64],
        positions: &[(usize, usize)],
        windows: &[u32],
    ) -> Self {
        CountsKey {
            family: datum.family,
            n: datum.n,
            p,
            nu: nu.to_vec(),
            positions: positions.to_vec(),
            windows: windows.to_vec(),
        }
    }

    /// Canonical serialized form: struct-order JSON, no whitespace.
    pub fn canonical(&self) -> String {
        serde_json::to_string(self).expect("key serialization cannot fail")
    }

    pub fn filename(&self) -> String {
        format!("{:016x}.json", fnv1a64(self.canonical().as_bytes()))
    }
}

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

#[derive(Serialize, Deserialize)]
struct StoredCounts {
    counts: Vec<(Vec<i64>, u64)>,
    visited: u64,
}

#[derive(Debug)]
pub struct CountsCache {
    dir: PathBuf,
    pub hits: u64,
    pub misses: u64,
    pub corrupted: u64,
}

impl CountsCache {
    pub fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(CountsCache {
            dir: dir.to_path_buf(),
            hits: 0,
            misses: 0,
            corrupted: 0,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn get(&mut self, key: &CountsKey) -> Option<CellCounts> {
        let path = self.dir.join(key.filename());
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(_) => {
                self.misses += 1;
                return None;
            }
        };
        match parse_entry(&text, key) {
            Some(counts) => {
                self.hits += 1;
                Some(counts)
            }
            None => {
                // Key mismatch (hash collision) or corruption: drop the file
                // and recompute.
                self.corrupted += 1;
                self.misses += 1;
                let _ = fs::remove_file(&path);
                None
            }
        }
    }

    pub fn put(&mut self, key: &CountsKey, counts: &CellCounts) -> Result<()> {
        let stored = StoredCounts {
            counts: counts.counts.iter().map(|(k, v)| (k.clone(), *v)).collect(),
            visited: counts.visited,
        };
        let body = format!(
            "{}\n{}\n",
            key.canonical(),
            serde_json::to_string(&stored).expect("tally serialization cannot fail")
        );
        let nanos = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.subsec_nanos())
            .unwrap_or(0);
        let tmp = self
            .dir
            .join(format!(".tmp-{}-{}-{nanos}", key.filename(), std::process::id()));
        {
            let mut f = fs::OpenOptions::new()
                .write(true)
                .create_new(true)
                .open(&tmp)?;
            f.write_all(body.as_bytes())?;
            f.sync_all()?;
        }
        fs::rename(&tmp, self.dir.join(key.filename()))?;
        Ok(())
    }

    /// All well-formed entries currently on disk.
    pub fn list(&self) -> Result<Vec<(String, CountsKey)>> {
        let mut out = Vec::new();
        for entry in fs::read_dir(&self.dir)? {
            let entry = entry?;
            let name = entry.file_name().to_string_lossy().into_owned();
            if !name.ends_with(".json") || name.starts_with('.') {
                continue;
            }
            let Ok(text) = fs::read_to_string(entry.path()) else {
                continue;
            };
            if let Some(first) = text.lines().next() {
                if let Ok(key) = serde_json::from_str::<CountsKey>(first) {
                    out.push((name, key));
                }
            }
        }
        out.sort_by(|a, b| a.0.cmp(&b.0));
        Ok(out)
    }

    pub fn clear(&self) -> Result<u64> {
        let mut removed = 0;
        for entry in fs::read_dir(&self.dir)? {
            let entry = entry?;
            let name = entry.file_name().to_string_lossy().into_owned();
            if name.ends_with(".json") && !name.starts_with('.') {
                fs::remove_file(entry.path())?;
                removed += 1;
            }
        }
        Ok(removed)
    }
}

fn parse_entry(text: &str, key: &CountsKey) -> Option<CellCounts> {
    let mut lines = text.lines();
    let key_line = lines.next()?;
    if key_line != key.canonical() {
        return None;
    }
    let stored: StoredCounts = serde_json::from_str(lines.next()?).ok()?;
    let mut counts = BTreeMap::new();
    for (cell, count) in stored.counts {
        counts.insert(cell, count);
    }
    Some(CellCounts {
        counts,
        visited: stored.visited,
    })
}

/// Tally with memoization: look up, else enumerate and store.
pub fn cached_satake_counts(
    cache: Option<&mut CountsCache>,
    datum: &RootDatum,
    p: u64,
    nu: &[i64],
    positions: &[(usize, usize)],
    windows: &[u32],
    opts: &ComputeOpts,
) -> Result<CellCounts> {
    match cache {
        None => satake_counts(datum, p, nu, positions, windows, opts),
        Some(c) => {
            let key = CountsKey::new(datum, p, nu, positions, windows);
            if let Some(hit) = c.get(&key) {
                return Ok(hit);
            }
            let counts = satake_counts(datum, p, nu, positions, windows, opts)?;
            c.put(&key, &counts)?;
            Ok(counts)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fnv_known_vectors() {
        assert_eq!(fnv1a64(b""), 0xcbf2_9ce4_8422_2325);
        assert_eq!(fnv1a64(b"a"), 0xaf63_dc4c_8601_ec8c);
        assert_eq!(fnv1a64(b"foobar"), 0x85944171f73967e8);
    }

    fn demo_key() -> CountsKey {
        CountsKey {
            family: Family::PGL,
            n: 2,
            p: 5,
            nu: vec![-1, 0],
            positions: vec![(0, 1)],
            windows: vec![2],
        }
    }

    #[test]
    fn canonical_form_is_stable() {
        assert_eq!(
            demo_key().canonical(),
            r#"{"family":"PGL","n":2,"p":5,"nu":[-1,0],"positions":[[0,1]],"windows":[2]}"#
        );
    }

    #[test]
    fn roundtrip_hit_and_counters() {
        let dir = tempfile::tempdir().unwrap();
        let mut cache = CountsCache::new(dir.path()).unwrap();
        let key = demo_key();
        assert!(cache.get(&key).is_none());
        assert_eq!(cache.misses, 1);
        let mut counts = BTreeMap::new();
        counts.insert(vec![-1, 0], 1u64);
        counts.insert(vec![0, 1], 7u64);
        let cc = CellCounts { counts, visited: 8 };
        cache.put(&key, &cc).unwrap();
        let back = cache.get(&key).unwrap();
        assert_eq!(back, cc);
        assert_eq!(cache.hits, 1);
        assert_eq!(cache.list().unwrap().len(), 1);
        assert_eq!(cache.clear().unwrap(), 1);
        assert!(cache.list().unwrap().is_empty());
    }

    #[test]
    fn corrupted_entry_is_dropped() {
        let dir = tempfile::tempdir().unwrap();
        let mut cache = CountsCache::new(dir.path()).unwrap();
        let key = demo_key();
        fs::write(dir.path().join(key.filename()), "not json\ngarbage\n").unwrap();
        assert!(cache.get(&key).is_none());
        assert_eq!(cache.corrupted, 1);
        assert!(!dir.path().join(key.filename()).exists());
    }

    #[test]
    fn wrapper_computes_and_memoizes() {
        use crate::config::ComputeOpts;
        use crate::root_datum::RootDatum;
        let dir = tempfile::tempdir().unwrap();
        let mut cache = CountsCache::new(dir.path()).unwrap();
        let datum = RootDatum::new(Family::PGL, 2).unwrap();
        let opts = ComputeOpts::default();
        let cold = cached_satake_counts(
            Some(&mut cache),
            &datum,
            5,
            &[1, 0],
            &[(0, 1)],
            &[1],
            &opts,
        )
        .unwrap();
        let warm = cached_satake_counts(
            Some(&mut cache),
            &datum,
            5,
            &[1, 0],
            &[(0, 1)],
            &[1],
            &opts,
        )
        .unwrap();
        assert_eq!(cold, warm);
        assert_eq!(cache.hits, 1);
        assert_eq!(
            cached_satake_counts(None, &datum, 5, &[1, 0], &[(0, 1)], &[1], &opts).unwrap(),
            cold
        );
    }
}
