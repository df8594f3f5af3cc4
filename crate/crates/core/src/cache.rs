//! Persistent count cache.
//!
//! One JSON file holds a table per curve id. Each entry carries a fingerprint
//! of the curve descriptor and the field reduction table; an entry whose
//! fingerprint differs is treated as absent. Writes go to a temporary file in
//! the same directory that is then renamed over the old one, so readers see
//! either the old or the new file. A file that fails to parse is moved aside
//! rather than discarded.

use std::collections::{BTreeMap, HashMap};
use std::hash::Hasher;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::count::{count_range_from, CountOptions, CountTable};
use crate::curve::CurveSpec;
use crate::error::{Error, Result};
use crate::gf2m::reduction_table_text;

pub const CACHE_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub fingerprint: String,
    pub table: CountTable,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheFile {
    pub version: u32,
    pub entries: BTreeMap<String, CacheEntry>,
}

impl Default for CacheFile {
    fn default() -> Self {
        CacheFile { version: CACHE_VERSION, entries: BTreeMap::new() }
    }
}

/// FNV-1a of the reduction table and the curve descriptor.
pub fn fingerprint(curve: &CurveSpec) -> String {
    let mut h = fnv::FnvHasher::default();
    h.write(reduction_table_text().as_bytes());
    h.write(&[0]);
    h.write(curve.to_json().as_bytes());
    format!("{:016x}", h.finish())
}

/// What [`CacheFile::load`] found on disk.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LoadOutcome {
    Loaded,
    Missing,
    /// The file was unreadable and has been renamed to this path.
    Quarantined(PathBuf),
}

impl CacheFile {
    pub fn load(path: &Path) -> Result<(CacheFile, LoadOutcome)> {
        let text = match std::fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Ok((CacheFile::default(), LoadOutcome::Missing))
            }
            Err(e) => return Err(e.into()),
        };
        let parsed: std::result::Result<CacheFile, String> = serde_json::from_str::<CacheFile>(&text)
            .map_err(|e| e.to_string())
            .and_then(|c| {
                if c.version != CACHE_VERSION {
                    return Err(format!("unsupported cache version {}", c.version));
                }
                for e in c.entries.values() {
                    e.table.validate().map_err(|e| e.to_string())?;
                }
                Ok(c)
            });
        match parsed {
            Ok(c) => Ok((c, LoadOutcome::Loaded)),
            Err(_) => {
                let q = quarantine_path(path);
                std::fs::rename(path, &q)?;
                Ok((CacheFile::default(), LoadOutcome::Quarantined(q)))
            }
        }
    }

    /// Atomically replaces `path` with the current contents.
    pub fn save(&self, path: &Path) -> Result<()> {
        let dir = match path.parent() {
            Some(d) if !d.as_os_str().is_empty() => d,
            _ => Path::new("."),
        };
        std::fs::create_dir_all(dir)?;
        let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
        serde_json::to_writer_pretty(&mut tmp, self)?;
        tmp.write_all(b"\n")?;
        tmp.as_file().sync_all()?;
        tmp.persist(path).map_err(|e| Error::Io(e.error))?;
        Ok(())
    }

    pub fn get(&self, curve: &CurveSpec) -> Option<&CountTable> {
        self.entries
            .get(&curve.id)
            .filter(|e| e.fingerprint == fingerprint(curve))
            .map(|e| &e.table)
    }

    /// Adds rows for `curve`. Rows already present must agree.
    pub fn put(&mut self, curve: &CurveSpec, table: &CountTable) -> Result<()> {
        let fp = fingerprint(curve);
        let entry = self
            .entries
            .entry(curve.id.clone())
            .or_insert_with(|| CacheEntry { fingerprint: fp.clone(), table: CountTable::new(&curve.id) });
        if entry.fingerprint != fp {
            *entry = CacheEntry { fingerprint: fp, table: CountTable::new(&curve.id) };
        }
        for row in &table.rows {
            match entry.table.row(row.k) {
                Some(old) if old != row => {
                    return Err(Error::Cache(format!(
                        "{}: cached row {old:?} conflicts with {row:?}",
                        curve.id
                    )))
                }
                Some(_) => {}
                None => entry.table.insert(*row),
            }
        }
        Ok(())
    }
}

fn quarantine_path(path: &Path) -> PathBuf {
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    for i in 0.. {
        let cand = path.with_file_name(format!("{name}.corrupt.{i}"));
        if !cand.exists() {
            return cand;
        }
    }
    unreachable!()
}

/// Count tables on demand, memoised in memory and optionally on disk.
pub struct Counter {
    pub opts: CountOptions,
    cache: Option<(PathBuf, CacheFile)>,
    memo: HashMap<String, CountTable>,
    max_k: BTreeMap<String, u32>,
}

impl Counter {
    pub fn new(opts: CountOptions) -> Self {
        Counter { opts, cache: None, memo: HashMap::new(), max_k: BTreeMap::new() }
    }

    pub fn with_cache(opts: CountOptions, path: &Path) -> Result<(Self, LoadOutcome)> {
        let (file, outcome) = CacheFile::load(path)?;
        let cache = Some((path.to_path_buf(), file));
        Ok((Counter { opts, cache, memo: HashMap::new(), max_k: BTreeMap::new() }, outcome))
    }

    /// Per-curve caps on `k`, applied on top of the budget.
    pub fn set_max_k(&mut self, max_k: BTreeMap<String, u32>) {
        self.max_k = max_k;
    }

    /// Rows `1..=k_max` of `curve` within the budget and the per-curve cap.
    pub fn table(&mut self, curve: &CurveSpec, k_max: u32) -> Result<CountTable> {
        let k_max = self.max_k.get(&curve.id).map_or(k_max, |m| k_max.min(*m));
        let known = self
            .memo
            .get(&curve.id)
            .cloned()
            .or_else(|| self.cache.as_ref().and_then(|(_, c)| c.get(curve).cloned()));
        let table = count_range_from(curve, k_max, &self.opts, known.as_ref())?;
        let grew = known.as_ref().map_or(true, |k| k.rows.len() < table.rows.len());
        let mut merged = known.unwrap_or_else(|| CountTable::new(&curve.id));
        for r in &table.rows {
            merged.insert(*r);
        }
        self.memo.insert(curve.id.clone(), merged.clone());
        if grew {
            if let Some((path, file)) = &mut self.cache {
                file.put(curve, &merged)?;
                file.save(path)?;
            }
        }
        Ok(table)
    }

    pub fn cached(&self, curve: &CurveSpec) -> Option<&CountTable> {
        self.memo
            .get(&curve.id)
            .or_else(|| self.cache.as_ref().and_then(|(_, c)| c.get(curve)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::count::CountRow;
    use crate::curve::tower_level;

    fn sample() -> CountTable {
        let mut t = CountTable::new("T2");
        t.insert(CountRow { k: 1, affine: 4, bad: 4, total: 8 });
        t.insert(CountRow { k: 2, affine: 12, bad: 4, total: 16 });
        t
    }

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.json");
        let t2 = tower_level(2).unwrap();
        let mut c = CacheFile::default();
        c.put(&t2, &sample()).unwrap();
        c.save(&path).unwrap();
        let (back, outcome) = CacheFile::load(&path).unwrap();
        assert_eq!(outcome, LoadOutcome::Loaded);
        assert_eq!(back.get(&t2), Some(&sample()));
        assert_eq!(back, c);
    }

    #[test]
    fn fingerprint_mismatch_is_absent() {
        let t2 = tower_level(2).unwrap();
        let mut c = CacheFile::default();
        c.put(&t2, &sample()).unwrap();
        c.entries.get_mut("T2").unwrap().fingerprint = "0".into();
        assert!(c.get(&t2).is_none());
    }

    #[test]
    fn conflicting_rows_are_rejected() {
        let t2 = tower_level(2).unwrap();
        let mut c = CacheFile::default();
        c.put(&t2, &sample()).unwrap();
        let mut bad = sample();
        bad.rows[0].total = 9;
        bad.rows[0].affine = 5;
        assert!(matches!(c.put(&t2, &bad), Err(Error::Cache(_))));
    }

    #[test]
    fn corrupt_file_is_quarantined() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.json");
        std::fs::write(&path, "{ not json").unwrap();
        let (c, outcome) = CacheFile::load(&path).unwrap();
        assert!(c.entries.is_empty());
        match outcome {
            LoadOutcome::Quarantined(q) => {
                assert!(q.exists());
                assert_eq!(std::fs::read_to_string(q).unwrap(), "{ not json");
            }
            other => panic!("{other:?}"),
        }
        assert!(!path.exists());
    }

    #[test]
    fn counter_reuses_cache() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        let t3 = tower_level(3).unwrap();
        let (mut a, _) = Counter::with_cache(CountOptions::default(), &path).unwrap();
        let first = a.table(&t3, 3).unwrap();
        let (b, outcome) = Counter::with_cache(CountOptions::default(), &path).unwrap();
        assert_eq!(outcome, LoadOutcome::Loaded);
        assert_eq!(b.cached(&t3), Some(&first));
    }
}
