//! On-disk response cache: one file per key, each carrying a checksum of its
//! payload. Entries expire after a TTL; total size is capped with LRU
//! eviction.
//!
//! File layout (text header, binary payload):
//!
//! ```text
//! NTCACHE1
//! <sha256 of payload, hex>
//! <creation time, unix seconds>
//! <canonical key>
//! <payload bytes...>
//! ```

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::clock::Clock;

const MAGIC: &str = "NTCACHE1";

pub const DEFAULT_TTL: Duration = Duration::from_secs(7 * 24 * 3600);
pub const DEFAULT_MAX_BYTES: u64 = 512 * 1024 * 1024;

/// Canonical request descriptor: endpoint, parameters (sorted by name) and
/// pipeline version.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct CacheKey {
    endpoint: String,
    params: BTreeMap<String, String>,
    version: String,
}

impl CacheKey {
    pub fn new<I, K, V>(endpoint: &str, params: I, version: &str) -> Self
    where
        I: IntoIterator<Item = (K, V)>,
        K: Into<String>,
        V: Into<String>,
    {
        Self {
            endpoint: endpoint.to_string(),
            params: params
                .into_iter()
                .map(|(k, v)| (k.into(), v.into()))
                .collect(),
            version: version.to_string(),
        }
    }

    pub fn canonical(&self) -> String {
        serde_json::to_string(self).expect("cache keys always serialize")
    }

    fn file_name(&self) -> String {
        hex::encode(Sha256::digest(self.canonical().as_bytes()))
    }
}

#[derive(Debug, Error)]
pub enum CacheError {
    #[error("cache io error: {0}")]
    Io(#[from] io::Error),
}

/// Reasons a stored entry was not returned.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Miss {
    Absent,
    Expired,
    CorruptEntry,
}

#[derive(Debug, Clone, Copy)]
struct IndexEntry {
    size: u64,
    last_access: u64,
}

#[derive(Debug, Default)]
struct Index {
    entries: HashMap<String, IndexEntry>,
    total: u64,
    tick: u64,
}

pub struct ResponseCache {
    dir: PathBuf,
    ttl: Duration,
    max_bytes: u64,
    clock: Arc<dyn Clock>,
    index: Mutex<Index>,
    temp_counter: AtomicU64,
}

impl std::fmt::Debug for ResponseCache {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ResponseCache")
            .field("dir", &self.dir)
            .field("ttl", &self.ttl)
            .field("max_bytes", &self.max_bytes)
            .finish()
    }
}

impl ResponseCache {
    pub fn open(dir: impl AsRef<Path>, clock: Arc<dyn Clock>) -> Result<Self, CacheError> {
        Self::with_limits(dir, clock, DEFAULT_TTL, DEFAULT_MAX_BYTES)
    }

    pub fn with_limits(
        dir: impl AsRef<Path>,
        clock: Arc<dyn Clock>,
        ttl: Duration,
        max_bytes: u64,
    ) -> Result<Self, CacheError> {
        let dir = dir.as_ref().to_path_buf();
        fs::create_dir_all(&dir)?;
        let mut found: Vec<(u64, String, u64)> = Vec::new();
        for entry in fs::read_dir(&dir)? {
            let entry = entry?;
            let name = entry.file_name().to_string_lossy().into_owned();
            if name.starts_with('.') || !entry.file_type()?.is_file() {
                continue;
            }
            let size = entry.metadata()?.len();
            let created = read_created(&entry.path()).unwrap_or(0);
            found.push((created, name, size));
        }
        // Oldest entries get the smallest access ticks.
        found.sort();
        let mut index = Index::default();
        for (_, name, size) in found {
            index.tick += 1;
            index.total += size;
            index.entries.insert(
                name,
                IndexEntry {
                    size,
                    last_access: index.tick,
                },
            );
        }
        Ok(Self {
            dir,
            ttl,
            max_bytes,
            clock,
            index: Mutex::new(index),
            temp_counter: AtomicU64::new(0),
        })
    }

    pub fn get(&self, key: &CacheKey) -> Result<Vec<u8>, Miss> {
        let name = key.file_name();
        let path = self.dir.join(&name);
        let raw = match fs::read(&path) {
            Ok(raw) => raw,
            Err(_) => return Err(Miss::Absent),
        };
        match decode(&raw, &key.canonical()) {
            Some((created, payload)) => {
                let age = self.clock.now().as_secs().saturating_sub(created);
                if age >= self.ttl.as_secs() {
                    self.remove(&name);
                    return Err(Miss::Expired);
                }
                let mut index = self.index.lock().unwrap();
                index.tick += 1;
                let tick = index.tick;
                if let Some(entry) = index.entries.get_mut(&name) {
                    entry.last_access = tick;
                }
                Ok(payload.to_vec())
            }
            None => {
                tracing::warn!(path = %path.display(), "evicting corrupt cache entry");
                self.remove(&name);
                Err(Miss::CorruptEntry)
            }
        }
    }

    pub fn put(&self, key: &CacheKey, value: &[u8]) -> Result<(), CacheError> {
        let name = key.file_name();
        let mut contents = format!(
            "{MAGIC}\n{}\n{}\n{}\n",
            hex::encode(Sha256::digest(value)),
            self.clock.now().as_secs(),
            key.canonical()
        )
        .into_bytes();
        contents.extend_from_slice(value);

        let n = self.temp_counter.fetch_add(1, Ordering::Relaxed);
        let temp = self
            .dir
            .join(format!(".tmp-{}-{}-{}", std::process::id(), n, name));
        fs::write(&temp, &contents)?;
        fs::rename(&temp, self.dir.join(&name))?;

        let mut index = self.index.lock().unwrap();
        index.tick += 1;
        let tick = index.tick;
        let size = contents.len() as u64;
        if let Some(old) = index.entries.insert(
            name.clone(),
            IndexEntry {
                size,
                last_access: tick,
            },
        ) {
            index.total -= old.size;
        }
        index.total += size;
        self.evict_locked(&mut index, &name);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.index.lock().unwrap().entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn total_bytes(&self) -> u64 {
        self.index.lock().unwrap().total
    }

    fn evict_locked(&self, index: &mut Index, keep: &str) {
        while index.total > self.max_bytes {
            let victim = index
                .entries
                .iter()
                .filter(|(name, _)| name.as_str() != keep)
                .min_by_key(|(_, e)| e.last_access)
                .map(|(name, _)| name.clone());
            let Some(victim) = victim else { break };
            if let Some(entry) = index.entries.remove(&victim) {
                index.total -= entry.size;
            }
            let _ = fs::remove_file(self.dir.join(&victim));
        }
    }

    fn remove(&self, name: &str) {
        let _ = fs::remove_file(self.dir.join(name));
        let mut index = self.index.lock().unwrap();
        if let Some(entry) = index.entries.remove(name) {
            index.total -= entry.size;
        }
    }

    #[cfg(test)]
    fn path_for(&self, key: &CacheKey) -> PathBuf {
        self.dir.join(key.file_name())
    }
}

fn split_header(raw: &[u8]) -> Option<(Vec<&str>, &[u8])> {
    let mut lines = Vec::with_capacity(4);
    let mut rest = raw;
    for _ in 0..4 {
        let nl = rest.iter().position(|&b| b == b'\n')?;
        lines.push(std::str::from_utf8(&rest[..nl]).ok()?);
        rest = &rest[nl + 1..];
    }
    Some((lines, rest))
}

fn decode<'a>(raw: &'a [u8], canonical: &str) -> Option<(u64, &'a [u8])> {
    let (lines, payload) = split_header(raw)?;
    if lines[0] != MAGIC || lines[3] != canonical {
        return None;
    }
    if hex::encode(Sha256::digest(payload)) != lines[1] {
        return None;
    }
    let created = lines[2].parse().ok()?;
    Some((created, payload))
}

fn read_created(path: &Path) -> Option<u64> {
    let raw = fs::read(path).ok()?;
    let (lines, _) = split_header(&raw)?;
    lines[2].parse().ok()
}
