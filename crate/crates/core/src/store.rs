//! Durable storage.
//!
//! The portal keeps a domain state document next to the append-only result
//! log, plus per-record progress snapshots. Snapshots are a cache; the log
//! is the source of truth and replaying it must reproduce them.
//!
//! [`FileStore`] lays these out in a directory:
//!
//! ```text
//! state.json               domain state, rewritten atomically
//! events.jsonl             one {"seq","event","checksum"} object per line
//! snapshots/<s>-<t>.json   one progress record per (student, trail)
//! packages/<sha256>.bin    uploaded activity packages
//! ```
//!
//! Each log line's checksum is SHA-256 over the previous line's checksum and
//! the event's JSON, so any edit to a logged event breaks the chain at that
//! line.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::accounts::Directory;
use crate::catalog::Catalog;
use crate::engine::{ResultEvent, TrailProgress};
use crate::ids::{AccountId, TrailId};
use crate::trails::Trails;

#[derive(Debug, Default, Serialize, Deserialize)]
pub struct StateDoc {
    pub directory: Directory,
    pub catalog: Catalog,
    pub trails: Trails,
    /// Every (student, trail) pair whose progress has been initialized.
    pub enrolments: Vec<(AccountId, TrailId)>,
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("storage i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("storage encoding: {0}")]
    Encoding(#[from] serde_json::Error),
    #[error("event log corrupt at entry {index}")]
    CorruptLog { index: usize },
    #[error("snapshot for {student}/{trail} differs from the replayed log")]
    SnapshotMismatch { student: AccountId, trail: TrailId },
}

/// Storage contract behind the portal.
pub trait Storage: Send {
    fn load_state(&self) -> Result<Option<StateDoc>, StoreError>;
    fn save_state(&mut self, state: &StateDoc) -> Result<(), StoreError>;

    fn append_event(&mut self, event: &ResultEvent) -> Result<(), StoreError>;
    /// Reads the full log, verifying integrity.
    fn load_events(&self) -> Result<Vec<ResultEvent>, StoreError>;

    fn save_snapshot(&mut self, progress: &TrailProgress) -> Result<(), StoreError>;
    fn load_snapshots(&self) -> Result<Vec<TrailProgress>, StoreError>;

    fn put_package(&mut self, package_ref: &str, bytes: &[u8]) -> Result<(), StoreError>;
    fn get_package(&self, package_ref: &str) -> Result<Option<Vec<u8>>, StoreError>;
}

#[derive(Debug, Serialize, Deserialize)]
struct LogLine {
    seq: usize,
    event: ResultEvent,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    checksum: Option<String>,
}

fn chain(prev: &str, event: &ResultEvent) -> String {
    let mut h = Sha256::new();
    h.update(prev.as_bytes());
    h.update(serde_json::to_vec(event).expect("events serialize"));
    hex::encode(h.finalize())
}

/// In-memory storage; state is kept serialized so that loads behave like a
/// real round trip.
#[derive(Debug, Default)]
pub struct MemoryStore {
    state: Option<String>,
    events: Vec<ResultEvent>,
    snapshots: BTreeMap<(AccountId, TrailId), TrailProgress>,
    packages: BTreeMap<String, Vec<u8>>,
}

impl MemoryStore {
    pub fn new() -> Self {
        Self::default()
    }
}

impl Storage for MemoryStore {
    fn load_state(&self) -> Result<Option<StateDoc>, StoreError> {
        self.state
            .as_deref()
            .map(serde_json::from_str)
            .transpose()
            .map_err(Into::into)
    }

    fn save_state(&mut self, state: &StateDoc) -> Result<(), StoreError> {
        self.state = Some(serde_json::to_string(state)?);
        Ok(())
    }

    fn append_event(&mut self, event: &ResultEvent) -> Result<(), StoreError> {
        self.events.push(event.clone());
        Ok(())
    }

    fn load_events(&self) -> Result<Vec<ResultEvent>, StoreError> {
        Ok(self.events.clone())
    }

    fn save_snapshot(&mut self, progress: &TrailProgress) -> Result<(), StoreError> {
        self.snapshots
            .insert((progress.student, progress.trail), progress.clone());
        Ok(())
    }

    fn load_snapshots(&self) -> Result<Vec<TrailProgress>, StoreError> {
        Ok(self.snapshots.values().cloned().collect())
    }

    fn put_package(&mut self, package_ref: &str, bytes: &[u8]) -> Result<(), StoreError> {
        self.packages.insert(package_ref.to_owned(), bytes.to_vec());
        Ok(())
    }

    fn get_package(&self, package_ref: &str) -> Result<Option<Vec<u8>>, StoreError> {
        Ok(self.packages.get(package_ref).cloned())
    }
}

/// Directory-backed storage. This is the default store.
#[derive(Debug)]
pub struct FileStore {
    root: PathBuf,
    checksums: bool,
    next_seq: usize,
    last_checksum: String,
}

impl FileStore {
    /// Opens (creating if needed) a store rooted at `root`, with log
    /// checksums enabled.
    pub fn open(root: impl AsRef<Path>) -> Result<Self, StoreError> {
        Self::open_with(root, true)
    }

    pub fn open_with(root: impl AsRef<Path>, checksums: bool) -> Result<Self, StoreError> {
        let root = root.as_ref().to_path_buf();
        fs::create_dir_all(root.join("snapshots"))?;
        fs::create_dir_all(root.join("packages"))?;
        let mut store = FileStore {
            root,
            checksums,
            next_seq: 0,
            last_checksum: String::new(),
        };
        let lines = store.read_log()?;
        store.next_seq = lines.len();
        store.last_checksum = lines
            .last()
            .and_then(|l| l.checksum.clone())
            .unwrap_or_default();
        Ok(store)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn events_path(&self) -> PathBuf {
        self.root.join("events.jsonl")
    }

    pub fn snapshot_path(&self, student: AccountId, trail: TrailId) -> PathBuf {
        self.root
            .join("snapshots")
            .join(format!("{}-{}.json", student.0, trail.0))
    }

    fn package_path(&self, package_ref: &str) -> PathBuf {
        let name: String = package_ref
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
            .collect();
        self.root.join("packages").join(format!("{name}.bin"))
    }

    fn read_log(&self) -> Result<Vec<LogLine>, StoreError> {
        let path = self.events_path();
        if !path.exists() {
            return Ok(Vec::new());
        }
        let reader = BufReader::new(fs::File::open(path)?);
        let mut lines = Vec::new();
        let mut prev = String::new();
        for (index, raw) in reader.lines().enumerate() {
            let raw = raw?;
            if raw.trim().is_empty() {
                continue;
            }
            let line: LogLine =
                serde_json::from_str(&raw).map_err(|_| StoreError::CorruptLog { index })?;
            if line.seq != index {
                return Err(StoreError::CorruptLog { index });
            }
            if self.checksums {
                let expected = chain(&prev, &line.event);
                if line.checksum.as_deref() != Some(expected.as_str()) {
                    return Err(StoreError::CorruptLog { index });
                }
                prev = expected;
            }
            lines.push(line);
        }
        Ok(lines)
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), StoreError> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(tmp, path)?;
    Ok(())
}

impl Storage for FileStore {
    fn load_state(&self) -> Result<Option<StateDoc>, StoreError> {
        let path = self.root.join("state.json");
        if !path.exists() {
            return Ok(None);
        }
        Ok(Some(serde_json::from_slice(&fs::read(path)?)?))
    }

    fn save_state(&mut self, state: &StateDoc) -> Result<(), StoreError> {
        write_atomic(&self.root.join("state.json"), &serde_json::to_vec(state)?)
    }

    fn append_event(&mut self, event: &ResultEvent) -> Result<(), StoreError> {
        let checksum = self.checksums.then(|| chain(&self.last_checksum, event));
        let line = LogLine {
            seq: self.next_seq,
            event: event.clone(),
            checksum: checksum.clone(),
        };
        let mut text = serde_json::to_string(&line)?;
        text.push('\n');
        let mut f = fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(self.events_path())?;
        f.write_all(text.as_bytes())?;
        f.sync_data()?;
        self.next_seq += 1;
        if let Some(c) = checksum {
            self.last_checksum = c;
        }
        Ok(())
    }

    fn load_events(&self) -> Result<Vec<ResultEvent>, StoreError> {
        Ok(self.read_log()?.into_iter().map(|l| l.event).collect())
    }

    fn save_snapshot(&mut self, progress: &TrailProgress) -> Result<(), StoreError> {
        write_atomic(
            &self.snapshot_path(progress.student, progress.trail),
            &serde_json::to_vec(progress)?,
        )
    }

    fn load_snapshots(&self) -> Result<Vec<TrailProgress>, StoreError> {
        let mut out = Vec::new();
        let mut paths: Vec<PathBuf> = fs::read_dir(self.root.join("snapshots"))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        paths.sort();
        for p in paths {
            out.push(serde_json::from_slice(&fs::read(p)?)?);
        }
        Ok(out)
    }

    fn put_package(&mut self, package_ref: &str, bytes: &[u8]) -> Result<(), StoreError> {
        write_atomic(&self.package_path(package_ref), bytes)
    }

    fn get_package(&self, package_ref: &str) -> Result<Option<Vec<u8>>, StoreError> {
        let path = self.package_path(package_ref);
        if !path.exists() {
            return Ok(None);
        }
        Ok(Some(fs::read(path)?))
    }
}
