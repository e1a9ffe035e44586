//! Session state and the conversation log.
//!
//! A turn fetches the session's latest [`SessionRecord`], and writes the
//! next one only if its `turn_number` is exactly one more than the stored
//! record's. Two requests racing on the same session therefore cannot both
//! commit.

use std::collections::{BTreeMap, HashMap};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::manager::TurnDebug;
use crate::nlp::Annotations;
use crate::rgs::{Assignments, Exchange, RgStateRecord};
use crate::tracker::EntityTrackerState;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub session_id: String,
    /// Equal to `history.len()`.
    pub turn_number: u64,
    pub history: Vec<Exchange>,
    pub tracker: EntityTrackerState,
    pub rg_states: BTreeMap<String, RgStateRecord>,
    #[serde(default)]
    pub annotations_last: Annotations,
    pub assignments: Assignments,
    /// Local hour of day at the first turn.
    pub hour: u8,
    /// Seed for this conversation's random choices.
    pub seed: u64,
    #[serde(default)]
    pub ended: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConversationLogEntry {
    pub session_id: String,
    pub turn_number: u64,
    pub user: String,
    pub bot: String,
    pub debug: TurnDebug,
    /// Wall-clock milliseconds per stage.
    pub timings_ms: BTreeMap<String, f64>,
}

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path} line {line}: {message}")]
    Corrupt { path: String, line: usize, message: String },
    #[error("session `{session_id}`: expected turn {expected}, got {got}")]
    Conflict { session_id: String, expected: u64, got: u64 },
    #[error("record for `{0}` has turn_number different from its history length")]
    Inconsistent(String),
}

pub trait Store: Send + Sync {
    fn fetch(&self, session_id: &str) -> Result<Option<SessionRecord>, StoreError>;

    /// Commits `record` if it directly follows the stored one. A session's
    /// first record may carry turn 0 or 1.
    fn write(&self, record: &SessionRecord) -> Result<(), StoreError>;

    fn append_log(&self, entry: &ConversationLogEntry) -> Result<(), StoreError>;

    /// Every logged turn of one session, in order.
    fn log(&self, session_id: &str) -> Result<Vec<ConversationLogEntry>, StoreError>;
}

fn check_next(previous: Option<&SessionRecord>, record: &SessionRecord) -> Result<(), StoreError> {
    if record.turn_number != record.history.len() as u64 {
        return Err(StoreError::Inconsistent(record.session_id.clone()));
    }
    let ok = match previous {
        Some(p) => record.turn_number == p.turn_number + 1,
        None => record.turn_number <= 1,
    };
    if ok {
        return Ok(());
    }
    Err(StoreError::Conflict {
        session_id: record.session_id.clone(),
        expected: previous.map_or(0, |p| p.turn_number + 1),
        got: record.turn_number,
    })
}

#[derive(Default)]
pub struct MemoryStore {
    records: Mutex<HashMap<String, SessionRecord>>,
    logs: Mutex<HashMap<String, Vec<ConversationLogEntry>>>,
}

impl MemoryStore {
    pub fn new() -> Self {
        Self::default()
    }
}

impl Store for MemoryStore {
    fn fetch(&self, session_id: &str) -> Result<Option<SessionRecord>, StoreError> {
        Ok(self.records.lock().unwrap_or_else(|e| e.into_inner()).get(session_id).cloned())
    }

    fn write(&self, record: &SessionRecord) -> Result<(), StoreError> {
        let mut records = self.records.lock().unwrap_or_else(|e| e.into_inner());
        check_next(records.get(&record.session_id), record)?;
        records.insert(record.session_id.clone(), record.clone());
        Ok(())
    }

    fn append_log(&self, entry: &ConversationLogEntry) -> Result<(), StoreError> {
        let mut logs = self.logs.lock().unwrap_or_else(|e| e.into_inner());
        logs.entry(entry.session_id.clone()).or_default().push(entry.clone());
        Ok(())
    }

    fn log(&self, session_id: &str) -> Result<Vec<ConversationLogEntry>, StoreError> {
        Ok(self.logs.lock().unwrap_or_else(|e| e.into_inner()).get(session_id).cloned().unwrap_or_default())
    }
}

/// Two append-only JSONL files: one record per committed turn (the latest
/// line for a session wins) and one log entry per turn. Every access holds
/// an OS file lock, so several processes can share the files.
pub struct FileStore {
    state_path: PathBuf,
    log_path: PathBuf,
}

impl FileStore {
    pub fn open(state_path: impl Into<PathBuf>, log_path: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let store = Self { state_path: state_path.into(), log_path: log_path.into() };
        for p in [&store.state_path, &store.log_path] {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).map_err(|source| io(p, source))?;
            }
            open_rw(p)?;
        }
        Ok(store)
    }

    pub fn log_path(&self) -> &Path {
        &self.log_path
    }

    fn latest(&self, file: &File, session_id: &str) -> Result<Option<SessionRecord>, StoreError> {
        let mut found = None;
        for_each_line(file, &self.state_path, |line_no, line| {
            let record: SessionRecord = serde_json::from_str(line).map_err(|e| StoreError::Corrupt {
                path: self.state_path.display().to_string(),
                line: line_no,
                message: e.to_string(),
            })?;
            if record.session_id == session_id {
                found = Some(record);
            }
            Ok(())
        })?;
        Ok(found)
    }
}

fn io(path: &Path, source: std::io::Error) -> StoreError {
    StoreError::Io { path: path.display().to_string(), source }
}

fn open_rw(path: &Path) -> Result<File, StoreError> {
    OpenOptions::new().read(true).append(true).create(true).open(path).map_err(|e| io(path, e))
}

fn for_each_line(
    file: &File,
    path: &Path,
    mut f: impl FnMut(usize, &str) -> Result<(), StoreError>,
) -> Result<(), StoreError> {
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| io(path, e))?;
        if !line.trim().is_empty() {
            f(i + 1, &line)?;
        }
    }
    Ok(())
}

fn append_line(file: &mut File, path: &Path, value: &impl Serialize) -> Result<(), StoreError> {
    let mut line = serde_json::to_string(value).map_err(|e| io(path, std::io::Error::other(e)))?;
    line.push('\n');
    file.write_all(line.as_bytes()).map_err(|e| io(path, e))?;
    file.sync_data().map_err(|e| io(path, e))
}

impl Store for FileStore {
    fn fetch(&self, session_id: &str) -> Result<Option<SessionRecord>, StoreError> {
        let file = open_rw(&self.state_path)?;
        file.lock_shared().map_err(|e| io(&self.state_path, e))?;
        self.latest(&file, session_id)
    }

    fn write(&self, record: &SessionRecord) -> Result<(), StoreError> {
        let mut file = open_rw(&self.state_path)?;
        file.lock().map_err(|e| io(&self.state_path, e))?;
        let previous = self.latest(&file, &record.session_id)?;
        check_next(previous.as_ref(), record)?;
        append_line(&mut file, &self.state_path, record)
    }

    fn append_log(&self, entry: &ConversationLogEntry) -> Result<(), StoreError> {
        let mut file = open_rw(&self.log_path)?;
        file.lock().map_err(|e| io(&self.log_path, e))?;
        append_line(&mut file, &self.log_path, entry)
    }

    fn log(&self, session_id: &str) -> Result<Vec<ConversationLogEntry>, StoreError> {
        let file = open_rw(&self.log_path)?;
        file.lock_shared().map_err(|e| io(&self.log_path, e))?;
        let entries = read_log_from(&file, &self.log_path)?;
        Ok(entries.into_iter().filter(|e| e.session_id == session_id).collect())
    }
}

fn read_log_from(file: &File, path: &Path) -> Result<Vec<ConversationLogEntry>, StoreError> {
    let mut out = Vec::new();
    for_each_line(file, path, |line_no, line| {
        let entry = serde_json::from_str(line).map_err(|e| StoreError::Corrupt {
            path: path.display().to_string(),
            line: line_no,
            message: e.to_string(),
        })?;
        out.push(entry);
        Ok(())
    })?;
    Ok(out)
}

/// Reads a whole conversation log file.
pub fn read_log(path: impl AsRef<Path>) -> Result<Vec<ConversationLogEntry>, StoreError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| io(path, e))?;
    read_log_from(&file, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(id: &str, turns: u64) -> SessionRecord {
        SessionRecord {
            session_id: id.into(),
            turn_number: turns,
            history: (0..turns).map(|i| Exchange { user: format!("u{i}"), bot: format!("b{i}"), ..Default::default() }).collect(),
            ..Default::default()
        }
    }

    fn contract(store: &dyn Store) {
        assert!(store.fetch("s").unwrap().is_none());
        store.write(&record("s", 1)).unwrap();
        store.write(&record("s", 2)).unwrap();
        assert_eq!(store.fetch("s").unwrap().unwrap().turn_number, 2);
        assert!(matches!(store.write(&record("s", 2)), Err(StoreError::Conflict { expected: 3, got: 2, .. })));
        assert!(matches!(store.write(&record("s", 4)), Err(StoreError::Conflict { .. })));
        let mut bad = record("s", 3);
        bad.history.pop();
        assert!(matches!(store.write(&bad), Err(StoreError::Inconsistent(_))));
        store.write(&record("t", 0)).unwrap();
        store.write(&record("t", 1)).unwrap();
        assert_eq!(store.fetch("s").unwrap().unwrap().turn_number, 2);
        assert_eq!(store.fetch("t").unwrap().unwrap().turn_number, 1);
    }

    #[test]
    fn memory_store_contract() {
        contract(&MemoryStore::new());
    }

    #[test]
    fn file_store_contract_and_reopen() {
        let dir = tempfile::tempdir().unwrap();
        let (state, log) = (dir.path().join("state.jsonl"), dir.path().join("log.jsonl"));
        contract(&FileStore::open(&state, &log).unwrap());
        let again = FileStore::open(&state, &log).unwrap();
        assert_eq!(again.fetch("s").unwrap().unwrap(), record("s", 2));
    }

    #[test]
    fn concurrent_writers_commit_once() {
        let dir = tempfile::tempdir().unwrap();
        let store = std::sync::Arc::new(FileStore::open(dir.path().join("s.jsonl"), dir.path().join("l.jsonl")).unwrap());
        store.write(&record("s", 1)).unwrap();
        let handles: Vec<_> = (0..8)
            .map(|_| {
                let store = store.clone();
                std::thread::spawn(move || store.write(&record("s", 2)).is_ok())
            })
            .collect();
        let wins = handles.into_iter().map(|h| h.join().unwrap()).filter(|w| *w).count();
        assert_eq!(wins, 1);
    }

    #[test]
    fn corrupt_lines_are_named() {
        let dir = tempfile::tempdir().unwrap();
        let state = dir.path().join("state.jsonl");
        std::fs::write(&state, "{not json}\n").unwrap();
        let store = FileStore::open(&state, dir.path().join("log.jsonl")).unwrap();
        assert!(matches!(store.fetch("s"), Err(StoreError::Corrupt { line: 1, .. })));
    }
}
