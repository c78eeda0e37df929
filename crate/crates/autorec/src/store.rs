//! On-disk state of the outer loop: an append-only JSON Lines event log, a
//! periodic snapshot, and a compacted journal file holding only records.
//!
//! Layout of a state directory:
//! - `config.json`: the [`OuterLoopConfig`] the orchestrator runs with
//! - `events.jsonl`: one [`Event`] per line, never rewritten
//! - `snapshot.json`: `{"events": n, "state": ...}`, the state after the first `n` events
//! - `journal.jsonl`: one journal record per line, in journal order
//! - `lock`: held exclusively by the one process that owns the directory

use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use autorec_core::journal::JournalRecord;
use autorec_core::online::{Event, OnlineError, Orchestrator, OuterLoopConfig, Snapshot};
use serde::{Deserialize, Serialize};

pub const CONFIG_FILE: &str = "config.json";
pub const EVENTS_FILE: &str = "events.jsonl";
pub const SNAPSHOT_FILE: &str = "snapshot.json";
pub const JOURNAL_FILE: &str = "journal.jsonl";
pub const LOCK_FILE: &str = "lock";
pub const DEFAULT_SNAPSHOT_EVERY: usize = 500;

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path} line {line}: {message}")]
    Corrupt { path: PathBuf, line: usize, message: String },
    #[error("{0} is owned by another process; send commands to its server instead")]
    Locked(PathBuf),
    #[error(transparent)]
    Replay(#[from] OnlineError),
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Serialize, Deserialize)]
struct SnapshotFile {
    events: usize,
    state: Snapshot,
}

/// Reads a JSON Lines file. A final line without its newline is a torn
/// write and is dropped; any other unparsable line is corruption.
fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<(Vec<T>, u64), StoreError> {
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok((Vec::new(), 0)),
        Err(e) => return Err(io(path)(e)),
    };
    let mut reader = BufReader::new(file);
    let mut out = Vec::new();
    let mut good_bytes = 0u64;
    let mut line = String::new();
    let mut n = 0;
    loop {
        line.clear();
        let read = reader.read_line(&mut line).map_err(io(path))?;
        if read == 0 {
            break;
        }
        n += 1;
        let complete = line.ends_with('\n');
        if line.trim().is_empty() {
            good_bytes += read as u64;
            continue;
        }
        if !complete {
            break;
        }
        match serde_json::from_str(line.trim_end()) {
            Ok(v) => {
                out.push(v);
                good_bytes += read as u64;
            }
            Err(e) => {
                return Err(StoreError::Corrupt {
                    path: path.to_path_buf(),
                    line: n,
                    message: e.to_string(),
                })
            }
        }
    }
    Ok((out, good_bytes))
}

fn append_lines<T: Serialize>(path: &Path, items: &[T]) -> Result<(), StoreError> {
    if items.is_empty() {
        return Ok(());
    }
    let mut text = String::new();
    for it in items {
        text.push_str(&serde_json::to_string(it).expect("serializable"));
        text.push('\n');
    }
    let mut f = OpenOptions::new().create(true).append(true).open(path).map_err(io(path))?;
    f.write_all(text.as_bytes()).map_err(io(path))?;
    f.sync_data().map_err(io(path))
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), StoreError> {
    let tmp = path.with_extension("tmp");
    let mut f = File::create(&tmp).map_err(io(&tmp))?;
    f.write_all(bytes).map_err(io(&tmp))?;
    f.sync_all().map_err(io(&tmp))?;
    fs::rename(&tmp, path).map_err(io(path))
}

/// A state directory bound to one orchestrator.
#[derive(Debug)]
pub struct StateStore {
    dir: PathBuf,
    events: usize,
    snapshot_at: usize,
    journal_written: usize,
    pub snapshot_every: usize,
    _lock: File,
}

impl StateStore {
    /// Opens `dir`, creating it with `config` if it holds no state yet, and
    /// rebuilds the orchestrator from the snapshot plus the event tail.
    pub fn open(dir: &Path, config: Option<OuterLoopConfig>) -> Result<(Self, Orchestrator), StoreError> {
        fs::create_dir_all(dir).map_err(io(dir))?;
        let lock_path = dir.join(LOCK_FILE);
        let lock = OpenOptions::new()
            .create(true)
            .truncate(false)
            .write(true)
            .open(&lock_path)
            .map_err(io(&lock_path))?;
        match lock.try_lock() {
            Ok(()) => {}
            Err(std::fs::TryLockError::WouldBlock) => return Err(StoreError::Locked(dir.into())),
            Err(std::fs::TryLockError::Error(e)) => return Err(io(&lock_path)(e)),
        }
        let config_path = dir.join(CONFIG_FILE);
        let config = match fs::read_to_string(&config_path) {
            Ok(text) => serde_json::from_str(&text).map_err(|e| StoreError::Corrupt {
                path: config_path.clone(),
                line: e.line(),
                message: e.to_string(),
            })?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                let c = config.unwrap_or_default();
                write_atomic(&config_path, serde_json::to_string_pretty(&c).unwrap().as_bytes())?;
                c
            }
            Err(e) => return Err(io(&config_path)(e)),
        };

        let events_path = dir.join(EVENTS_FILE);
        let (events, good_bytes) = read_jsonl::<Event>(&events_path)?;
        if let Ok(meta) = fs::metadata(&events_path) {
            if meta.len() > good_bytes {
                let f = OpenOptions::new().write(true).open(&events_path).map_err(io(&events_path))?;
                f.set_len(good_bytes).map_err(io(&events_path))?;
            }
        }

        let snap_path = dir.join(SNAPSHOT_FILE);
        let snapshot = match fs::read_to_string(&snap_path) {
            Ok(text) => Some(serde_json::from_str::<SnapshotFile>(&text).map_err(|e| StoreError::Corrupt {
                path: snap_path.clone(),
                line: e.line(),
                message: e.to_string(),
            })?),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => None,
            Err(e) => return Err(io(&snap_path)(e)),
        }
        .filter(|s| s.events <= events.len());

        let (orch, snapshot_at) = match snapshot {
            Some(s) => (Orchestrator::restore(config, Some(s.state), &events[s.events..])?, s.events),
            None => (Orchestrator::restore(config, None, &events)?, 0),
        };

        let journal_path = dir.join(JOURNAL_FILE);
        let (written, _) = read_jsonl::<JournalRecord>(&journal_path)?;
        let mut store = Self {
            dir: dir.to_path_buf(),
            events: events.len(),
            snapshot_at,
            journal_written: written.len().min(orch.journal().len()),
            snapshot_every: DEFAULT_SNAPSHOT_EVERY,
            _lock: lock,
        };
        if written.len() > orch.journal().len() {
            let text: String = orch
                .journal()
                .records()
                .iter()
                .map(|r| serde_json::to_string(r).unwrap() + "\n")
                .collect();
            write_atomic(&journal_path, text.as_bytes())?;
        }
        store.sync_journal(&orch)?;
        Ok((store, orch))
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn event_count(&self) -> usize {
        self.events
    }

    fn sync_journal(&mut self, o: &Orchestrator) -> Result<(), StoreError> {
        let fresh = &o.journal().records()[self.journal_written..];
        append_lines(&self.dir.join(JOURNAL_FILE), fresh)?;
        self.journal_written = o.journal().len();
        Ok(())
    }

    /// Durably appends the orchestrator's pending events, extends the
    /// journal file, and snapshots when enough events have accumulated.
    pub fn persist(&mut self, o: &mut Orchestrator) -> Result<(), StoreError> {
        let events = o.take_events();
        append_lines(&self.dir.join(EVENTS_FILE), &events)?;
        self.events += events.len();
        self.sync_journal(o)?;
        if self.events - self.snapshot_at >= self.snapshot_every {
            self.snapshot(o)?;
        }
        Ok(())
    }

    /// Writes a snapshot covering every persisted event. Pending events
    /// must have been persisted first.
    pub fn snapshot(&mut self, o: &Orchestrator) -> Result<(), StoreError> {
        let file = SnapshotFile {
            events: self.events,
            state: o.snapshot(),
        };
        write_atomic(&self.dir.join(SNAPSHOT_FILE), serde_json::to_string(&file).unwrap().as_bytes())?;
        self.snapshot_at = self.events;
        Ok(())
    }
}

/// Journal records from a state directory's compacted journal file.
pub fn read_journal(dir: &Path) -> Result<Vec<JournalRecord>, StoreError> {
    Ok(read_jsonl(&dir.join(JOURNAL_FILE))?.0)
}
