//! Durable storage: an append-only journal (`journal.ndjson`) plus
//! optional snapshots, all under one data directory guarded by `LOCK`.

mod event;
mod journal;
mod snapshot;

use std::fs::{self, File, OpenOptions, TryLockError};
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

pub use event::{EventKind, JournalEvent, Mutation};
pub use journal::{check_pairs, parse_journal, replay, ParsedJournal};
pub use snapshot::{list_snapshots, load_latest_snapshot, read_snapshot, snapshot_path, write_snapshot};

use crate::registry::{ApplyError, RegistryState};

pub const JOURNAL_FILE: &str = "journal.ndjson";
pub const LOCK_FILE: &str = "LOCK";

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("storage full while writing {0}")]
    StorageFull(PathBuf),
    #[error("sequence gap: expected {expected}, got {got}")]
    SequenceGap { expected: u64, got: u64 },
    #[error("corrupt journal event at line {line} (byte {offset}): {reason}")]
    CorruptEvent { line: usize, offset: u64, reason: String },
    #[error(transparent)]
    Apply(#[from] ApplyError),
    #[error("data directory {0} is locked by another process")]
    Locked(PathBuf),
    #[error("serialization failed: {0}")]
    Serialize(#[from] serde_json::Error),
}

impl StoreError {
    pub(crate) fn io(path: &Path, source: io::Error) -> Self {
        if source.kind() == io::ErrorKind::StorageFull {
            StoreError::StorageFull(path.to_path_buf())
        } else {
            StoreError::Io {
                path: path.to_path_buf(),
                source,
            }
        }
    }
}

/// What happened while opening a data directory.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Recovery {
    pub snapshot_seq: Option<u64>,
    pub events_replayed: usize,
    pub truncated_bytes: u64,
}

#[derive(Debug, Clone, Copy)]
pub struct StoreOptions {
    /// fsync the journal after every append.
    pub fsync: bool,
}

impl Default for StoreOptions {
    fn default() -> Self {
        Self { fsync: true }
    }
}

#[derive(Debug)]
pub struct Store {
    dir: PathBuf,
    journal_path: PathBuf,
    journal: File,
    journal_len: u64,
    last_seq: u64,
    options: StoreOptions,
    _lock: File,
}

impl Store {
    /// Opens (creating if needed) a data directory, recovers the journal,
    /// and rebuilds the registry state from the newest valid snapshot plus
    /// the journal tail.
    pub fn open(dir: &Path, options: StoreOptions) -> Result<(Store, RegistryState, Recovery), StoreError> {
        fs::create_dir_all(dir).map_err(|e| StoreError::io(dir, e))?;
        let lock_path = dir.join(LOCK_FILE);
        let lock = OpenOptions::new()
            .create(true)
            .truncate(false)
            .write(true)
            .open(&lock_path)
            .map_err(|e| StoreError::io(&lock_path, e))?;
        match lock.try_lock() {
            Ok(()) => {}
            Err(TryLockError::WouldBlock) => return Err(StoreError::Locked(dir.to_path_buf())),
            Err(TryLockError::Error(e)) => return Err(StoreError::io(&lock_path, e)),
        }

        let journal_path = dir.join(JOURNAL_FILE);
        let mut journal = OpenOptions::new()
            .create(true)
            .read(true)
            .append(true)
            .open(&journal_path)
            .map_err(|e| StoreError::io(&journal_path, e))?;
        let mut bytes = Vec::new();
        journal
            .read_to_end(&mut bytes)
            .map_err(|e| StoreError::io(&journal_path, e))?;
        let parsed = parse_journal(&bytes)?;
        if parsed.discarded_len > 0 {
            tracing::warn!(bytes = parsed.discarded_len, "discarding incomplete journal tail");
            journal
                .set_len(parsed.valid_len as u64)
                .map_err(|e| StoreError::io(&journal_path, e))?;
            journal.sync_all().map_err(|e| StoreError::io(&journal_path, e))?;
        }
        let last_seq = parsed.events.last().map_or(0, |e| e.seq);

        let (state, recovery) = restore(dir, &parsed)?;

        Ok((
            Store {
                dir: dir.to_path_buf(),
                journal_path,
                journal,
                journal_len: parsed.valid_len as u64,
                last_seq,
                options,
                _lock: lock,
            },
            state,
            recovery,
        ))
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn last_seq(&self) -> u64 {
        self.last_seq
    }

    /// Appends a batch of events in one write. Either every event in the
    /// batch is durable when this returns `Ok`, or the journal is rolled
    /// back to its previous length.
    pub fn append(&mut self, events: &[JournalEvent]) -> Result<u64, StoreError> {
        let mut expected = self.last_seq + 1;
        let mut buf = String::new();
        for ev in events {
            if ev.seq != expected {
                return Err(StoreError::SequenceGap {
                    expected,
                    got: ev.seq,
                });
            }
            buf.push_str(&ev.to_line()?);
            expected += 1;
        }
        let result = self.journal.write_all(buf.as_bytes()).and_then(|_| {
            if self.options.fsync {
                self.journal.sync_data()
            } else {
                self.journal.flush()
            }
        });
        if let Err(e) = result {
            let _ = self.journal.set_len(self.journal_len);
            return Err(StoreError::io(&self.journal_path, e));
        }
        self.journal_len += buf.len() as u64;
        self.last_seq = expected - 1;
        Ok(self.last_seq)
    }

    /// Reads back every event currently in the journal.
    pub fn read_events(&self) -> Result<Vec<JournalEvent>, StoreError> {
        let bytes = fs::read(&self.journal_path).map_err(|e| StoreError::io(&self.journal_path, e))?;
        Ok(parse_journal(&bytes)?.events)
    }

    pub fn snapshot(&self, state: &RegistryState) -> Result<PathBuf, StoreError> {
        write_snapshot(&self.dir, state)
    }
}

fn restore(dir: &Path, parsed: &ParsedJournal) -> Result<(RegistryState, Recovery), StoreError> {
    let last_seq = parsed.events.last().map_or(0, |e| e.seq);
    let mut recovery = Recovery {
        truncated_bytes: parsed.discarded_len as u64,
        ..Recovery::default()
    };
    let mut state = match load_latest_snapshot(dir, last_seq)? {
        Some(state) => {
            recovery.snapshot_seq = Some(state.last_seq());
            state
        }
        None => RegistryState::new(),
    };
    let from = state.last_seq();
    for ev in parsed.events.iter().filter(|e| e.seq > from) {
        state.apply(ev)?;
        recovery.events_replayed += 1;
    }
    Ok((state, recovery))
}
