//! Line-delimited JSON journal: parsing with crash recovery, and replay.

use crate::registry::RegistryState;
use crate::store::{EventKind, JournalEvent, StoreError};

/// Outcome of scanning journal bytes.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedJournal {
    pub events: Vec<JournalEvent>,
    /// Length of the byte prefix holding exactly `events`.
    pub valid_len: usize,
    /// Bytes past `valid_len`: a torn last line or a dangling half-pair.
    pub discarded_len: usize,
}

/// Parses journal bytes.
///
/// A final line without a terminating newline is a torn write and is
/// dropped, as is a trailing metadata event whose closing FDO event never
/// made it to disk. Anything malformed before that is corruption.
pub fn parse_journal(bytes: &[u8]) -> Result<ParsedJournal, StoreError> {
    let mut events: Vec<JournalEvent> = Vec::new();
    // Byte offset at which each event's line starts.
    let mut starts: Vec<usize> = Vec::new();
    let mut offset = 0usize;
    let mut complete_end = 0usize;

    for (idx, raw) in bytes.split_inclusive(|b| *b == b'\n').enumerate() {
        let line_no = idx + 1;
        if raw.last() != Some(&b'\n') {
            break;
        }
        let body = &raw[..raw.len() - 1];
        let event: JournalEvent = serde_json::from_slice(body).map_err(|e| StoreError::CorruptEvent {
            line: line_no,
            offset: offset as u64,
            reason: e.to_string(),
        })?;
        let expected = events.last().map_or(1, |e| e.seq + 1);
        if event.seq != expected {
            return Err(StoreError::CorruptEvent {
                line: line_no,
                offset: offset as u64,
                reason: format!("sequence gap: expected {expected}, found {}", event.seq),
            });
        }
        starts.push(offset);
        events.push(event);
        offset += raw.len();
        complete_end = offset;
    }

    let keep = match check_pairs(&events) {
        Ok(()) => events.len(),
        Err((i, _)) if i + 1 == events.len() && events[i].mutation.opens_pair() => i,
        Err((i, reason)) => {
            return Err(StoreError::CorruptEvent {
                line: i + 1,
                offset: starts[i] as u64,
                reason,
            })
        }
    };

    let valid_len = if keep < events.len() { starts[keep] } else { complete_end };
    events.truncate(keep);
    Ok(ParsedJournal {
        events,
        valid_len,
        discarded_len: bytes.len() - valid_len,
    })
}

/// Checks pair structure: every metadata event must be immediately closed
/// by the FDO event for the same record, and `fdo_created`/`fdo_tombstoned`
/// never appear on their own. Returns the index of the first offending event.
pub fn check_pairs(events: &[JournalEvent]) -> Result<(), (usize, String)> {
    let mut i = 0;
    while i < events.len() {
        let ev = &events[i];
        if ev.mutation.opens_pair() {
            match events.get(i + 1) {
                Some(next) if next.mutation.closes(&ev.mutation) => i += 2,
                Some(next) => {
                    return Err((i + 1, format!("{} does not complete the preceding {}", next.kind(), ev.kind())))
                }
                None => return Err((i, format!("{} is missing its closing FDO event", ev.kind()))),
            }
        } else if matches!(ev.kind(), EventKind::FdoCreated | EventKind::FdoTombstoned) {
            return Err((i, format!("{} without its metadata event", ev.kind())));
        } else {
            i += 1;
        }
    }
    Ok(())
}

/// Folds events into a fresh registry state.
pub fn replay<'a>(events: impl IntoIterator<Item = &'a JournalEvent>) -> Result<RegistryState, StoreError> {
    let mut state = RegistryState::new();
    for ev in events {
        state.apply(ev)?;
    }
    Ok(state)
}
