//! Full-state snapshots, `snapshot-<seq>.json`, integrity-checked with SHA-256.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::registry::{RegistryState, StateImage};
use crate::store::StoreError;

const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct SnapshotFile {
    format_version: u32,
    seq: u64,
    checksum: String,
    state: StateImage,
}

fn checksum(image: &StateImage) -> String {
    let bytes = serde_json::to_vec(image).expect("state image serializes");
    format!("sha256:{}", hex::encode(Sha256::digest(&bytes)))
}

pub fn snapshot_path(dir: &Path, seq: u64) -> PathBuf {
    dir.join(format!("snapshot-{seq}.json"))
}

/// Writes a snapshot of `state` atomically (temp file + rename).
pub fn write_snapshot(dir: &Path, state: &RegistryState) -> Result<PathBuf, StoreError> {
    let image = state.image();
    let file = SnapshotFile {
        format_version: FORMAT_VERSION,
        seq: image.last_seq,
        checksum: checksum(&image),
        state: image,
    };
    let path = snapshot_path(dir, file.seq);
    let tmp = dir.join(format!(".snapshot-{}.tmp", file.seq));
    let bytes = serde_json::to_vec(&file)?;
    let mut out = fs::File::create(&tmp).map_err(|e| StoreError::io(&tmp, e))?;
    out.write_all(&bytes).map_err(|e| StoreError::io(&tmp, e))?;
    out.sync_all().map_err(|e| StoreError::io(&tmp, e))?;
    fs::rename(&tmp, &path).map_err(|e| StoreError::io(&path, e))?;
    Ok(path)
}

/// Snapshot files in `dir`, newest first.
pub fn list_snapshots(dir: &Path) -> Result<Vec<(u64, PathBuf)>, StoreError> {
    let mut found = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| StoreError::io(dir, e))? {
        let entry = entry.map_err(|e| StoreError::io(dir, e))?;
        let name = entry.file_name();
        let Some(name) = name.to_str() else { continue };
        let seq = name
            .strip_prefix("snapshot-")
            .and_then(|rest| rest.strip_suffix(".json"))
            .and_then(|n| n.parse::<u64>().ok());
        if let Some(seq) = seq {
            found.push((seq, entry.path()));
        }
    }
    found.sort_by_key(|e| std::cmp::Reverse(e.0));
    Ok(found)
}

/// Reads one snapshot, returning `None` if it is unreadable, fails its
/// checksum, or does not match the sequence number in its name.
pub fn read_snapshot(path: &Path, expected_seq: u64) -> Option<RegistryState> {
    let bytes = fs::read(path).ok()?;
    let file: SnapshotFile = serde_json::from_slice(&bytes).ok()?;
    if file.format_version != FORMAT_VERSION
        || file.seq != expected_seq
        || file.state.last_seq != file.seq
        || checksum(&file.state) != file.checksum
    {
        return None;
    }
    Some(RegistryState::from_image(file.state))
}

/// Newest valid snapshot covering at most `max_seq` events.
pub fn load_latest_snapshot(dir: &Path, max_seq: u64) -> Result<Option<RegistryState>, StoreError> {
    for (seq, path) in list_snapshots(dir)? {
        if seq > max_seq {
            continue;
        }
        if let Some(state) = read_snapshot(&path, seq) {
            return Ok(Some(state));
        }
        tracing::warn!(path = %path.display(), "ignoring invalid snapshot");
    }
    Ok(None)
}
