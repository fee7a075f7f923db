//! FDO Registry (catalog), Metadata Registry and Operation Registry.
//!
//! All mutations funnel through one writer lock: the writer validates
//! against the current state, journals the resulting events, and only then
//! publishes them to readers. Paired events (metadata + FDO) are applied
//! under a single state write lock, so readers never see half of a pair.

mod records;
mod state;

use std::path::Path;
use std::sync::Arc;

use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};

pub use records::{
    builtin_operations, is_builtin_op, FdoRecord, HttpMethod, OperationDescriptor, Resolution, Resolved, Tombstone,
};
pub use state::{ApplyError, RegistryState, StateImage};

use crate::clock::{Clock, SystemClock, Timestamp};
use crate::metadata::{
    self, MetadataClass, MetadataRecord, Properties, RecordStatus, SchemaOrgContext, ValidationReport,
};
use crate::pid::{self, Pid, PidError};
use crate::relations::{ClosureEntry, Direction, Edge, EdgeLabel};
use crate::store::{JournalEvent, Mutation, Recovery, Store, StoreError, StoreOptions};

pub const MAX_PAGE_LIMIT: usize = 500;

#[derive(Debug, thiserror::Error)]
pub enum RegistryError {
    #[error("{0} not found")]
    NotFound(Pid),
    #[error("{} has been deleted", .0.pid)]
    Gone(Tombstone),
    #[error("version conflict: expected {expected}, current {current}")]
    VersionConflict { expected: u64, current: u64 },
    #[error("metadata failed validation")]
    ValidationFailed(ValidationReport),
    #[error("invalid digital object reference {0:?}")]
    InvalidDoRef(String),
    #[error("invalid checksum {0:?}: expected sha256: followed by 64 lowercase hex digits")]
    InvalidChecksum(String),
    #[error("class cannot change from {from} to {to}")]
    ClassChangeForbidden { from: MetadataClass, to: String },
    #[error("freshly minted PID collided with a stored one")]
    DuplicatePid,
    #[error("operation {0:?} is already registered")]
    DuplicateOpId(String),
    #[error("invalid operation descriptor: {0}")]
    InvalidDescriptor(String),
    #[error("invalid page: {0}")]
    InvalidPage(String),
    #[error("{0} is not a CreativeWork")]
    NotACreativeWork(Pid),
    #[error("max_depth must be at least 1")]
    InvalidDepth,
    #[error(transparent)]
    Pid(#[from] PidError),
    #[error(transparent)]
    Storage(#[from] StoreError),
}

impl RegistryError {
    /// Stable symbolic code, shared by the HTTP and C interfaces.
    pub fn code(&self) -> &'static str {
        match self {
            RegistryError::NotFound(_) => "NOT_FOUND",
            RegistryError::Gone(_) => "GONE",
            RegistryError::VersionConflict { .. } => "VERSION_CONFLICT",
            RegistryError::ValidationFailed(_) => "VALIDATION_FAILED",
            RegistryError::InvalidDoRef(_) => "INVALID_DO_REF",
            RegistryError::InvalidChecksum(_) => "INVALID_CHECKSUM",
            RegistryError::ClassChangeForbidden { .. } => "CLASS_CHANGE_FORBIDDEN",
            RegistryError::DuplicatePid => "DUPLICATE_PID",
            RegistryError::DuplicateOpId(_) => "DUPLICATE_OP_ID",
            RegistryError::InvalidDescriptor(_) => "INVALID_DESCRIPTOR",
            RegistryError::InvalidPage(_) => "INVALID_PAGE",
            RegistryError::NotACreativeWork(_) => "NOT_A_CREATIVE_WORK",
            RegistryError::InvalidDepth => "INVALID_QUERY",
            RegistryError::Pid(PidError::InvalidPrefix(_)) => "INVALID_PREFIX",
            RegistryError::Pid(PidError::MalformedPid(_)) => "MALFORMED_PID",
            RegistryError::Storage(StoreError::StorageFull(_)) => "STORAGE_FULL",
            RegistryError::Storage(_) => "STORAGE_ERROR",
        }
    }

    /// Structured details carried alongside the message, if any.
    pub fn details(&self) -> Option<serde_json::Value> {
        match self {
            RegistryError::ValidationFailed(report) => serde_json::to_value(report).ok(),
            RegistryError::Gone(tombstone) => serde_json::to_value(tombstone).ok(),
            RegistryError::VersionConflict { expected, current } => {
                Some(serde_json::json!({"expected": expected, "current": current}))
            }
            _ => None,
        }
    }
}

pub type Result<T, E = RegistryError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateFdo {
    pub do_ref: String,
    #[serde(default)]
    pub do_checksum: Option<String>,
    pub class: String,
    pub properties: Properties,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UpdateFdo {
    #[serde(default)]
    pub do_ref: Option<String>,
    #[serde(default)]
    pub do_checksum: Option<String>,
    #[serde(default)]
    pub class: Option<String>,
    #[serde(default)]
    pub properties: Option<Properties>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ListFilter {
    #[serde(default)]
    pub class: Option<MetadataClass>,
    #[serde(default)]
    pub include_tombstoned: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Page {
    #[serde(default)]
    pub offset: usize,
    #[serde(default = "Page::default_limit")]
    pub limit: usize,
}

impl Page {
    fn default_limit() -> usize {
        100
    }

    pub fn new(offset: usize, limit: usize) -> Self {
        Self { offset, limit }
    }
}

impl Default for Page {
    fn default() -> Self {
        Self {
            offset: 0,
            limit: Self::default_limit(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Listing {
    pub total: usize,
    pub items: Vec<FdoRecord>,
}

/// Outcome of a delete: the tombstone, and whether it already existed.
#[derive(Debug, Clone, PartialEq)]
pub struct Deletion {
    pub tombstone: Tombstone,
    pub already_deleted: bool,
}

enum Sink {
    Memory(Vec<JournalEvent>),
    Disk(Store),
}

pub struct Registry {
    prefix: String,
    clock: Arc<dyn Clock>,
    state: RwLock<RegistryState>,
    writer: Mutex<Sink>,
}

impl std::fmt::Debug for Registry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Registry")
            .field("prefix", &self.prefix)
            .field("last_seq", &self.journal_len())
            .finish_non_exhaustive()
    }
}

pub fn validate_do_ref(do_ref: &str) -> Result<()> {
    url::Url::parse(do_ref)
        .map(|_| ())
        .map_err(|_| RegistryError::InvalidDoRef(do_ref.to_owned()))
}

pub fn validate_checksum(sum: &str) -> Result<()> {
    let ok = sum
        .strip_prefix("sha256:")
        .is_some_and(|h| h.len() == 64 && h.bytes().all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b)));
    if ok {
        Ok(())
    } else {
        Err(RegistryError::InvalidChecksum(sum.to_owned()))
    }
}

impl Registry {
    /// A registry whose journal lives only in memory.
    pub fn in_memory(prefix: &str, clock: Arc<dyn Clock>) -> Result<Self> {
        pid::validate_prefix(prefix)?;
        Ok(Self {
            prefix: prefix.to_owned(),
            clock,
            state: RwLock::new(RegistryState::new()),
            writer: Mutex::new(Sink::Memory(Vec::new())),
        })
    }

    /// Opens a registry backed by a data directory.
    pub fn open(dir: &Path, prefix: &str, clock: Arc<dyn Clock>) -> Result<(Self, Recovery)> {
        Self::open_with(dir, prefix, clock, StoreOptions::default())
    }

    pub fn open_with(
        dir: &Path,
        prefix: &str,
        clock: Arc<dyn Clock>,
        options: StoreOptions,
    ) -> Result<(Self, Recovery)> {
        pid::validate_prefix(prefix)?;
        let (store, state, recovery) = Store::open(dir, options)?;
        Ok((
            Self {
                prefix: prefix.to_owned(),
                clock,
                state: RwLock::new(state),
                writer: Mutex::new(Sink::Disk(store)),
            },
            recovery,
        ))
    }

    /// In-memory registry with the default prefix and the system clock.
    pub fn ephemeral() -> Self {
        Self::in_memory(pid::DEFAULT_PREFIX, Arc::new(SystemClock)).expect("default prefix is valid")
    }

    pub fn prefix(&self) -> &str {
        &self.prefix
    }

    /// Number of events journaled so far.
    pub fn journal_len(&self) -> u64 {
        self.state.read().last_seq()
    }

    /// True when nothing has ever been journaled.
    pub fn is_empty(&self) -> bool {
        self.journal_len() == 0
    }

    /// Runs `f` against a consistent view of the state.
    pub fn read<T>(&self, f: impl FnOnce(&RegistryState) -> T) -> T {
        f(&self.state.read())
    }

    pub fn snapshot_state(&self) -> RegistryState {
        self.state.read().clone()
    }

    /// Every journaled event, oldest first.
    pub fn events(&self) -> Result<Vec<JournalEvent>> {
        match &*self.writer.lock() {
            Sink::Memory(events) => Ok(events.clone()),
            Sink::Disk(store) => Ok(store.read_events()?),
        }
    }

    /// Writes a snapshot to the data directory. In-memory registries have
    /// nowhere to write one and return `Ok(None)`.
    pub fn write_snapshot(&self) -> Result<Option<std::path::PathBuf>> {
        let sink = self.writer.lock();
        match &*sink {
            Sink::Memory(_) => Ok(None),
            Sink::Disk(store) => Ok(Some(store.snapshot(&self.state.read())?)),
        }
    }

    fn commit(&self, sink: &mut Sink, mutations: Vec<Mutation>, ts: Timestamp) -> Result<Vec<JournalEvent>> {
        let first = self.state.read().last_seq() + 1;
        let events: Vec<JournalEvent> = mutations
            .into_iter()
            .enumerate()
            .map(|(i, mutation)| JournalEvent {
                seq: first + i as u64,
                ts,
                mutation,
            })
            .collect();
        write_sink(sink, &events)?;
        let mut state = self.state.write();
        for ev in &events {
            state
                .apply(ev)
                .expect("events built under the writer lock apply cleanly");
        }
        Ok(events)
    }

    /// Appends already-sequenced events (import path), numbered from the
    /// current journal length + 1. The whole batch is checked against a
    /// scratch copy of the state first, so a bad batch never reaches the
    /// journal.
    pub(crate) fn append_raw(&self, events: &[JournalEvent]) -> Result<()> {
        let mut sink = self.writer.lock();
        let mut next = self.state.read().clone();
        for ev in events {
            next.apply(ev).map_err(StoreError::from)?;
        }
        write_sink(&mut sink, events)?;
        *self.state.write() = next;
        Ok(())
    }

    fn mint_pair(&self, state: &RegistryState) -> Result<(Pid, Pid)> {
        for _ in 0..2 {
            let fdo = Pid::mint(&self.prefix)?;
            let meta = Pid::mint(&self.prefix)?;
            if fdo != meta && !state.contains_pid(&fdo) && !state.contains_pid(&meta) {
                return Ok((fdo, meta));
            }
        }
        Err(RegistryError::DuplicatePid)
    }

    pub fn create_fdo(&self, req: CreateFdo) -> Result<(FdoRecord, MetadataRecord)> {
        let mut sink = self.writer.lock();
        validate_do_ref(&req.do_ref)?;
        if let Some(sum) = &req.do_checksum {
            validate_checksum(sum)?;
        }
        let (class, fdo_pid, meta_pid) = {
            let state = self.state.read();
            let report = metadata::validate(&req.class, &req.properties, &*state);
            if !report.ok {
                return Err(RegistryError::ValidationFailed(report));
            }
            let class: MetadataClass = req.class.parse().expect("validated class");
            let (fdo_pid, meta_pid) = self.mint_pair(&state)?;
            (class, fdo_pid, meta_pid)
        };
        let now = self.clock.now();
        let meta = MetadataRecord {
            context: SchemaOrgContext,
            pid: meta_pid.clone(),
            class,
            properties: req.properties,
            version: 1,
            created: now,
            modified: now,
            status: RecordStatus::Active,
            deleted_at: None,
            deletion_reason: None,
        };
        let fdo = FdoRecord {
            pid: fdo_pid,
            do_ref: req.do_ref,
            do_checksum: req.do_checksum,
            metadata_pid: meta_pid,
            class,
            version: 1,
            created: now,
            modified: now,
            status: RecordStatus::Active,
            deleted_at: None,
            deletion_reason: None,
        };
        self.commit(
            &mut sink,
            vec![Mutation::MetadataCreated(meta.clone()), Mutation::FdoCreated(fdo.clone())],
            now,
        )?;
        Ok((fdo, meta))
    }

    pub fn get_fdo(&self, pid: &Pid) -> Result<Resolved<FdoRecord>> {
        let state = self.state.read();
        let rec = state.fdo(pid).ok_or_else(|| RegistryError::NotFound(pid.clone()))?;
        Ok(match rec.tombstone() {
            Some(t) => Resolved::Tombstoned(t),
            None => Resolved::Active(rec.clone()),
        })
    }

    pub fn get_metadata(&self, pid: &Pid) -> Result<Resolved<MetadataRecord>> {
        let state = self.state.read();
        let rec = state
            .metadata(pid)
            .ok_or_else(|| RegistryError::NotFound(pid.clone()))?;
        Ok(match rec.tombstone() {
            Some(t) => Resolved::Tombstoned(t),
            None => Resolved::Active(rec.clone()),
        })
    }

    /// The active FDO record together with its metadata.
    pub fn get_fdo_with_metadata(&self, pid: &Pid) -> Result<(FdoRecord, MetadataRecord)> {
        let state = self.state.read();
        let rec = active_fdo(&state, pid)?;
        let meta = state
            .metadata(&rec.metadata_pid)
            .expect("dual-PID binding holds")
            .clone();
        Ok((rec.clone(), meta))
    }

    pub fn update_fdo(&self, pid: &Pid, expected_version: u64, req: UpdateFdo) -> Result<(FdoRecord, MetadataRecord)> {
        let mut sink = self.writer.lock();
        let (old, old_meta) = {
            let state = self.state.read();
            let rec = active_fdo(&state, pid)?;
            if rec.version != expected_version {
                return Err(RegistryError::VersionConflict {
                    expected: expected_version,
                    current: rec.version,
                });
            }
            if let Some(class) = &req.class {
                if class != rec.class.as_str() {
                    return Err(RegistryError::ClassChangeForbidden {
                        from: rec.class,
                        to: class.clone(),
                    });
                }
            }
            if let Some(props) = &req.properties {
                let report = metadata::validate_class(rec.class, props, &*state);
                if !report.ok {
                    return Err(RegistryError::ValidationFailed(report));
                }
            }
            let meta = state.metadata(&rec.metadata_pid).expect("dual-PID binding holds").clone();
            (rec.clone(), meta)
        };
        if let Some(do_ref) = &req.do_ref {
            validate_do_ref(do_ref)?;
        }
        if let Some(sum) = &req.do_checksum {
            validate_checksum(sum)?;
        }

        let now = self.clock.now();
        let mut mutations = Vec::with_capacity(2);
        let mut meta = old_meta;
        if let Some(props) = req.properties {
            meta.properties = props;
            meta.version += 1;
            meta.modified = now;
            mutations.push(Mutation::MetadataUpdated(meta.clone()));
        }
        let mut fdo = old;
        if let Some(do_ref) = req.do_ref {
            // A new reference invalidates a checksum computed for the old bytes.
            fdo.do_checksum = None;
            fdo.do_ref = do_ref;
        }
        if req.do_checksum.is_some() {
            fdo.do_checksum = req.do_checksum;
        }
        fdo.version += 1;
        fdo.modified = now;
        mutations.push(Mutation::FdoUpdated(fdo.clone()));
        self.commit(&mut sink, mutations, now)?;
        Ok((fdo, meta))
    }

    pub fn delete_fdo(&self, pid: &Pid, reason: Option<String>) -> Result<Deletion> {
        let mut sink = self.writer.lock();
        let (mut fdo, mut meta) = {
            let state = self.state.read();
            let rec = state.fdo(pid).ok_or_else(|| RegistryError::NotFound(pid.clone()))?;
            if let Some(tombstone) = rec.tombstone() {
                return Ok(Deletion {
                    tombstone,
                    already_deleted: true,
                });
            }
            let meta = state.metadata(&rec.metadata_pid).expect("dual-PID binding holds");
            (rec.clone(), meta.clone())
        };
        let now = self.clock.now();
        for (status, version, modified, deleted_at, deletion_reason) in [
            (&mut meta.status, &mut meta.version, &mut meta.modified, &mut meta.deleted_at, &mut meta.deletion_reason),
            (&mut fdo.status, &mut fdo.version, &mut fdo.modified, &mut fdo.deleted_at, &mut fdo.deletion_reason),
        ] {
            *status = RecordStatus::Tombstoned;
            *version += 1;
            *modified = now;
            *deleted_at = Some(now);
            *deletion_reason = reason.clone();
        }
        self.commit(
            &mut sink,
            vec![Mutation::MetadataTombstoned(meta), Mutation::FdoTombstoned(fdo.clone())],
            now,
        )?;
        Ok(Deletion {
            tombstone: fdo.tombstone().expect("just tombstoned"),
            already_deleted: false,
        })
    }

    pub fn list_fdos(&self, filter: ListFilter, page: Page) -> Result<Listing> {
        if page.limit == 0 || page.limit > MAX_PAGE_LIMIT {
            return Err(RegistryError::InvalidPage(format!(
                "limit must be within 1..={MAX_PAGE_LIMIT}, got {}",
                page.limit
            )));
        }
        let state = self.state.read();
        let mut matches: Vec<&FdoRecord> = state
            .fdos()
            .filter(|r| filter.include_tombstoned || r.is_active())
            .filter(|r| filter.class.is_none_or(|c| r.class == c))
            .collect();
        matches.sort_by(|a, b| (a.created, &a.pid).cmp(&(b.created, &b.pid)));
        Ok(Listing {
            total: matches.len(),
            items: matches
                .into_iter()
                .skip(page.offset)
                .take(page.limit)
                .cloned()
                .collect(),
        })
    }

    pub fn register_operation(&self, descriptor: OperationDescriptor) -> Result<OperationDescriptor> {
        let mut sink = self.writer.lock();
        if self.state.read().operations.contains_key(&descriptor.op_id) {
            return Err(RegistryError::DuplicateOpId(descriptor.op_id));
        }
        descriptor.check().map_err(RegistryError::InvalidDescriptor)?;
        let now = self.clock.now();
        self.commit(&mut sink, vec![Mutation::OpRegistered(descriptor.clone())], now)?;
        Ok(descriptor)
    }

    pub fn list_operations(&self) -> Vec<OperationDescriptor> {
        self.state.read().operations().cloned().collect()
    }

    /// Descriptors applicable to an active record's class, sorted by op_id.
    pub fn operations_for(&self, pid: &Pid) -> Result<Vec<OperationDescriptor>> {
        let state = self.state.read();
        let class = active_fdo(&state, pid)?.class;
        Ok(state.operations().filter(|d| d.applies_to(class)).cloned().collect())
    }

    pub fn resolve_any(&self, pid: &Pid) -> Result<Resolution> {
        let state = self.state.read();
        if let Some(f) = state.fdo(pid) {
            return Ok(match f.tombstone() {
                Some(t) => Resolution::Tombstone(t),
                None => Resolution::Fdo(f.clone()),
            });
        }
        if let Some(m) = state.metadata(pid) {
            return Ok(match m.tombstone() {
                Some(t) => Resolution::Tombstone(t),
                None => Resolution::Metadata(m.clone()),
            });
        }
        Err(RegistryError::NotFound(pid.clone()))
    }

    /// Metadata PID bound to an FDO record, whether active or tombstoned.
    pub fn metadata_pid_for(&self, pid: &Pid) -> Result<Pid> {
        self.state
            .read()
            .fdo(pid)
            .map(|r| r.metadata_pid.clone())
            .ok_or_else(|| RegistryError::NotFound(pid.clone()))
    }

    pub(crate) fn now(&self) -> Timestamp {
        self.clock.now()
    }

    /// Dry-run validation against the current Metadata Registry.
    pub fn validate(&self, class: &str, properties: &Properties) -> ValidationReport {
        metadata::validate(class, properties, &*self.state.read())
    }

    /// Status of a metadata record, if stored.
    pub fn metadata_status(&self, pid: &Pid) -> Option<RecordStatus> {
        self.state.read().metadata(pid).map(|m| m.status)
    }

    pub fn edges_from(&self, pid: &Pid, label: Option<EdgeLabel>) -> Result<Vec<Edge>> {
        let state = self.state.read();
        require_metadata(&state, pid)?;
        Ok(state.edges().edges_from(pid, label))
    }

    pub fn edges_to(&self, pid: &Pid, label: Option<EdgeLabel>) -> Result<Vec<Edge>> {
        let state = self.state.read();
        require_metadata(&state, pid)?;
        Ok(state.edges().edges_to(pid, label))
    }

    pub fn citation_closure(&self, pid: &Pid, direction: Direction, max_depth: u32) -> Result<Vec<ClosureEntry>> {
        let state = self.state.read();
        let rec = require_metadata(&state, pid)?;
        if rec.class != MetadataClass::CreativeWork {
            return Err(RegistryError::NotACreativeWork(pid.clone()));
        }
        if max_depth == 0 {
            return Err(RegistryError::InvalidDepth);
        }
        Ok(state.edges().citation_closure(pid, direction, max_depth))
    }
}

fn write_sink(sink: &mut Sink, events: &[JournalEvent]) -> Result<()> {
    match sink {
        Sink::Memory(log) => log.extend_from_slice(events),
        Sink::Disk(store) => {
            store.append(events)?;
        }
    }
    Ok(())
}

fn active_fdo<'a>(state: &'a RegistryState, pid: &Pid) -> Result<&'a FdoRecord> {
    let rec = state.fdo(pid).ok_or_else(|| RegistryError::NotFound(pid.clone()))?;
    match rec.tombstone() {
        Some(t) => Err(RegistryError::Gone(t)),
        None => Ok(rec),
    }
}

fn require_metadata<'a>(state: &'a RegistryState, pid: &Pid) -> Result<&'a MetadataRecord> {
    state.metadata(pid).ok_or_else(|| RegistryError::NotFound(pid.clone()))
}
