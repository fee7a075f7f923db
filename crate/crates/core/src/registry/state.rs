//! In-memory registry state: a fold over journal events.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::metadata::{MetadataClass, MetadataRecord, RecordStatus, Resolver};
use crate::pid::Pid;
use crate::registry::records::{builtin_operations, FdoRecord, OperationDescriptor};
use crate::relations::EdgeIndex;
use crate::store::{JournalEvent, Mutation};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("event {seq} cannot be applied: {reason}")]
pub struct ApplyError {
    pub seq: u64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegistryState {
    pub(crate) fdos: BTreeMap<Pid, FdoRecord>,
    pub(crate) metadata: BTreeMap<Pid, MetadataRecord>,
    pub(crate) operations: BTreeMap<String, OperationDescriptor>,
    pub(crate) edges: EdgeIndex,
    pub(crate) last_seq: u64,
}

/// Serializable form of the state; edges are rebuilt on load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateImage {
    pub last_seq: u64,
    pub fdos: Vec<FdoRecord>,
    pub metadata: Vec<MetadataRecord>,
    pub operations: Vec<OperationDescriptor>,
}

impl Default for RegistryState {
    fn default() -> Self {
        Self::new()
    }
}

impl RegistryState {
    /// Empty registries plus the built-in operation descriptors.
    pub fn new() -> Self {
        Self {
            fdos: BTreeMap::new(),
            metadata: BTreeMap::new(),
            operations: builtin_operations()
                .into_iter()
                .map(|d| (d.op_id.clone(), d))
                .collect(),
            edges: EdgeIndex::default(),
            last_seq: 0,
        }
    }

    pub fn last_seq(&self) -> u64 {
        self.last_seq
    }

    pub fn fdo(&self, pid: &Pid) -> Option<&FdoRecord> {
        self.fdos.get(pid)
    }

    pub fn metadata(&self, pid: &Pid) -> Option<&MetadataRecord> {
        self.metadata.get(pid)
    }

    pub fn fdos(&self) -> impl Iterator<Item = &FdoRecord> {
        self.fdos.values()
    }

    pub fn metadata_records(&self) -> impl Iterator<Item = &MetadataRecord> {
        self.metadata.values()
    }

    pub fn operations(&self) -> impl Iterator<Item = &OperationDescriptor> {
        self.operations.values()
    }

    pub fn edges(&self) -> &EdgeIndex {
        &self.edges
    }

    pub fn contains_pid(&self, pid: &Pid) -> bool {
        self.fdos.contains_key(pid) || self.metadata.contains_key(pid)
    }

    pub fn apply(&mut self, event: &JournalEvent) -> Result<(), ApplyError> {
        let fail = |reason: String| ApplyError { seq: event.seq, reason };
        if event.seq != self.last_seq + 1 {
            return Err(fail(format!("expected seq {}", self.last_seq + 1)));
        }
        match &event.mutation {
            Mutation::MetadataCreated(m) => {
                if self.contains_pid(&m.pid) {
                    return Err(fail(format!("{} already stored", m.pid)));
                }
                self.edges.update(m);
                self.metadata.insert(m.pid.clone(), m.clone());
            }
            Mutation::FdoCreated(f) => {
                if self.contains_pid(&f.pid) {
                    return Err(fail(format!("{} already stored", f.pid)));
                }
                self.check_fdo_binding(f).map_err(fail)?;
                self.fdos.insert(f.pid.clone(), f.clone());
            }
            Mutation::MetadataUpdated(m) | Mutation::MetadataTombstoned(m) => {
                let tombstoning = matches!(event.mutation, Mutation::MetadataTombstoned(_));
                let old = self
                    .metadata
                    .get(&m.pid)
                    .ok_or_else(|| fail(format!("{} not in metadata registry", m.pid)))?;
                check_transition(old.status, old.version, old.class, m.status, m.version, m.class, tombstoning)
                    .map_err(fail)?;
                if tombstoning && m.deleted_at.is_none() {
                    return Err(fail("tombstone needs deleted_at".into()));
                }
                self.edges.update(m);
                self.metadata.insert(m.pid.clone(), m.clone());
            }
            Mutation::FdoUpdated(f) | Mutation::FdoTombstoned(f) => {
                let tombstoning = matches!(event.mutation, Mutation::FdoTombstoned(_));
                let old = self
                    .fdos
                    .get(&f.pid)
                    .ok_or_else(|| fail(format!("{} not in FDO registry", f.pid)))?;
                check_transition(old.status, old.version, old.class, f.status, f.version, f.class, tombstoning)
                    .map_err(fail)?;
                if tombstoning && f.deleted_at.is_none() {
                    return Err(fail("tombstone needs deleted_at".into()));
                }
                if old.metadata_pid != f.metadata_pid {
                    return Err(fail("metadata_pid cannot change".into()));
                }
                self.check_fdo_binding(f).map_err(fail)?;
                self.fdos.insert(f.pid.clone(), f.clone());
            }
            Mutation::OpRegistered(d) => {
                if self.operations.contains_key(&d.op_id) {
                    return Err(fail(format!("op_id {} already registered", d.op_id)));
                }
                d.check().map_err(fail)?;
                self.operations.insert(d.op_id.clone(), d.clone());
            }
        }
        self.last_seq = event.seq;
        Ok(())
    }

    fn check_fdo_binding(&self, f: &FdoRecord) -> Result<(), String> {
        if f.pid == f.metadata_pid {
            return Err("pid and metadata_pid must differ".into());
        }
        let meta = self
            .metadata
            .get(&f.metadata_pid)
            .ok_or_else(|| format!("metadata {} not stored", f.metadata_pid))?;
        if meta.class != f.class {
            return Err(format!("class {} does not match metadata class {}", f.class, meta.class));
        }
        Ok(())
    }

    pub fn image(&self) -> StateImage {
        StateImage {
            last_seq: self.last_seq,
            fdos: self.fdos.values().cloned().collect(),
            metadata: self.metadata.values().cloned().collect(),
            operations: self.operations.values().cloned().collect(),
        }
    }

    pub fn from_image(image: StateImage) -> Self {
        let mut edges = EdgeIndex::default();
        for m in &image.metadata {
            edges.update(m);
        }
        Self {
            fdos: image.fdos.into_iter().map(|f| (f.pid.clone(), f)).collect(),
            metadata: image.metadata.into_iter().map(|m| (m.pid.clone(), m)).collect(),
            operations: image.operations.into_iter().map(|d| (d.op_id.clone(), d)).collect(),
            edges,
            last_seq: image.last_seq,
        }
    }

    /// Deterministic serialization used for snapshots and equality checks.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(&self.image()).expect("state image serializes")
    }
}

fn check_transition(
    old_status: RecordStatus,
    old_version: u64,
    old_class: MetadataClass,
    new_status: RecordStatus,
    new_version: u64,
    new_class: MetadataClass,
    tombstoning: bool,
) -> Result<(), String> {
    if old_status != RecordStatus::Active {
        return Err("record is tombstoned".into());
    }
    if new_version != old_version + 1 {
        return Err(format!("version must be {}, got {new_version}", old_version + 1));
    }
    if new_class != old_class {
        return Err("class cannot change".into());
    }
    let expected = if tombstoning {
        RecordStatus::Tombstoned
    } else {
        RecordStatus::Active
    };
    if new_status != expected {
        return Err(format!("status must be {expected:?}"));
    }
    Ok(())
}

impl Resolver for RegistryState {
    fn resolve(&self, pid: &Pid) -> Option<(MetadataClass, RecordStatus)> {
        self.metadata.get(pid).map(|m| (m.class, m.status))
    }
}
