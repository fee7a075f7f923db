//! Bulk catalog dumps (export/import) and offline validation of metadata
//! bundles.

use std::collections::HashMap;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::metadata::{self, MetadataClass, MetadataRecord, Properties, RecordStatus, ValidationReport, ViolationCode};
use crate::pid::Pid;
use crate::registry::{
    is_builtin_op, validate_checksum, validate_do_ref, FdoRecord, OperationDescriptor, Registry, RegistryError,
    RegistryState,
};
use crate::store::{check_pairs, JournalEvent, Mutation};

pub const DUMP_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CatalogDump {
    pub format_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub events: Option<Vec<JournalEvent>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub records: Option<Vec<RecordEntry>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub operations: Option<Vec<OperationDescriptor>>,
}

/// An FDO record denormalized with its metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecordEntry {
    pub fdo: FdoRecord,
    pub metadata: MetadataRecord,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExportMode {
    #[default]
    Events,
    Records,
}

impl FromStr for ExportMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "events" => Ok(ExportMode::Events),
            "records" => Ok(ExportMode::Records),
            other => Err(format!("unknown export mode {other:?} (expected events or records)")),
        }
    }
}

pub fn export(registry: &Registry, mode: ExportMode) -> Result<CatalogDump, RegistryError> {
    let mut dump = CatalogDump {
        format_version: DUMP_FORMAT_VERSION,
        events: None,
        records: None,
        operations: None,
    };
    match mode {
        ExportMode::Events => dump.events = Some(registry.events()?),
        ExportMode::Records => registry.read(|state| {
            let mut fdos: Vec<&FdoRecord> = state.fdos().collect();
            fdos.sort_by(|a, b| (a.created, &a.pid).cmp(&(b.created, &b.pid)));
            dump.records = Some(
                fdos.into_iter()
                    .map(|fdo| RecordEntry {
                        metadata: state
                            .metadata(&fdo.metadata_pid)
                            .expect("dual-PID binding holds")
                            .clone(),
                        fdo: fdo.clone(),
                    })
                    .collect(),
            );
            dump.operations = Some(
                state
                    .operations()
                    .filter(|d| !is_builtin_op(&d.op_id))
                    .cloned()
                    .collect(),
            );
        }),
    }
    Ok(dump)
}

#[derive(Debug, thiserror::Error)]
pub enum ImportError {
    #[error("unsupported dump format_version {0}")]
    UnsupportedVersion(u32),
    #[error("a dump must carry either events or records, not both or neither")]
    AmbiguousDump,
    #[error("the data directory is not empty; pass --merge to import into it")]
    NotEmpty,
    #[error("entry {index}: {reason}")]
    Rejected { index: usize, reason: String },
    #[error("entry {index} ({pid}): metadata failed validation")]
    Invalid {
        index: usize,
        pid: Pid,
        report: ValidationReport,
    },
    #[error(transparent)]
    Registry(#[from] RegistryError),
}

impl ImportError {
    /// Whether the failure is about the dump's shape rather than its content.
    pub fn is_malformed(&self) -> bool {
        matches!(self, ImportError::UnsupportedVersion(_) | ImportError::AmbiguousDump)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ImportOptions {
    /// Allow importing into a registry that already holds data.
    pub merge: bool,
    /// Skip metadata validation (structural invariants still apply).
    pub raw: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ImportSummary {
    pub events_written: usize,
    pub records: usize,
}

/// Imports a dump. Nothing is written unless the whole dump is accepted.
pub fn import(registry: &Registry, dump: CatalogDump, options: ImportOptions) -> Result<ImportSummary, ImportError> {
    if dump.format_version != DUMP_FORMAT_VERSION {
        return Err(ImportError::UnsupportedVersion(dump.format_version));
    }
    if !options.merge && !registry.is_empty() {
        return Err(ImportError::NotEmpty);
    }
    let mut scratch = registry.snapshot_state();
    let events = match (dump.events, dump.records) {
        (Some(events), None) => plan_events(&mut scratch, events, options.raw)?,
        (None, Some(records)) => plan_records(
            registry,
            &mut scratch,
            records,
            dump.operations.unwrap_or_default(),
            options.raw,
        )?,
        _ => return Err(ImportError::AmbiguousDump),
    };
    let records = events
        .iter()
        .filter(|e| matches!(e.mutation, Mutation::FdoCreated(_)))
        .count();
    registry.append_raw(&events)?;
    Ok(ImportSummary {
        events_written: events.len(),
        records,
    })
}

fn strict_check(state: &RegistryState, mutation: &Mutation) -> Result<(), ImportError> {
    let invalid = |pid: &Pid, report| ImportError::Invalid {
        index: 0,
        pid: pid.clone(),
        report,
    };
    match mutation {
        Mutation::MetadataCreated(m) | Mutation::MetadataUpdated(m) => {
            let report = metadata::validate_class(m.class, &m.properties, state);
            if !report.ok {
                return Err(invalid(&m.pid, report));
            }
        }
        Mutation::FdoCreated(f) | Mutation::FdoUpdated(f) => {
            validate_do_ref(&f.do_ref)?;
            if let Some(sum) = &f.do_checksum {
                validate_checksum(sum)?;
            }
        }
        _ => {}
    }
    if let Mutation::MetadataCreated(MetadataRecord { status, version, .. })
    | Mutation::FdoCreated(FdoRecord { status, version, .. }) = mutation
    {
        if *status != RecordStatus::Active || *version != 1 {
            return Err(ImportError::Rejected {
                index: 0,
                reason: "created records must be active at version 1".into(),
            });
        }
    }
    Ok(())
}

fn at_index(index: usize) -> impl Fn(ImportError) -> ImportError {
    move |err| match err {
        ImportError::Invalid { pid, report, .. } => ImportError::Invalid { index, pid, report },
        ImportError::Rejected { reason, .. } => ImportError::Rejected { index, reason },
        ImportError::Registry(e) => ImportError::Rejected {
            index,
            reason: e.to_string(),
        },
        other => other,
    }
}

fn plan_events(
    scratch: &mut RegistryState,
    events: Vec<JournalEvent>,
    raw: bool,
) -> Result<Vec<JournalEvent>, ImportError> {
    check_pairs(&events).map_err(|(index, reason)| ImportError::Rejected { index, reason })?;
    let base = scratch.last_seq();
    let mut out = Vec::with_capacity(events.len());
    for (i, mut ev) in events.into_iter().enumerate() {
        ev.seq = base + i as u64 + 1;
        if !raw {
            strict_check(scratch, &ev.mutation).map_err(at_index(i))?;
        }
        scratch.apply(&ev).map_err(|e| ImportError::Rejected {
            index: i,
            reason: e.reason,
        })?;
        out.push(ev);
    }
    Ok(out)
}

fn plan_records(
    registry: &Registry,
    scratch: &mut RegistryState,
    mut records: Vec<RecordEntry>,
    operations: Vec<OperationDescriptor>,
    raw: bool,
) -> Result<Vec<JournalEvent>, ImportError> {
    records.sort_by(|a, b| (a.fdo.created, &a.fdo.pid).cmp(&(b.fdo.created, &b.fdo.pid)));
    let in_dump: HashMap<Pid, (MetadataClass, RecordStatus)> = records
        .iter()
        .map(|r| (r.metadata.pid.clone(), (r.metadata.class, r.metadata.status)))
        .collect();

    for (index, entry) in records.iter().enumerate() {
        if entry.fdo.status != entry.metadata.status {
            return Err(ImportError::Rejected {
                index,
                reason: "FDO and metadata status disagree".into(),
            });
        }
        if raw {
            continue;
        }
        let lookup = |pid: &Pid| {
            use crate::metadata::Resolver;
            scratch.resolve(pid).or_else(|| in_dump.get(pid).copied())
        };
        // References may legitimately point at records deleted after they were written.
        let mut report = metadata::validate_class(entry.metadata.class, &entry.metadata.properties, &lookup);
        report.violations.retain(|v| v.code != ViolationCode::TombstonedRef);
        report.ok = report.violations.is_empty();
        if !report.ok {
            return Err(ImportError::Invalid {
                index,
                pid: entry.metadata.pid.clone(),
                report,
            });
        }
        validate_do_ref(&entry.fdo.do_ref).map_err(|e| at_index(index)(e.into()))?;
        if let Some(sum) = &entry.fdo.do_checksum {
            validate_checksum(sum).map_err(|e| at_index(index)(e.into()))?;
        }
    }

    let ts = registry.now();
    let mut seq = scratch.last_seq();
    let mut next = |mutation| {
        seq += 1;
        JournalEvent { seq, ts, mutation }
    };
    let mut out = Vec::with_capacity(records.len() * 2 + operations.len());
    for entry in records {
        out.push(next(Mutation::MetadataCreated(entry.metadata)));
        out.push(next(Mutation::FdoCreated(entry.fdo)));
    }
    for op in operations.into_iter().filter(|d| !is_builtin_op(&d.op_id)) {
        out.push(next(Mutation::OpRegistered(op)));
    }
    for (index, ev) in out.iter().enumerate() {
        scratch.apply(ev).map_err(|e| ImportError::Rejected {
            index: index / 2,
            reason: e.reason,
        })?;
    }
    Ok(out)
}

/// One payload in an offline validation bundle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BundleItem {
    /// Identifier other items may reference; optional for leaf payloads.
    #[serde(default)]
    pub pid: Option<Pid>,
    pub class: String,
    pub properties: Properties,
}

/// A bundle file is either a bare list of items or `{"items": [...]}`.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum Bundle {
    List(Vec<BundleItem>),
    Wrapped { items: Vec<BundleItem> },
}

impl Bundle {
    pub fn into_items(self) -> Vec<BundleItem> {
        match self {
            Bundle::List(items) | Bundle::Wrapped { items } => items,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleReport {
    pub index: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pid: Option<Pid>,
    pub report: ValidationReport,
}

/// Validates every item, resolving references only against items of the
/// same bundle that carry a PID and a known class.
pub fn validate_bundle(items: &[BundleItem]) -> Vec<BundleReport> {
    let table: HashMap<Pid, (MetadataClass, RecordStatus)> = items
        .iter()
        .filter_map(|item| {
            let class = item.class.parse().ok()?;
            Some((item.pid.clone()?, (class, RecordStatus::Active)))
        })
        .collect();
    let lookup = |pid: &Pid| table.get(pid).copied();
    items
        .iter()
        .enumerate()
        .map(|(index, item)| BundleReport {
            index,
            pid: item.pid.clone(),
            report: metadata::validate(&item.class, &item.properties, &lookup),
        })
        .collect()
}
