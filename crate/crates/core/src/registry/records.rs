use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::clock::Timestamp;
use crate::metadata::{MetadataClass, MetadataRecord, RecordStatus};
use crate::pid::Pid;

/// Catalog entry binding a digital-object reference to its metadata PID.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FdoRecord {
    pub pid: Pid,
    pub do_ref: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub do_checksum: Option<String>,
    pub metadata_pid: Pid,
    pub class: MetadataClass,
    pub version: u64,
    pub created: Timestamp,
    pub modified: Timestamp,
    pub status: RecordStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deleted_at: Option<Timestamp>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deletion_reason: Option<String>,
}

impl FdoRecord {
    pub fn is_active(&self) -> bool {
        self.status == RecordStatus::Active
    }

    pub fn tombstone(&self) -> Option<Tombstone> {
        tombstone_of(&self.pid, self.class, self.deleted_at, &self.deletion_reason)
    }
}

impl MetadataRecord {
    pub fn tombstone(&self) -> Option<Tombstone> {
        tombstone_of(&self.pid, self.class, self.deleted_at, &self.deletion_reason)
    }
}

fn tombstone_of(
    pid: &Pid,
    class: MetadataClass,
    deleted_at: Option<Timestamp>,
    reason: &Option<String>,
) -> Option<Tombstone> {
    deleted_at.map(|deleted_at| Tombstone {
        pid: pid.clone(),
        deleted_at,
        reason: reason.clone(),
        former_class: class,
    })
}

/// What a deleted PID resolves to, forever.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tombstone {
    pub pid: Pid,
    pub deleted_at: Timestamp,
    #[serde(default)]
    pub reason: Option<String>,
    pub former_class: MetadataClass,
}

/// A lookup that may land on a tombstone.
#[derive(Debug, Clone, PartialEq)]
pub enum Resolved<T> {
    Active(T),
    Tombstoned(Tombstone),
}

impl<T> Resolved<T> {
    pub fn active(self) -> Option<T> {
        match self {
            Resolved::Active(t) => Some(t),
            Resolved::Tombstoned(_) => None,
        }
    }
}

/// Result of classifying a PID across both registries.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", content = "record", rename_all = "lowercase")]
pub enum Resolution {
    Fdo(FdoRecord),
    Metadata(MetadataRecord),
    Tombstone(Tombstone),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum HttpMethod {
    Get,
    Post,
    Put,
    Delete,
}

impl fmt::Display for HttpMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            HttpMethod::Get => "GET",
            HttpMethod::Post => "POST",
            HttpMethod::Put => "PUT",
            HttpMethod::Delete => "DELETE",
        })
    }
}

/// Operation Registry entry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OperationDescriptor {
    pub op_id: String,
    pub name: String,
    pub http_method: HttpMethod,
    pub path_template: String,
    pub applicable_classes: BTreeSet<MetadataClass>,
    #[serde(default)]
    pub description: String,
}

impl OperationDescriptor {
    /// Checks the descriptor's shape, returning a reason on failure.
    pub fn check(&self) -> Result<(), String> {
        if self.op_id.is_empty()
            || !self
                .op_id
                .bytes()
                .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || matches!(b, b'_' | b'.' | b'-'))
        {
            return Err(format!("op_id {:?} must match [a-z0-9_.-]+", self.op_id));
        }
        if !self.path_template.starts_with('/') {
            return Err("path_template must begin with '/'".into());
        }
        if self.path_template.matches("{pid}").count() != 1 {
            return Err("path_template must contain {pid} exactly once".into());
        }
        if self.applicable_classes.is_empty() {
            return Err("applicable_classes must not be empty".into());
        }
        Ok(())
    }

    pub fn applies_to(&self, class: MetadataClass) -> bool {
        self.applicable_classes.contains(&class)
    }
}

/// Descriptors seeded into every fresh registry.
pub fn builtin_operations() -> Vec<OperationDescriptor> {
    let all: BTreeSet<MetadataClass> = MetadataClass::ALL.into_iter().collect();
    let op = |op_id: &str, name: &str, method, path: &str, description: &str| OperationDescriptor {
        op_id: op_id.into(),
        name: name.into(),
        http_method: method,
        path_template: path.into(),
        applicable_classes: all.clone(),
        description: description.into(),
    };
    vec![
        op("delete", "Delete record", HttpMethod::Delete, "/fdos/{pid}", "Tombstone the record and its metadata"),
        op("get", "Get record", HttpMethod::Get, "/fdos/{pid}", "Retrieve the FDO record"),
        op("metadata", "Get metadata", HttpMethod::Get, "/fdos/{pid}/metadata", "Retrieve the record's metadata"),
        op("update", "Update record", HttpMethod::Put, "/fdos/{pid}", "Replace the record's metadata or DO reference"),
    ]
}

pub fn is_builtin_op(op_id: &str) -> bool {
    matches!(op_id, "delete" | "get" | "metadata" | "update")
}
