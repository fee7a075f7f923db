use std::fmt;

use serde::ser::SerializeStruct;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::Value;

use crate::clock::Timestamp;
use crate::metadata::MetadataRecord;
use crate::pid::Pid;
use crate::registry::{FdoRecord, OperationDescriptor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    FdoCreated,
    MetadataCreated,
    FdoUpdated,
    MetadataUpdated,
    FdoTombstoned,
    MetadataTombstoned,
    OpRegistered,
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EventKind::FdoCreated => "fdo_created",
            EventKind::MetadataCreated => "metadata_created",
            EventKind::FdoUpdated => "fdo_updated",
            EventKind::MetadataUpdated => "metadata_updated",
            EventKind::FdoTombstoned => "fdo_tombstoned",
            EventKind::MetadataTombstoned => "metadata_tombstoned",
            EventKind::OpRegistered => "op_registered",
        })
    }
}

/// A registry mutation carrying the full post-mutation record.
#[derive(Debug, Clone, PartialEq)]
pub enum Mutation {
    FdoCreated(FdoRecord),
    MetadataCreated(MetadataRecord),
    FdoUpdated(FdoRecord),
    MetadataUpdated(MetadataRecord),
    FdoTombstoned(FdoRecord),
    MetadataTombstoned(MetadataRecord),
    OpRegistered(OperationDescriptor),
}

impl Mutation {
    pub fn kind(&self) -> EventKind {
        match self {
            Mutation::FdoCreated(_) => EventKind::FdoCreated,
            Mutation::MetadataCreated(_) => EventKind::MetadataCreated,
            Mutation::FdoUpdated(_) => EventKind::FdoUpdated,
            Mutation::MetadataUpdated(_) => EventKind::MetadataUpdated,
            Mutation::FdoTombstoned(_) => EventKind::FdoTombstoned,
            Mutation::MetadataTombstoned(_) => EventKind::MetadataTombstoned,
            Mutation::OpRegistered(_) => EventKind::OpRegistered,
        }
    }

    /// Metadata events open a pair that the matching FDO event closes.
    pub fn opens_pair(&self) -> bool {
        matches!(
            self,
            Mutation::MetadataCreated(_) | Mutation::MetadataUpdated(_) | Mutation::MetadataTombstoned(_)
        )
    }

    /// Whether `self` is the FDO event that completes the pair opened by `opener`.
    pub fn closes(&self, opener: &Mutation) -> bool {
        let (fdo, meta): (&FdoRecord, &Pid) = match (opener, self) {
            (Mutation::MetadataCreated(m), Mutation::FdoCreated(f))
            | (Mutation::MetadataUpdated(m), Mutation::FdoUpdated(f))
            | (Mutation::MetadataTombstoned(m), Mutation::FdoTombstoned(f)) => (f, &m.pid),
            _ => return false,
        };
        &fdo.metadata_pid == meta
    }

    fn payload(&self) -> Result<Value, serde_json::Error> {
        match self {
            Mutation::FdoCreated(r) | Mutation::FdoUpdated(r) | Mutation::FdoTombstoned(r) => {
                serde_json::to_value(r)
            }
            Mutation::MetadataCreated(r) | Mutation::MetadataUpdated(r) | Mutation::MetadataTombstoned(r) => {
                serde_json::to_value(r)
            }
            Mutation::OpRegistered(d) => serde_json::to_value(d),
        }
    }

    fn from_parts(kind: EventKind, payload: Value) -> Result<Self, serde_json::Error> {
        use serde_json::from_value;
        Ok(match kind {
            EventKind::FdoCreated => Mutation::FdoCreated(from_value(payload)?),
            EventKind::MetadataCreated => Mutation::MetadataCreated(from_value(payload)?),
            EventKind::FdoUpdated => Mutation::FdoUpdated(from_value(payload)?),
            EventKind::MetadataUpdated => Mutation::MetadataUpdated(from_value(payload)?),
            EventKind::FdoTombstoned => Mutation::FdoTombstoned(from_value(payload)?),
            EventKind::MetadataTombstoned => Mutation::MetadataTombstoned(from_value(payload)?),
            EventKind::OpRegistered => Mutation::OpRegistered(from_value(payload)?),
        })
    }
}

/// One journal line: `{"seq":N,"ts":"...","kind":"...","payload":{...}}`.
#[derive(Debug, Clone, PartialEq)]
pub struct JournalEvent {
    pub seq: u64,
    pub ts: Timestamp,
    pub mutation: Mutation,
}

impl JournalEvent {
    pub fn kind(&self) -> EventKind {
        self.mutation.kind()
    }

    /// Serialized line including the trailing newline.
    pub fn to_line(&self) -> Result<String, serde_json::Error> {
        let mut line = serde_json::to_string(self)?;
        line.push('\n');
        Ok(line)
    }
}

impl Serialize for JournalEvent {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let payload = self.mutation.payload().map_err(serde::ser::Error::custom)?;
        let mut s = serializer.serialize_struct("JournalEvent", 4)?;
        s.serialize_field("seq", &self.seq)?;
        s.serialize_field("ts", &self.ts)?;
        s.serialize_field("kind", &self.kind())?;
        s.serialize_field("payload", &payload)?;
        s.end()
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEvent {
    seq: u64,
    ts: Timestamp,
    kind: EventKind,
    payload: Value,
}

impl<'de> Deserialize<'de> for JournalEvent {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = RawEvent::deserialize(deserializer)?;
        let mutation = Mutation::from_parts(raw.kind, raw.payload).map_err(serde::de::Error::custom)?;
        Ok(JournalEvent {
            seq: raw.seq,
            ts: raw.ts,
            mutation,
        })
    }
}
