//! A minimal FAIR Digital Object manager.
//!
//! Every digital object gets two persistent identifiers: one for its FDO
//! record in the catalog and one for its standalone metadata record. The
//! metadata follows a small Schema.org subset (`CreativeWork`, `Service`,
//! `Person`, `Organization`) and is validated on every write. State is kept
//! in an append-only journal and served over a JSON REST API.

pub mod api;
pub mod catalog;
pub mod cli;
pub mod clock;
pub mod metadata;
pub mod pid;
pub mod registry;
pub mod relations;
pub mod store;

pub use clock::{Clock, ManualClock, SystemClock, Timestamp};
pub use metadata::{MetadataClass, MetadataRecord, Properties, RecordStatus, ValidationReport};
pub use pid::Pid;
pub use registry::{FdoRecord, Registry, RegistryError};
