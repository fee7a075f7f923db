//! C ABI for the FAIR Digital Object manager.
//!
//! Every call returns an [`FdomStatus`]. Results come back as JSON in a
//! string the caller owns and releases with [`fdom_string_free`]. After a
//! failure, [`fdom_last_error`] returns `{"code", "message", "details"}`
//! for the calling thread.
//!
//! A registry handle is safe to share between threads.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;
use std::sync::Arc;

use fdom_core::api::FdoView;
use fdom_core::clock::SystemClock;
use fdom_core::metadata::{class_schema_by_name, Properties, UnknownClass};
use fdom_core::pid::{Pid, PidError, DEFAULT_PREFIX};
use fdom_core::registry::{
    CreateFdo, ListFilter, OperationDescriptor, Page, Registry, RegistryError, Resolved, UpdateFdo,
};
use fdom_core::relations::{Direction, EdgeLabel};
use fdom_core::store::StoreError;
use serde::Serialize;
use serde_json::{json, Value};

/// Opaque registry handle.
pub struct FdomRegistry {
    inner: Registry,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FdomStatus {
    Ok = 0,
    NotFound = 1,
    Gone = 2,
    VersionConflict = 3,
    ValidationFailed = 4,
    InvalidDoRef = 5,
    InvalidChecksum = 6,
    ClassChangeForbidden = 7,
    DuplicateOpId = 8,
    InvalidDescriptor = 9,
    InvalidQuery = 10,
    NotACreativeWork = 11,
    InvalidPid = 12,
    UnknownClass = 13,
    StorageFull = 14,
    StorageError = 15,
    Locked = 16,
    NullArgument = 17,
    InvalidUtf8 = 18,
    MalformedJson = 19,
    Internal = 20,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FdomDirection {
    Outbound = 0,
    Inbound = 1,
}

impl From<FdomDirection> for Direction {
    fn from(d: FdomDirection) -> Self {
        match d {
            FdomDirection::Outbound => Direction::Outbound,
            FdomDirection::Inbound => Direction::Inbound,
        }
    }
}

struct Error {
    status: FdomStatus,
    code: &'static str,
    message: String,
    details: Option<Value>,
}

impl Error {
    fn new(status: FdomStatus, code: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            code,
            message: message.into(),
            details: None,
        }
    }
}

impl From<RegistryError> for Error {
    fn from(e: RegistryError) -> Self {
        let status = match &e {
            RegistryError::NotFound(_) => FdomStatus::NotFound,
            RegistryError::Gone(_) => FdomStatus::Gone,
            RegistryError::VersionConflict { .. } => FdomStatus::VersionConflict,
            RegistryError::ValidationFailed(_) => FdomStatus::ValidationFailed,
            RegistryError::InvalidDoRef(_) => FdomStatus::InvalidDoRef,
            RegistryError::InvalidChecksum(_) => FdomStatus::InvalidChecksum,
            RegistryError::ClassChangeForbidden { .. } => FdomStatus::ClassChangeForbidden,
            RegistryError::DuplicateOpId(_) => FdomStatus::DuplicateOpId,
            RegistryError::InvalidDescriptor(_) => FdomStatus::InvalidDescriptor,
            RegistryError::InvalidPage(_) | RegistryError::InvalidDepth => FdomStatus::InvalidQuery,
            RegistryError::NotACreativeWork(_) => FdomStatus::NotACreativeWork,
            RegistryError::Pid(_) => FdomStatus::InvalidPid,
            RegistryError::Storage(StoreError::StorageFull(_)) => FdomStatus::StorageFull,
            RegistryError::Storage(StoreError::Locked(_)) => FdomStatus::Locked,
            RegistryError::Storage(_) | RegistryError::DuplicatePid => FdomStatus::StorageError,
        };
        Self {
            status,
            code: e.code(),
            message: e.to_string(),
            details: e.details(),
        }
    }
}

impl From<PidError> for Error {
    fn from(e: PidError) -> Self {
        RegistryError::from(e).into()
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<Value>> = const { RefCell::new(None) };
}

fn set_last_error(e: &Error) {
    let body = json!({"code": e.code, "message": e.message, "details": e.details});
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(body));
}

fn to_c_string(s: String) -> *mut c_char {
    // JSON and PIDs never contain NUL; escape defensively anyway.
    CString::new(s.replace('\0', "\\u0000")).expect("NUL removed").into_raw()
}

/// Runs `f`, storing its JSON result in `out` or recording the error.
fn guard<T: Serialize>(out: *mut *mut c_char, f: impl FnOnce() -> Result<T, Error>) -> FdomStatus {
    run(|| {
        if out.is_null() {
            return Err(Error::new(FdomStatus::NullArgument, "NULL_ARGUMENT", "out pointer is null"));
        }
        let value = f()?;
        let text = serde_json::to_string(&value).map_err(|e| Error::new(FdomStatus::Internal, "INTERNAL", e.to_string()))?;
        // SAFETY: checked non-null above; the caller guarantees it is writable.
        unsafe { *out = to_c_string(text) };
        Ok(())
    })
}

fn run(f: impl FnOnce() -> Result<(), Error>) -> FdomStatus {
    let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| {
        Err(Error::new(FdomStatus::Internal, "INTERNAL", "panic inside fdom"))
    });
    match outcome {
        Ok(()) => {
            LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
            FdomStatus::Ok
        }
        Err(e) => {
            set_last_error(&e);
            e.status
        }
    }
}

/// # Safety
/// `p` must be null or a valid NUL-terminated string.
unsafe fn opt_str<'a>(p: *const c_char) -> Result<Option<&'a str>, Error> {
    if p.is_null() {
        return Ok(None);
    }
    // SAFETY: per the function contract.
    unsafe { CStr::from_ptr(p) }
        .to_str()
        .map(Some)
        .map_err(|_| Error::new(FdomStatus::InvalidUtf8, "INVALID_UTF8", "argument is not valid UTF-8"))
}

/// # Safety
/// `p` must be null or a valid NUL-terminated string.
unsafe fn req_str<'a>(p: *const c_char, name: &str) -> Result<&'a str, Error> {
    // SAFETY: per the function contract.
    unsafe { opt_str(p) }?
        .ok_or_else(|| Error::new(FdomStatus::NullArgument, "NULL_ARGUMENT", format!("{name} is null")))
}

/// # Safety
/// `p` must be null or a valid NUL-terminated string.
unsafe fn req_json<'a, T: serde::Deserialize<'a>>(p: *const c_char, name: &str) -> Result<T, Error> {
    // SAFETY: per the function contract.
    let text = unsafe { req_str(p, name) }?;
    serde_json::from_str(text).map_err(|e| Error::new(FdomStatus::MalformedJson, "MALFORMED_BODY", e.to_string()))
}

/// # Safety
/// `p` must be null or a valid NUL-terminated string.
unsafe fn req_pid(p: *const c_char) -> Result<Pid, Error> {
    // SAFETY: per the function contract.
    Ok(Pid::parse(unsafe { req_str(p, "pid") }?)?)
}

/// # Safety
/// `reg` must be null or a handle from one of the open functions.
unsafe fn handle<'a>(reg: *const FdomRegistry) -> Result<&'a Registry, Error> {
    // SAFETY: per the function contract.
    unsafe { reg.as_ref() }
        .map(|h| &h.inner)
        .ok_or_else(|| Error::new(FdomStatus::NullArgument, "NULL_ARGUMENT", "registry handle is null"))
}

fn store_handle(out: *mut *mut FdomRegistry, registry: Registry) -> Result<(), Error> {
    if out.is_null() {
        return Err(Error::new(FdomStatus::NullArgument, "NULL_ARGUMENT", "out pointer is null"));
    }
    let boxed = Box::into_raw(Box::new(FdomRegistry { inner: registry }));
    // SAFETY: checked non-null; the caller guarantees it is writable.
    unsafe { *out = boxed };
    Ok(())
}

/// Opens a registry backed by `data_dir`. `prefix` may be null for the
/// default. The directory stays locked until [`fdom_registry_free`].
///
/// # Safety
/// String arguments must be null or NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fdom_registry_open(
    data_dir: *const c_char,
    prefix: *const c_char,
    out: *mut *mut FdomRegistry,
) -> FdomStatus {
    run(|| {
        // SAFETY: per the function contract.
        let dir = unsafe { req_str(data_dir, "data_dir") }?;
        let prefix = unsafe { opt_str(prefix) }?.unwrap_or(DEFAULT_PREFIX);
        let (registry, _) = Registry::open(Path::new(dir), prefix, Arc::new(SystemClock))?;
        store_handle(out, registry)
    })
}

/// Opens a registry whose journal lives only in memory.
///
/// # Safety
/// `prefix` must be null or NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fdom_registry_open_in_memory(prefix: *const c_char, out: *mut *mut FdomRegistry) -> FdomStatus {
    run(|| {
        // SAFETY: per the function contract.
        let prefix = unsafe { opt_str(prefix) }?.unwrap_or(DEFAULT_PREFIX);
        store_handle(out, Registry::in_memory(prefix, Arc::new(SystemClock))?)
    })
}

/// Releases a handle (and the data-directory lock). Null is ignored.
///
/// # Safety
/// `reg` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn fdom_registry_free(reg: *mut FdomRegistry) {
    if !reg.is_null() {
        // SAFETY: per the function contract, this is the unique owner.
        drop(unsafe { Box::from_raw(reg) });
    }
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must be null or a string from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn fdom_string_free(s: *mut c_char) {
    if !s.is_null() {
        // SAFETY: per the function contract.
        drop(unsafe { CString::from_raw(s) });
    }
}

/// The calling thread's last error as JSON, or null if the last call
/// succeeded. Free with [`fdom_string_free`].
#[no_mangle]
pub extern "C" fn fdom_last_error() -> *mut c_char {
    LAST_ERROR.with(|slot| match &*slot.borrow() {
        Some(v) => to_c_string(v.to_string()),
        None => ptr::null_mut(),
    })
}

/// Static name of a status code. Never free the result.
#[no_mangle]
pub extern "C" fn fdom_status_name(status: FdomStatus) -> *const c_char {
    let name: &'static CStr = match status {
        FdomStatus::Ok => c"OK",
        FdomStatus::NotFound => c"NOT_FOUND",
        FdomStatus::Gone => c"GONE",
        FdomStatus::VersionConflict => c"VERSION_CONFLICT",
        FdomStatus::ValidationFailed => c"VALIDATION_FAILED",
        FdomStatus::InvalidDoRef => c"INVALID_DO_REF",
        FdomStatus::InvalidChecksum => c"INVALID_CHECKSUM",
        FdomStatus::ClassChangeForbidden => c"CLASS_CHANGE_FORBIDDEN",
        FdomStatus::DuplicateOpId => c"DUPLICATE_OP_ID",
        FdomStatus::InvalidDescriptor => c"INVALID_DESCRIPTOR",
        FdomStatus::InvalidQuery => c"INVALID_QUERY",
        FdomStatus::NotACreativeWork => c"NOT_A_CREATIVE_WORK",
        FdomStatus::InvalidPid => c"INVALID_PID",
        FdomStatus::UnknownClass => c"UNKNOWN_CLASS",
        FdomStatus::StorageFull => c"STORAGE_FULL",
        FdomStatus::StorageError => c"STORAGE_ERROR",
        FdomStatus::Locked => c"LOCKED",
        FdomStatus::NullArgument => c"NULL_ARGUMENT",
        FdomStatus::InvalidUtf8 => c"INVALID_UTF8",
        FdomStatus::MalformedJson => c"MALFORMED_BODY",
        FdomStatus::Internal => c"INTERNAL",
    };
    name.as_ptr()
}

/// Creates an FDO and its metadata from a `{do_ref, do_checksum?, class,
/// properties}` request. `out` receives the FDO with embedded metadata.
///
/// # Safety
/// `reg` must be a live handle; strings NUL-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fdom_create(reg: *const FdomRegistry, request: *const c_char, out: *mut *mut c_char) -> FdomStatus {
    guard(out, || {
        // SAFETY: per the function contract.
        let (registry, req) = unsafe { (handle(reg)?, req_json::<CreateFdo>(request, "request")?) };
        let (record, metadata) = registry.create_fdo(req)?;
        Ok(FdoView { record, metadata })
    })
}

/// Fetches an active FDO with its metadata. Deleted FDOs yield `Gone`
/// with the tombstone in the error details.
///
/// # Safety
/// As for [`fdom_create`].
#[no_mangle]
pub unsafe extern "C" fn fdom_get_fdo(reg: *const FdomRegistry, pid: *const c_char, out: *mut *mut c_char) -> FdomStatus {
    guard(out, || {
        // SAFETY: per the function contract.
        let (registry, pid) = unsafe { (handle(reg)?, req_pid(pid)?) };
        let (record, metadata) = registry.get_fdo_with_metadata(&pid)?;
        Ok(FdoView { record, metadata })
    })
}

/// Fetches an active metadata record by its own PID.
///
/// # Safety
/// As for [`fdom_create`].
#[no_mangle]
pub unsafe extern "C" fn fdom_get_metadata(
    reg: *const FdomRegistry,
    pid: *const c_char,
    out: *mut *mut c_char,
) -> FdomStatus {
    guard(out, || {
        // SAFETY: per the function contract.
        let (registry, pid) = unsafe { (handle(reg)?, req_pid(pid)?) };
        match registry.get_metadata(&pid)? {
            Resolved::Active(record) => Ok(record),
            Resolved::Tombstoned(t) => Err(RegistryError::Gone(t).into()),
        }
    })
}

/// Updates an FDO if its current version equals `expected_version`.
///
/// # Safety
/// As for [`fdom_create`].
#[no_mangle]
pub unsafe extern "C" fn fdom_update(
    reg: *const FdomRegistry,
    pid: *const c_char,
    expected_version: u64,
    request: *const c_char,
    out: *mut *mut c_char,
) -> FdomStatus {
    guard(out, || {
        // SAFETY: per the function contract.
        let (registry, pid, req) = unsafe { (handle(reg)?, req_pid(pid)?, req_json::<UpdateFdo>(request, "request")?) };
        let (record, metadata) = registry.update_fdo(&pid, expected_version, req)?;
        Ok(FdoView { record, metadata })
    })
}

/// Tombstones an FDO and its metadata. `reason` may be null. Deleting an
/// already deleted FDO yields `Gone`.
///
/// # Safety
/// As for [`fdom_create`].
#[no_mangle]
pub unsafe extern "C" fn fdom_delete(
    reg: *const FdomRegistry,
    pid: *const c_char,
    reason: *const c_char,
    out: *mut *mut c_char,
) -> FdomStatus {
    guard(out, || {
        // SAFETY: per the function contract.
        let (registry, pid, reason) = unsafe { (handle(reg)?, req_pid(pid)?, opt_str(reason)?) };
        let deletion = registry.delete_fdo(&pid, reason.map(str::to_owned))?;
        if deletion.already_deleted {
            return Err(RegistryError::Gone(deletion.tombstone).into());
        }
        Ok(deletion.tombstone)
    })
}

/// Lists FDOs ordered by creation time. `class` may be null; a `limit` of
/// zero means the default page size.
///
/// # Safety
/// As for [`fdom_create`].
#[no_mangle]
pub unsafe extern "C" fn fdom_list(
    reg: *const FdomRegistry,
    class: *const c_char,
    include_tombstoned: bool,
    offset: u64,
    limit: u64,
    out: *mut *mut c_char,
) -> FdomStatus {
    guard(out, || {
        // SAFETY: per the function contract.
        let (registry, class) = unsafe { (handle(reg)?, opt_str(class)?) };
        let class = class
            .map(|c| c.parse().map_err(|e: UnknownClass| Error::new(FdomStatus::UnknownClass, "UNKNOWN_CLASS", e.to_string())))
            .transpose()?;
        let page = if limit == 0 {
            Page { offset: offset as usize, ..Page::default() }
        } else {
            Page::new(offset as usize, limit as usize)
        };
        Ok(registry.list_fdos(ListFilter { class, include_tombstoned }, page)?)
    })
}

/// Resolves any PID to an FDO, a metadata record, or a tombstone.
///
/// # Safety
/// As for [`fdom_create`].
#[no_mangle]
pub unsafe extern "C" fn fdom_resolve(reg: *const FdomRegistry, pid: *const c_char, out: *mut *mut c_char) -> FdomStatus {
    guard(out, || {
        // SAFETY: per the function contract.
        let (registry, pid) = unsafe { (handle(reg)?, req_pid(pid)?) };
        Ok(registry.resolve_any(&pid)?)
    })
}

/// Validates a properties object against `class` with references checked
/// against the registry. Returns `Ok` with the report even when the
/// payload is invalid.
///
/// # Safety
/// As for [`fdom_create`].
#[no_mangle]
pub unsafe extern "C" fn fdom_validate(
    reg: *const FdomRegistry,
    class: *const c_char,
    properties: *const c_char,
    out: *mut *mut c_char,
) -> FdomStatus {
    guard(out, || {
        // SAFETY: per the function contract.
        let (registry, class, props) =
            unsafe { (handle(reg)?, req_str(class, "class")?, req_json::<Properties>(properties, "properties")?) };
        Ok(registry.validate(class, &props))
    })
}

/// The schema of one metadata class.
///
/// # Safety
/// `class` must be NUL-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fdom_class_schema(class: *const c_char, out: *mut *mut c_char) -> FdomStatus {
    guard(out, || {
        // SAFETY: per the function contract.
        let class = unsafe { req_str(class, "class") }?;
        class_schema_by_name(class).map_err(|e| Error::new(FdomStatus::UnknownClass, "UNKNOWN_CLASS", e.to_string()))
    })
}

/// Registers an operation descriptor given as JSON.
///
/// # Safety
/// As for [`fdom_create`].
#[no_mangle]
pub unsafe extern "C" fn fdom_register_operation(
    reg: *const FdomRegistry,
    descriptor: *const c_char,
    out: *mut *mut c_char,
) -> FdomStatus {
    guard(out, || {
        // SAFETY: per the function contract.
        let (registry, d) = unsafe { (handle(reg)?, req_json::<OperationDescriptor>(descriptor, "descriptor")?) };
        Ok(registry.register_operation(d)?)
    })
}

/// Operations applicable to an active FDO.
///
/// # Safety
/// As for [`fdom_create`].
#[no_mangle]
pub unsafe extern "C" fn fdom_operations_for(
    reg: *const FdomRegistry,
    pid: *const c_char,
    out: *mut *mut c_char,
) -> FdomStatus {
    guard(out, || {
        // SAFETY: per the function contract.
        let (registry, pid) = unsafe { (handle(reg)?, req_pid(pid)?) };
        Ok(registry.operations_for(&pid)?)
    })
}

/// Relation edges touching a metadata record. `label` may be null.
///
/// # Safety
/// As for [`fdom_create`].
#[no_mangle]
pub unsafe extern "C" fn fdom_edges(
    reg: *const FdomRegistry,
    pid: *const c_char,
    direction: FdomDirection,
    label: *const c_char,
    out: *mut *mut c_char,
) -> FdomStatus {
    guard(out, || {
        // SAFETY: per the function contract.
        let (registry, pid, label) = unsafe { (handle(reg)?, req_pid(pid)?, opt_str(label)?) };
        let label = label
            .map(|l| l.parse::<EdgeLabel>().map_err(|e| Error::new(FdomStatus::InvalidQuery, "INVALID_QUERY", e.to_string())))
            .transpose()?;
        Ok(match Direction::from(direction) {
            Direction::Outbound => registry.edges_from(&pid, label)?,
            Direction::Inbound => registry.edges_to(&pid, label)?,
        })
    })
}

/// Citation closure of a CreativeWork up to `max_depth` hops.
///
/// # Safety
/// As for [`fdom_create`].
#[no_mangle]
pub unsafe extern "C" fn fdom_closure(
    reg: *const FdomRegistry,
    pid: *const c_char,
    direction: FdomDirection,
    max_depth: u32,
    out: *mut *mut c_char,
) -> FdomStatus {
    guard(out, || {
        // SAFETY: per the function contract.
        let (registry, pid) = unsafe { (handle(reg)?, req_pid(pid)?) };
        Ok(registry.citation_closure(&pid, direction.into(), max_depth)?)
    })
}

/// Mints a fresh PID under `prefix` (null for the default).
///
/// # Safety
/// `prefix` must be null or NUL-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fdom_pid_mint(prefix: *const c_char, out: *mut *mut c_char) -> FdomStatus {
    guard(out, || {
        // SAFETY: per the function contract.
        let prefix = unsafe { opt_str(prefix) }?.unwrap_or(DEFAULT_PREFIX);
        Ok(Pid::mint(prefix)?)
    })
}

/// Parses and normalizes a PID. `out` receives it as a JSON string.
///
/// # Safety
/// `text` must be NUL-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fdom_pid_parse(text: *const c_char, out: *mut *mut c_char) -> FdomStatus {
    guard(out, || {
        // SAFETY: per the function contract.
        unsafe { req_pid(text) }
    })
}
