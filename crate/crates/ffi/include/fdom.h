#ifndef FDOM_H
#define FDOM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum FdomStatus {
  FDOM_STATUS_OK = 0,
  FDOM_STATUS_NOT_FOUND = 1,
  FDOM_STATUS_GONE = 2,
  FDOM_STATUS_VERSION_CONFLICT = 3,
  FDOM_STATUS_VALIDATION_FAILED = 4,
  FDOM_STATUS_INVALID_DO_REF = 5,
  FDOM_STATUS_INVALID_CHECKSUM = 6,
  FDOM_STATUS_CLASS_CHANGE_FORBIDDEN = 7,
  FDOM_STATUS_DUPLICATE_OP_ID = 8,
  FDOM_STATUS_INVALID_DESCRIPTOR = 9,
  FDOM_STATUS_INVALID_QUERY = 10,
  FDOM_STATUS_NOT_A_CREATIVE_WORK = 11,
  FDOM_STATUS_INVALID_PID = 12,
  FDOM_STATUS_UNKNOWN_CLASS = 13,
  FDOM_STATUS_STORAGE_FULL = 14,
  FDOM_STATUS_STORAGE_ERROR = 15,
  FDOM_STATUS_LOCKED = 16,
  FDOM_STATUS_NULL_ARGUMENT = 17,
  FDOM_STATUS_INVALID_UTF8 = 18,
  FDOM_STATUS_MALFORMED_JSON = 19,
  FDOM_STATUS_INTERNAL = 20,
} FdomStatus;

typedef enum FdomDirection {
  FDOM_DIRECTION_OUTBOUND = 0,
  FDOM_DIRECTION_INBOUND = 1,
} FdomDirection;

/**
 * Opaque registry handle.
 */
typedef struct FdomRegistry FdomRegistry;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Opens a registry backed by `data_dir`. `prefix` may be null for the
 * default. The directory stays locked until [`fdom_registry_free`].
 *
 * # Safety
 * String arguments must be null or NUL-terminated; `out` must be writable.
 */
enum FdomStatus fdom_registry_open(const char *data_dir,
                                   const char *prefix,
                                   struct FdomRegistry **out);

/**
 * Opens a registry whose journal lives only in memory.
 *
 * # Safety
 * `prefix` must be null or NUL-terminated; `out` must be writable.
 */
enum FdomStatus fdom_registry_open_in_memory(const char *prefix, struct FdomRegistry **out);

/**
 * Releases a handle (and the data-directory lock). Null is ignored.
 *
 * # Safety
 * `reg` must be null or a handle not yet freed.
 */
void fdom_registry_free(struct FdomRegistry *reg);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must be null or a string from this library not yet freed.
 */
void fdom_string_free(char *s);

/**
 * The calling thread's last error as JSON, or null if the last call
 * succeeded. Free with [`fdom_string_free`].
 */
char *fdom_last_error(void);

/**
 * Static name of a status code. Never free the result.
 */
const char *fdom_status_name(enum FdomStatus status);

/**
 * Creates an FDO and its metadata from a `{do_ref, do_checksum?, class,
 * properties}` request. `out` receives the FDO with embedded metadata.
 *
 * # Safety
 * `reg` must be a live handle; strings NUL-terminated; `out` writable.
 */
enum FdomStatus fdom_create(const struct FdomRegistry *reg, const char *request, char **out);

/**
 * Fetches an active FDO with its metadata. Deleted FDOs yield `Gone`
 * with the tombstone in the error details.
 *
 * # Safety
 * As for [`fdom_create`].
 */
enum FdomStatus fdom_get_fdo(const struct FdomRegistry *reg, const char *pid, char **out);

/**
 * Fetches an active metadata record by its own PID.
 *
 * # Safety
 * As for [`fdom_create`].
 */
enum FdomStatus fdom_get_metadata(const struct FdomRegistry *reg, const char *pid, char **out);

/**
 * Updates an FDO if its current version equals `expected_version`.
 *
 * # Safety
 * As for [`fdom_create`].
 */
enum FdomStatus fdom_update(const struct FdomRegistry *reg,
                            const char *pid,
                            uint64_t expected_version,
                            const char *request,
                            char **out);

/**
 * Tombstones an FDO and its metadata. `reason` may be null. Deleting an
 * already deleted FDO yields `Gone`.
 *
 * # Safety
 * As for [`fdom_create`].
 */
enum FdomStatus fdom_delete(const struct FdomRegistry *reg,
                            const char *pid,
                            const char *reason,
                            char **out);

/**
 * Lists FDOs ordered by creation time. `class` may be null; a `limit` of
 * zero means the default page size.
 *
 * # Safety
 * As for [`fdom_create`].
 */
enum FdomStatus fdom_list(const struct FdomRegistry *reg,
                          const char *class_,
                          bool include_tombstoned,
                          uint64_t offset,
                          uint64_t limit,
                          char **out);

/**
 * Resolves any PID to an FDO, a metadata record, or a tombstone.
 *
 * # Safety
 * As for [`fdom_create`].
 */
enum FdomStatus fdom_resolve(const struct FdomRegistry *reg, const char *pid, char **out);

/**
 * Validates a properties object against `class` with references checked
 * against the registry. Returns `Ok` with the report even when the
 * payload is invalid.
 *
 * # Safety
 * As for [`fdom_create`].
 */
enum FdomStatus fdom_validate(const struct FdomRegistry *reg,
                              const char *class_,
                              const char *properties,
                              char **out);

/**
 * The schema of one metadata class.
 *
 * # Safety
 * `class` must be NUL-terminated; `out` writable.
 */
enum FdomStatus fdom_class_schema(const char *class_, char **out);

/**
 * Registers an operation descriptor given as JSON.
 *
 * # Safety
 * As for [`fdom_create`].
 */
enum FdomStatus fdom_register_operation(const struct FdomRegistry *reg,
                                        const char *descriptor,
                                        char **out);

/**
 * Operations applicable to an active FDO.
 *
 * # Safety
 * As for [`fdom_create`].
 */
enum FdomStatus fdom_operations_for(const struct FdomRegistry *reg, const char *pid, char **out);

/**
 * Relation edges touching a metadata record. `label` may be null.
 *
 * # Safety
 * As for [`fdom_create`].
 */
enum FdomStatus fdom_edges(const struct FdomRegistry *reg,
                           const char *pid,
                           enum FdomDirection direction,
                           const char *label,
                           char **out);

/**
 * Citation closure of a CreativeWork up to `max_depth` hops.
 *
 * # Safety
 * As for [`fdom_create`].
 */
enum FdomStatus fdom_closure(const struct FdomRegistry *reg,
                             const char *pid,
                             enum FdomDirection direction,
                             uint32_t max_depth,
                             char **out);

/**
 * Mints a fresh PID under `prefix` (null for the default).
 *
 * # Safety
 * `prefix` must be null or NUL-terminated; `out` writable.
 */
enum FdomStatus fdom_pid_mint(const char *prefix, char **out);

/**
 * Parses and normalizes a PID. `out` receives it as a JSON string.
 *
 * # Safety
 * `text` must be NUL-terminated; `out` writable.
 */
enum FdomStatus fdom_pid_parse(const char *text, char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FDOM_H */
