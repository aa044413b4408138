#ifndef IDVAULT_H
#define IDVAULT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum IdvaultStatus {
  IDVAULT_STATUS_OK = 0,
  IDVAULT_STATUS_NULL_ARGUMENT = 1,
  IDVAULT_STATUS_INVALID_UTF8 = 2,
  IDVAULT_STATUS_INVALID_JSON = 3,
  IDVAULT_STATUS_OPEN_FAILED = 4,
  IDVAULT_STATUS_SCHEMA_REJECTED = 5,
  IDVAULT_STATUS_PARSE_FAILED = 6,
  IDVAULT_STATUS_PANIC = 99,
} IdvaultStatus;

/**
 * Opaque service handle.
 */
typedef struct IdvaultService IdvaultService;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Opens (or creates) a persistent service rooted at `data_dir`, with the idcard type registered.
 *
 * # Safety
 * String arguments are NUL-terminated; `out` points to writable storage for one handle.
 */
enum IdvaultStatus idvault_service_open(const char *data_dir,
                                        const char *jwt_secret,
                                        struct IdvaultService **out);

/**
 * Opens a service that keeps everything in memory.
 *
 * # Safety
 * As [`idvault_service_open`].
 */
enum IdvaultStatus idvault_service_open_in_memory(const char *jwt_secret,
                                                  struct IdvaultService **out);

/**
 * Closes a handle. Null is ignored.
 *
 * # Safety
 * `handle` came from one of the open functions and is not used afterwards.
 */
void idvault_service_free(struct IdvaultService *handle);

/**
 * Runs one GraphQL request and writes the response document (`{"data", "errors"}`) to `out_json`.
 * GraphQL-level failures, including a rejected `bearer_token`, are reported inside the response
 * with status OK, as the HTTP endpoint does. `variables_json`, `operation_name` and
 * `bearer_token` may be null.
 *
 * # Safety
 * String arguments are null or NUL-terminated; `out_json` points to writable storage.
 */
enum IdvaultStatus idvault_execute(const struct IdvaultService *handle,
                                   const char *query,
                                   const char *variables_json,
                                   const char *operation_name,
                                   const char *bearer_token,
                                   char **out_json);

/**
 * Registers a content type from its JSON definition; the API is regenerated immediately.
 *
 * # Safety
 * `definition_json` is NUL-terminated.
 */
enum IdvaultStatus idvault_register_content_type(const struct IdvaultService *handle,
                                                 const char *definition_json);

/**
 * Writes the current GraphQL SDL to `out_sdl`.
 *
 * # Safety
 * `out_sdl` points to writable storage.
 */
enum IdvaultStatus idvault_schema_sdl(const struct IdvaultService *handle, char **out_sdl);

/**
 * Parses a GraphQL document and writes its canonical printed form. On a syntax error the
 * status is `IDVAULT_STATUS_PARSE_FAILED` and `line`/`column` (when non-null) receive the position.
 *
 * # Safety
 * `query` is NUL-terminated; the out pointers are writable or null (`out_text` must not be null).
 */
enum IdvaultStatus idvault_query_print(const char *query,
                                       char **out_text,
                                       uint32_t *line,
                                       uint32_t *column);

/**
 * Message for the last failed call on this thread, or null. Valid until the next call on
 * this thread; do not free.
 */
const char *idvault_last_error_message(void);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` came from this library and is not used afterwards.
 */
void idvault_string_free(char *s);

/**
 * Library version; static, do not free.
 */
const char *idvault_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* IDVAULT_H */
