#ifndef DATANEXUS_H
#define DATANEXUS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Result code of every `dn_*` call.
 */
typedef enum DnStatus {
  DN_STATUS_OK = 0,
  DN_STATUS_NULL_ARGUMENT = 1,
  DN_STATUS_INVALID_UTF8 = 2,
  DN_STATUS_INVALID_ARGUMENT = 3,
  DN_STATUS_NOT_FOUND = 4,
  DN_STATUS_MISSING_ARTIFACT = 5,
  DN_STATUS_CORRUPT_ARTIFACT = 6,
  DN_STATUS_IO = 7,
  DN_STATUS_INTERNAL = 8,
} DnStatus;

typedef enum DnLinkLabel {
  DN_LINK_LABEL_USED = 0,
  DN_LINK_LABEL_MENTIONED = 1,
} DnLinkLabel;

/*
 A loaded artifact directory.
 */
typedef struct DnLibrary DnLibrary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Loads the snapshot, links and index from `dir` into a new handle.

 # Safety
 `dir` must be a nul-terminated string and `out` a valid pointer.
 */
enum DnStatus dn_library_open(const char *dir, struct DnLibrary **out);

/*
 Releases a handle from [`dn_library_open`]. Null is ignored.

 # Safety
 `lib` must come from [`dn_library_open`] and not be used afterwards.
 */
void dn_library_free(struct DnLibrary *lib);

/*
 Number of searchable records, or 0 for a null handle.

 # Safety
 `lib` must be null or a live handle.
 */
size_t dn_library_record_count(const struct DnLibrary *lib);

/*
 Runs a search. `request_json` is an object with `q` and optional `type`,
 `from`, `size` and facet arrays `year`, `source`, `language`. The result is
 the same JSON the HTTP search endpoint returns.

 # Safety
 `lib` must be a live handle, `request_json` nul-terminated, `out` valid.
 */
enum DnStatus dn_search(const struct DnLibrary *lib, const char *request_json, char **out);

/*
 Writes the record detail (record plus link counts) as JSON. Merged-away ids
 resolve to their surviving record.

 # Safety
 `lib` must be a live handle, `id` nul-terminated, `out` valid.
 */
enum DnStatus dn_record(const struct DnLibrary *lib, const char *id, char **out);

/*
 Writes the linked entries of a record as a JSON array. `category` may be
 null or `"all"` for every category.

 # Safety
 `lib` must be a live handle, `id` nul-terminated, `category` null or
 nul-terminated, `out` valid.
 */
enum DnStatus dn_record_links(const struct DnLibrary *lib,
                              const char *id,
                              const char *category,
                              char **out);

/*
 Renders a citation; `format` is `bibtex`, `ris`, `endnote` or `apa_text`.

 # Safety
 `lib` must be a live handle, `id` and `format` nul-terminated, `out` valid.
 */
enum DnStatus dn_citation(const struct DnLibrary *lib,
                          const char *id,
                          const char *format,
                          char **out);

/*
 Labels a link confidence: exactly 1 is `Used`, anything else in [0, 1] is
 `Mentioned`.

 # Safety
 `out` must be a valid pointer.
 */
enum DnStatus dn_classify_link_label(double confidence, enum DnLinkLabel *out);

/*
 Normalizes an identifier; `scheme` is `doi`, `dara`, `urn` or `isbn`.

 # Safety
 `scheme` and `raw` must be nul-terminated, `out` valid.
 */
enum DnStatus dn_normalize_identifier(const char *scheme, const char *raw, char **out);

/*
 Computes the usage report over one JSONL event log and writes it as JSON.
 `timeout_minutes` splits sessions; `path_depth` bounds the path analysis.

 # Safety
 `log_path` must be nul-terminated and `out` valid.
 */
enum DnStatus dn_analyze_logs(const char *log_path,
                              uint32_t timeout_minutes,
                              uint32_t path_depth,
                              char **out);

/*
 Frees a string returned through an `out` parameter. Null is ignored.

 # Safety
 `s` must come from this library and not be used afterwards.
 */
void dn_string_free(char *s);

/*
 Message of the last failed call on this thread, or null after a success.
 Valid until the next `dn_*` call on the same thread.
 */
const char *dn_last_error(void);

/*
 Library version as a static string.
 */
const char *dn_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DATANEXUS_H */
