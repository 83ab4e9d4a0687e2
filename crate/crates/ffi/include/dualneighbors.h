#ifndef DUALNEIGHBORS_H
#define DUALNEIGHBORS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum DnMode {
  DN_MODE_REPLACEMENT = 0,
  DN_MODE_EXPANSION = 1,
} DnMode;

// Which similarity produced a neighbor.
typedef enum DnSource {
  DN_SOURCE_WORD = 0,
  DN_SOURCE_EMBEDDING = 1,
  DN_SOURCE_BOTH = 2,
} DnSource;

// Result code of every call.
typedef enum DnStatus {
  DN_STATUS_OK = 0,
  DN_STATUS_NULL_ARGUMENT = 1,
  DN_STATUS_INVALID_UTF8 = 2,
  DN_STATUS_NOT_FOUND = 3,
  DN_STATUS_EMPTY_QUERY = 4,
  DN_STATUS_INVALID_ARGUMENT = 5,
  DN_STATUS_BUFFER_TOO_SMALL = 6,
  DN_STATUS_IO = 7,
  DN_STATUS_PARSE = 8,
  DN_STATUS_BUNDLE = 9,
  DN_STATUS_INTERNAL = 10,
} DnStatus;

// Opaque handle to a loaded bundle.
typedef struct DnBundle DnBundle;

// One entry of a dual neighbor list. Ranks are 1-based; 0 means the
// document is absent from that list and the matching score is NaN.
typedef struct DnNeighbor {
  // Corpus position of the neighbor.
  size_t index;
  enum DnSource source;
  uint32_t word_rank;
  double word_score;
  uint32_t embedding_rank;
  double embedding_score;
} DnNeighbor;

// Connectivity metrics of one recommendation graph. `dist` is NaN when no
// pair of documents is connected.
typedef struct DnMetrics {
  double lambda2;
  double unconnected;
  double dist;
  size_t d90_in;
  size_t ego3_10;
  bool sampled;
} DnMetrics;

// Library version as a static NUL-terminated string.
const char *dn_version(void);

// Message of the last failed call on this thread, or an empty string. The
// pointer stays valid until the next call on the same thread.
const char *dn_last_error(void);

// Release a string returned by this library. Null is ignored.
//
// # Safety
// `s` must come from this library and not have been freed already.
void dn_string_free(char *s);

// Build a bundle from a key = value configuration file. `skipped` (may be
// null) receives whether the bundle was already up to date.
//
// # Safety
// `config_path` must be a NUL-terminated string; `skipped` null or writable.
enum DnStatus dn_build(const char *config_path, bool force, bool *skipped);

// Load a bundle directory.
//
// # Safety
// `path` must be a NUL-terminated string and `out` writable.
enum DnStatus dn_bundle_open(const char *path, struct DnBundle **out);

// Release a bundle. Null is ignored.
//
// # Safety
// `bundle` must come from [`dn_bundle_open`] and not have been freed.
void dn_bundle_free(struct DnBundle *bundle);

// Number of documents.
//
// # Safety
// `bundle` must be a live handle and `out` writable.
enum DnStatus dn_bundle_len(const struct DnBundle *bundle, size_t *out);

// Id of the document at corpus position `index`.
//
// # Safety
// `bundle` must be a live handle and `out` writable.
enum DnStatus dn_document_id(const struct DnBundle *bundle, size_t index, char **out);

// Corpus position of the document `id`.
//
// # Safety
// `bundle` must be a live handle, `id` NUL-terminated and `out` writable.
enum DnStatus dn_document_index(const struct DnBundle *bundle, const char *id, size_t *out);

// Dual neighbors of `id` written into `out[0..capacity]`; `written`
// receives the list length. When `capacity` is too small nothing is copied,
// `written` holds the required length and `BUFFER_TOO_SMALL` is returned.
//
// # Safety
// `bundle` must be a live handle, `id` NUL-terminated, `out` valid for
// `capacity` elements (may be null when `capacity` is 0) and `written`
// writable.
enum DnStatus dn_neighbors(const struct DnBundle *bundle,
                           const char *id,
                           size_t nw,
                           size_t ne,
                           struct DnNeighbor *out,
                           size_t capacity,
                           size_t *written);

// Dual neighbors of `id` as the same JSON document the HTTP service returns.
//
// # Safety
// `bundle` must be a live handle, `id` NUL-terminated and `out` writable.
enum DnStatus dn_neighbors_json(const struct DnBundle *bundle,
                                const char *id,
                                size_t nw,
                                size_t ne,
                                char **out);

// Connectivity metrics of the (nw, ne) recommendation graph.
//
// # Safety
// `bundle` must be a live handle and `out` writable.
enum DnStatus dn_metrics(const struct DnBundle *bundle,
                         size_t nw,
                         size_t ne,
                         enum DnMode mode,
                         struct DnMetrics *out);

// Rank documents against free text; `lang` may be null for the bundle's
// default language. Writes the service's search JSON to `out`.
//
// # Safety
// `bundle` must be a live handle, `query` NUL-terminated, `lang` null or
// NUL-terminated and `out` writable.
enum DnStatus dn_search_json(const struct DnBundle *bundle,
                             const char *query,
                             const char *lang,
                             size_t n,
                             char **out);

#endif  /* DUALNEIGHBORS_H */
