#ifndef NIRA_H
#define NIRA_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum NiraMethod {
  NIRA_METHOD_UP = 0,
  NIRA_METHOD_RA_FULL = 1,
  NIRA_METHOD_RA_FIXED = 2,
  NIRA_METHOD_RA_TRUNCATE = 3,
  NIRA_METHOD_RA_APPEND = 4,
  NIRA_METHOD_RA_UA = 5,
  NIRA_METHOD_DENSE = 6,
} NiraMethod;

typedef enum NiraStatus {
  NIRA_STATUS_OK = 0,
  NIRA_STATUS_NULL_POINTER = 1,
  NIRA_STATUS_INVALID_ARGUMENT = 2,
  NIRA_STATUS_PARSE = 3,
  NIRA_STATUS_VALIDATION = 4,
  NIRA_STATUS_IO = 5,
  NIRA_STATUS_NUMERIC = 6,
  NIRA_STATUS_PANIC = 7,
} NiraStatus;

// Opaque triangle mesh handle.
typedef struct NiraMesh NiraMesh;

// Opaque network handle.
typedef struct NiraNetwork NiraNetwork;

typedef struct NiraGaussian {
  double mu;
  double sigma;
} NiraGaussian;

typedef struct NiraExtractParams {
  double iso_value;
  // Multiple of 3.
  uint32_t max_depth;
  // Soft-bound width for `UP` and `RA_UA`.
  double t;
  enum NiraMethod method;
  // Truncate k or append budget; 0 selects input_dim + 16.
  size_t variant_param;
} NiraExtractParams;

typedef struct NiraExtractCounters {
  uint64_t active_cells;
  uint64_t nodes_visited;
  uint64_t bound_queries;
  uint64_t nodes_pruned;
  uint64_t inr_point_evals;
  double pruned_volume;
} NiraExtractCounters;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the last error message of this thread into `buf` (NUL-terminated,
// truncated to `len`). Returns the full message length plus one, or 0 when
// there is no error.
//
// # Safety
// `buf` must be writable for `len` bytes, or null with `len == 0`.
size_t nira_last_error_message(char *buf, size_t len);

// Loads an `inr-weights-v1` file.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum NiraStatus nira_network_load(const char *path, struct NiraNetwork **out);

// Parses `inr-weights-v1` text.
//
// # Safety
// `text` must be a NUL-terminated string; `out` must be writable.
enum NiraStatus nira_network_parse(const char *text, struct NiraNetwork **out);

// # Safety
// `net` must come from `nira_network_load`/`nira_network_parse` and not be
// freed twice. Null is ignored.
void nira_network_free(struct NiraNetwork *net);

// Input dimension of the network, 0 for null.
//
// # Safety
// `net` must be a live handle or null.
size_t nira_network_input_dim(const struct NiraNetwork *net);

// Evaluates the network at `n` points stored contiguously (`input_dim`
// values each) into `out[0..n]`.
//
// # Safety
// `points` must hold `n * input_dim` doubles and `out` `n` doubles.
enum NiraStatus nira_network_forward(const struct NiraNetwork *net,
                                     const double *points,
                                     size_t n,
                                     double *out);

// Guaranteed output range of the network over the box with range analysis
// (`method` must be one of the `RA_*` variants other than `RA_UA`).
//
// # Safety
// `lower`/`upper` must hold `dim` doubles; `out_lo`/`out_hi` must be writable.
enum NiraStatus nira_ra_output_range(const struct NiraNetwork *net,
                                     const double *lower,
                                     const double *upper,
                                     size_t dim,
                                     enum NiraMethod method,
                                     size_t variant_param,
                                     double *out_lo,
                                     double *out_hi);

// Value range over the box by any method; `t` is used by `UP` and `RA_UA`.
//
// # Safety
// As [`nira_ra_output_range`].
enum NiraStatus nira_region_bound(const struct NiraNetwork *net,
                                  const double *lower,
                                  const double *upper,
                                  size_t dim,
                                  enum NiraMethod method,
                                  size_t variant_param,
                                  double t,
                                  double *out_lo,
                                  double *out_hi);

// Gaussian estimate of the output over the box by uncertainty propagation.
//
// # Safety
// `lower`/`upper` must hold `dim` doubles; `out` must be writable.
enum NiraStatus nira_up_estimate(const struct NiraNetwork *net,
                                 const double *lower,
                                 const double *upper,
                                 size_t dim,
                                 struct NiraGaussian *out);

// Gaussian read-off of the full range-analysis form under the uniform
// assumption.
//
// # Safety
// As [`nira_up_estimate`].
enum NiraStatus nira_ra_ua_estimate(const struct NiraNetwork *net,
                                    const double *lower,
                                    const double *upper,
                                    size_t dim,
                                    struct NiraGaussian *out);

// Hierarchical active-cell prediction followed by marching cubes.
//
// # Safety
// `params` must be readable and `out` writable.
enum NiraStatus nira_extract(const struct NiraNetwork *net,
                             const struct NiraExtractParams *params,
                             struct NiraMesh **out);

// # Safety
// `mesh` must be a live handle or null.
size_t nira_mesh_vertex_count(const struct NiraMesh *mesh);

// # Safety
// `mesh` must be a live handle or null.
size_t nira_mesh_triangle_count(const struct NiraMesh *mesh);

// Copies `3 * vertex_count` coordinates (x, y, z per vertex).
//
// # Safety
// `out` must be writable for `capacity` doubles.
enum NiraStatus nira_mesh_copy_vertices(const struct NiraMesh *mesh, double *out, size_t capacity);

// Copies `3 * triangle_count` zero-based vertex indices.
//
// # Safety
// `out` must be writable for `capacity` values.
enum NiraStatus nira_mesh_copy_triangles(const struct NiraMesh *mesh,
                                         uint32_t *out,
                                         size_t capacity);

// Counters of the extraction that produced `mesh`.
//
// # Safety
// `out` must be writable.
enum NiraStatus nira_mesh_counters(const struct NiraMesh *mesh, struct NiraExtractCounters *out);

// # Safety
// `path` must be a NUL-terminated string.
enum NiraStatus nira_mesh_write_obj(const struct NiraMesh *mesh, const char *path);

// # Safety
// `mesh` must come from `nira_extract` and not be freed twice. Null is
// ignored.
void nira_mesh_free(struct NiraMesh *mesh);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* NIRA_H */
