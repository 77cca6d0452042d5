#ifndef WG_LIFT_H
#define WG_LIFT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes.
typedef enum WgStatus {
  WG_STATUS_OK = 0,
  WG_STATUS_NULL_POINTER = 1,
  WG_STATUS_INVALID_ARGUMENT = 2,
  WG_STATUS_GEOMETRY = 3,
  WG_STATUS_CERTIFICATE = 4,
  WG_STATUS_SOLVE_FAILED = 5,
  WG_STATUS_IO = 6,
  WG_STATUS_INTERNAL = 7,
} WgStatus;

// Error columns of a convergence report.
typedef enum WgColumn {
  // `‖u - u_0‖`
  WG_COLUMN_L2 = 0,
  // `‖Q_0 u - u_0‖`
  WG_COLUMN_L2_PROJECTION = 1,
  // `‖u - L_h u_h‖`
  WG_COLUMN_L2_LIFT = 2,
  // `|u - u_0|_{1,h}`
  WG_COLUMN_H1 = 3,
  // `|||Q_h u - u_h|||`
  WG_COLUMN_ENERGY_PROJECTION = 4,
  // `|u - L_h u_h|_{1,h}`
  WG_COLUMN_H1_LIFT = 5,
} WgColumn;

// Opaque mesh handle.
typedef struct WgMesh WgMesh;

// Opaque convergence report handle.
typedef struct WgReport WgReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. The pointer is
// valid until the next failing call on the same thread.
const char *wg_last_error_message(void);

// Generates a mesh of the named family (`quad`, `mixed` or `wedge`).
//
// # Safety
// `family` must be a NUL-terminated string and `out` a valid pointer.
enum WgStatus wg_mesh_generate(const char *family, uint32_t level, struct WgMesh **out);

// # Safety
// `mesh` must be null or a handle from `wg_mesh_generate`.
uintptr_t wg_mesh_dim(const struct WgMesh *mesh);

// # Safety
// `mesh` must be null or a handle from `wg_mesh_generate`.
uintptr_t wg_mesh_num_vertices(const struct WgMesh *mesh);

// # Safety
// `mesh` must be null or a handle from `wg_mesh_generate`.
uintptr_t wg_mesh_num_cells(const struct WgMesh *mesh);

// # Safety
// `mesh` must be null or a handle from `wg_mesh_generate`.
uintptr_t wg_mesh_num_faces(const struct WgMesh *mesh);

// Largest cell diameter.
//
// # Safety
// `mesh` must be null or a handle from `wg_mesh_generate`.
double wg_mesh_size(const struct WgMesh *mesh);

// # Safety
// `mesh` must be null or a handle from `wg_mesh_generate` not yet freed.
void wg_mesh_free(struct WgMesh *mesh);

// Runs a convergence study on levels `level_min..=level_max` with the
// default exact solution of the family's dimension.
//
// # Safety
// `family` must be a NUL-terminated string and `out` a valid pointer.
enum WgStatus wg_study_run(const char *family,
                           uint32_t k,
                           uint32_t level_min,
                           uint32_t level_max,
                           struct WgReport **out);

// # Safety
// `report` must be null or a handle from `wg_study_run`.
uintptr_t wg_report_num_levels(const struct WgReport *report);

// Mesh size of level `index` (0-based within the report).
//
// # Safety
// `report` must be a handle from `wg_study_run`; `out` a valid pointer.
enum WgStatus wg_report_h(const struct WgReport *report, uintptr_t index, double *out);

// Error of `column` on level `index`.
//
// # Safety
// `report` must be a handle from `wg_study_run`; `out` a valid pointer.
enum WgStatus wg_report_error(const struct WgReport *report,
                              uintptr_t index,
                              enum WgColumn column,
                              double *out);

// Rate of `column` between levels `index - 1` and `index`; fails for
// `index == 0`.
//
// # Safety
// `report` must be a handle from `wg_study_run`; `out` a valid pointer.
enum WgStatus wg_report_rate(const struct WgReport *report,
                             uintptr_t index,
                             enum WgColumn column,
                             double *out);

// The report as CSV; release with `wg_string_free`. Returns null when
// `report` is null.
//
// # Safety
// `report` must be null or a handle from `wg_study_run`.
char *wg_report_csv(const struct WgReport *report);

// # Safety
// `report` must be null or a handle from `wg_study_run` not yet freed.
void wg_report_free(struct WgReport *report);

// # Safety
// `s` must be null or a string returned by this library not yet freed.
void wg_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* WG_LIFT_H */
