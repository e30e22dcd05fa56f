#ifndef FIELDGRID_H
#define FIELDGRID_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum {
  FG_STATUS_OK = 0,
  FG_STATUS_NULL_POINTER = 1,
  FG_STATUS_INVALID_ARGUMENT = 2,
  FG_STATUS_IO = 3,
  FG_STATUS_FORMAT = 4,
  FG_STATUS_DEGENERATE = 5,
  FG_STATUS_PANIC = 6,
} FgStatus;

typedef enum {
  FG_METHOD_CUTOFF = 0,
  FG_METHOD_WATERSHED = 1,
} FgMethod;

/**
 * Opaque field label map handle.
 */
typedef struct FgLabelMap FgLabelMap;

/**
 * Opaque raster handle.
 */
typedef struct FgRaster FgRaster;

typedef struct {
  double t_extent;
  double t_boundary;
  double t_distance;
} FgThresholds;

typedef struct {
  size_t n_reference;
  size_t n_extracted;
  size_t n_detected;
  double hit_rate;
  double s_over;
  double s_under;
  double eccentricity_factor;
  double location_shift;
} FgObjectSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null if none. The
 * pointer stays valid until the next failing call on the same thread.
 */
const char *fg_last_error_message(void);

/**
 * Copy `len = width * height * bands` band-sequential values into a new
 * raster with a unit geotransform.
 *
 * # Safety
 * `data` must point to `len` readable floats; `out` must be writable.
 */
FgStatus fg_raster_new(size_t width,
                       size_t height,
                       size_t bands,
                       const float *data,
                       size_t len,
                       FgRaster **out);

/**
 * # Safety
 * `raster` must come from this library and not be used afterwards.
 */
void fg_raster_free(FgRaster *raster);

/**
 * Read a raster from its `.bin` or `.json` path.
 *
 * # Safety
 * `path` must be a nul-terminated string; `out` must be writable.
 */
FgStatus fg_raster_read(const char *path, FgRaster **out);

/**
 * # Safety
 * Pointers must be valid; output pointers may be null to skip them.
 */
FgStatus fg_raster_dims(const FgRaster *raster, size_t *width, size_t *height, size_t *bands);

/**
 * Extract fields from a 3-band mask raster (extent, boundary, distance).
 *
 * # Safety
 * `masks` must be a live handle; `out` must be writable.
 */
FgStatus fg_extract(const FgRaster *masks,
                    FgThresholds thresholds,
                    FgMethod method,
                    FgLabelMap **out);

/**
 * # Safety
 * See [`fg_extract`].
 */
FgStatus fg_extract_cutoff(const FgRaster *masks, FgThresholds thresholds, FgLabelMap **out);

/**
 * # Safety
 * See [`fg_extract`].
 */
FgStatus fg_extract_watershed(const FgRaster *masks, FgThresholds thresholds, FgLabelMap **out);

/**
 * Copy `width * height` labels into a new label map.
 *
 * # Safety
 * `labels` must point to `width * height` readable values.
 */
FgStatus fg_label_map_new(size_t width, size_t height, const uint32_t *labels, FgLabelMap **out);

/**
 * Read a single-band label map raster.
 *
 * # Safety
 * `path` must be a nul-terminated string; `out` must be writable.
 */
FgStatus fg_label_map_read(const char *path, FgLabelMap **out);

/**
 * # Safety
 * `map` must come from this library and not be used afterwards.
 */
void fg_label_map_free(FgLabelMap *map);

/**
 * Grid shape and largest label. Output pointers may be null.
 *
 * # Safety
 * `map` must be a live handle.
 */
FgStatus fg_label_map_dims(const FgLabelMap *map,
                           size_t *width,
                           size_t *height,
                           uint32_t *n_fields);

/**
 * Copy the row-major labels into `buf`, which must hold exactly
 * `width * height` values.
 *
 * # Safety
 * `buf` must point to `len` writable values.
 */
FgStatus fg_label_map_copy(const FgLabelMap *map, uint32_t *buf, size_t len);

/**
 * Object-level accuracy summary of `extracted` against `reference`.
 *
 * # Safety
 * Handles must be live; `out` must be writable.
 */
FgStatus fg_object_summary(const FgLabelMap *extracted,
                           const FgLabelMap *reference,
                           FgObjectSummary *out);

/**
 * Dual Tanimoto similarity of predictions `p` and labels `l`.
 *
 * # Safety
 * `p` and `l` must each point to `n` readable values.
 */
FgStatus fg_tanimoto_dual(const double *p, const double *l, size_t n, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FIELDGRID_H */
