#ifndef SNLS_H
#define SNLS_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SnlsMethod {
  SNLS_METHOD_STRANG_SPLITTING = 0,
  SNLS_METHOD_EIGENDECOMPOSITION = 1,
} SnlsMethod;

typedef enum SnlsPotentialFamily {
  SNLS_POTENTIAL_FAMILY_GAUSSIAN_MATCHED_STEP = 0,
  SNLS_POTENTIAL_FAMILY_LOGISTIC_STEP = 1,
  SNLS_POTENTIAL_FAMILY_FLAT = 2,
} SnlsPotentialFamily;

typedef enum SnlsStatus {
  SNLS_STATUS_OK = 0,
  SNLS_STATUS_NULL_POINTER = 1,
  SNLS_STATUS_INVALID_ARGUMENT = 2,
  SNLS_STATUS_DIMENSION_MISMATCH = 3,
  SNLS_STATUS_INSTABILITY = 4,
  SNLS_STATUS_IO = 5,
  SNLS_STATUS_FORMAT = 6,
  SNLS_STATUS_PANIC = 7,
} SnlsStatus;

/**
 * Opaque complex field on a grid.
 */
typedef struct SnlsField SnlsField;

/**
 * Opaque periodic grid.
 */
typedef struct SnlsGrid SnlsGrid;

/**
 * Opaque perturbed linear propagator.
 */
typedef struct SnlsPropagator SnlsPropagator;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of this thread into `buf` (NUL-terminated,
 * truncated to `len`). Returns the full message length excluding the NUL.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
uintptr_t snls_last_error_message(char *buf, uintptr_t len);

/**
 * # Safety
 * `out` must be a valid pointer.
 */
enum SnlsStatus snls_grid_new(uintptr_t n_points, double length, struct SnlsGrid **out);

/**
 * # Safety
 * `grid` must be null or come from [`snls_grid_new`] and not be freed twice.
 */
void snls_grid_free(struct SnlsGrid *grid);

/**
 * Number of grid points, or 0 for a null handle.
 *
 * # Safety
 * `grid` must be null or a live handle.
 */
uintptr_t snls_grid_n_points(const struct SnlsGrid *grid);

/**
 * # Safety
 * `grid` must be null or a live handle.
 */
double snls_grid_length(const struct SnlsGrid *grid);

/**
 * Writes the `n_points` grid coordinates.
 *
 * # Safety
 * `out` must point to `len` doubles.
 */
enum SnlsStatus snls_grid_x(const struct SnlsGrid *grid, double *out, uintptr_t len);

/**
 * Samples a potential family on the grid into `out` (`n_points` doubles).
 *
 * # Safety
 * `grid` must be live; `out` must point to `len` doubles.
 */
enum SnlsStatus snls_build_potential(const struct SnlsGrid *grid,
                                     enum SnlsPotentialFamily family,
                                     double height,
                                     double width,
                                     double a_minus,
                                     double a_plus,
                                     double *out,
                                     uintptr_t len);

/**
 * Builds a field from `2 * n_points` interleaved doubles.
 *
 * # Safety
 * `grid` must be live; `values` must point to `len` doubles; `out` valid.
 */
enum SnlsStatus snls_field_new(const struct SnlsGrid *grid,
                               const double *values,
                               uintptr_t len,
                               struct SnlsField **out);

/**
 * # Safety
 * `field` must be null or come from this library and not be freed twice.
 */
void snls_field_free(struct SnlsField *field);

/**
 * Number of complex samples, or 0 for a null handle.
 *
 * # Safety
 * `field` must be null or a live handle.
 */
uintptr_t snls_field_len(const struct SnlsField *field);

/**
 * Copies the samples as interleaved doubles (`2 * n_points`).
 *
 * # Safety
 * `field` must be live; `out` must point to `len` doubles.
 */
enum SnlsStatus snls_field_values(const struct SnlsField *field, double *out, uintptr_t len);

/**
 * `∫|f|²`.
 *
 * # Safety
 * `field` must be live; `out` valid.
 */
enum SnlsStatus snls_field_mass(const struct SnlsField *field, double *out);

/**
 * Energy with potential samples `v` (`n_points` doubles). A negative
 * `alpha` drops the nonlinear term.
 *
 * # Safety
 * `field` must be live; `v` must point to `len` doubles; `out` valid.
 */
enum SnlsStatus snls_field_energy(const struct SnlsField *field,
                                  const double *v,
                                  uintptr_t len,
                                  double alpha,
                                  double *out);

/**
 * # Safety
 * `grid` must be live; `v` must point to `len` doubles; `out` valid.
 */
enum SnlsStatus snls_propagator_new(const struct SnlsGrid *grid,
                                    const double *v,
                                    uintptr_t len,
                                    enum SnlsMethod method,
                                    double dt,
                                    struct SnlsPropagator **out);

/**
 * # Safety
 * `p` must be null or come from [`snls_propagator_new`] and not be freed twice.
 */
void snls_propagator_free(struct SnlsPropagator *p);

/**
 * `e^{it(Δ-V)} f` as a new field.
 *
 * # Safety
 * Handles must be live; `out` valid.
 */
enum SnlsStatus snls_propagator_evolve(const struct SnlsPropagator *p,
                                       const struct SnlsField *field,
                                       double t,
                                       struct SnlsField **out);

/**
 * `e^{itΔ} f`.
 *
 * # Safety
 * `field` must be live; `out` valid.
 */
enum SnlsStatus snls_evolve_free(const struct SnlsField *field, double t, struct SnlsField **out);

/**
 * `e^{it(Δ-1)} f`.
 *
 * # Safety
 * `field` must be live; `out` valid.
 */
enum SnlsStatus snls_evolve_shifted(const struct SnlsField *field,
                                    double t,
                                    struct SnlsField **out);

/**
 * Nonlinear Strang flow over `[0, t]` with substep `dt`. A negative `alpha`
 * runs the linear equation.
 *
 * # Safety
 * `field` must be live; `v` must point to `len` doubles; `out` valid.
 */
enum SnlsStatus snls_evolve_nls(const struct SnlsField *field,
                                const double *v,
                                uintptr_t len,
                                double alpha,
                                double dt,
                                double t,
                                struct SnlsField **out);

/**
 * The `(r, p, q)` exponents attached to `α > 4`.
 *
 * # Safety
 * Output pointers must be valid.
 */
enum SnlsStatus snls_exponents(double alpha, double *r, double *p, double *q);

/**
 * # Safety
 * `path` must be a NUL-terminated string; `field` live.
 */
enum SnlsStatus snls_checkpoint_write(const char *path, const struct SnlsField *field, double time);

/**
 * Reads a checkpoint into a new field (on its own grid) and its time.
 *
 * # Safety
 * `path` must be a NUL-terminated string; output pointers valid.
 */
enum SnlsStatus snls_checkpoint_read(const char *path,
                                     struct SnlsField **out_field,
                                     double *out_time);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SNLS_H */
