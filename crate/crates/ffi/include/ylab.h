#ifndef YLAB_H
#define YLAB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum YlabStatus {
  YLAB_STATUS_OK = 0,
  YLAB_STATUS_NULL_POINTER = 1,
  YLAB_STATUS_INVALID_ARGUMENT = 2,
  YLAB_STATUS_INVALID_DOMAIN = 3,
  YLAB_STATUS_PRECONDITION = 4,
  YLAB_STATUS_SOLVER_FAILED = 5,
  YLAB_STATUS_OVERFLOW = 6,
  YLAB_STATUS_POINT_AT_INFINITY = 7,
  YLAB_STATUS_BUFFER_TOO_SMALL = 8,
  YLAB_STATUS_PANIC = 9,
  YLAB_STATUS_OTHER = 10,
} YlabStatus;

/**
 * Opaque domain handle.
 */
typedef struct YlabDomain YlabDomain;

/**
 * Opaque grid solution handle.
 */
typedef struct YlabField YlabField;

/**
 * Opaque radial solution handle.
 */
typedef struct YlabRadial YlabRadial;

typedef struct YlabSolveInfo {
  size_t iterations;
  size_t unknowns;
  double residual_inf;
  double wall_time;
} YlabSolveInfo;

typedef struct YlabCurvatureSummary {
  double min_ricci;
  double max_ricci;
  double min_sectional;
  double max_sectional;
  double trace_defect_max;
  double residual_max;
  size_t reported_nodes;
} YlabCurvatureSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The caller owns
 * the string and must release it with `ylab_string_free`.
 */
char *ylab_last_error_message(void);

/**
 * # Safety
 * `s` must be null or a string returned by this library, freed at most once.
 */
void ylab_string_free(char *s);

/**
 * Static version string; do not free.
 */
const char *ylab_version(void);

/**
 * # Safety
 * `center` must point to `n` doubles (or be null for the origin); `out` must
 * be a valid pointer.
 */
enum YlabStatus ylab_domain_ball(size_t n,
                                 const double *center,
                                 double radius,
                                 struct YlabDomain **out);

/**
 * # Safety
 * `out` must be a valid pointer.
 */
enum YlabStatus ylab_domain_annulus(size_t n, double r0, double outer, struct YlabDomain **out);

/**
 * # Safety
 * `axes` must point to `n` doubles; `out` must be a valid pointer.
 */
enum YlabStatus ylab_domain_ellipsoid(const double *axes, size_t n, struct YlabDomain **out);

/**
 * # Safety
 * `d` must be null or a handle from this library, freed at most once.
 */
void ylab_domain_free(struct YlabDomain *d);

/**
 * # Safety
 * `d` must be null or a live handle from this library.
 */
size_t ylab_domain_dim(const struct YlabDomain *d);

/**
 * Positive inside, zero on the boundary, negative outside.
 *
 * # Safety
 * `x` must point to `dim` doubles; `out` must be a valid pointer.
 */
enum YlabStatus ylab_domain_signed_distance(const struct YlabDomain *d,
                                            const double *x,
                                            double *out);

/**
 * Nearest boundary point of `x`, its interior unit normal and mean curvature
 * (sum of principal curvatures).
 *
 * # Safety
 * `x`, `position` and `normal` must point to `dim` doubles; `mean_curvature`
 * must be a valid pointer.
 */
enum YlabStatus ylab_domain_project(const struct YlabDomain *d,
                                    const double *x,
                                    double *position,
                                    double *normal,
                                    double *mean_curvature);

/**
 * Grid solve of `v Δv = (n/2)(|∇v|² − 1)` with mesh width `h`.
 *
 * # Safety
 * `out` must be a valid pointer; `info` may be null.
 */
enum YlabStatus ylab_solve_v(const struct YlabDomain *d,
                             double h,
                             double tol,
                             struct YlabField **out,
                             struct YlabSolveInfo *info);

/**
 * # Safety
 * `f` must be null or a handle from this library, freed at most once.
 */
void ylab_field_free(struct YlabField *f);

/**
 * Number of interior nodes (the unknowns of the solve).
 *
 * # Safety
 * `f` must be null or a live handle from this library.
 */
size_t ylab_field_interior_count(const struct YlabField *f);

/**
 * Multilinear interpolation of `v` at `x`.
 *
 * # Safety
 * `x` must point to `n` doubles; `out` must be a valid pointer.
 */
enum YlabStatus ylab_field_value_at(const struct YlabField *f, const double *x, double *out);

/**
 * Ricci and sectional extremes over interior nodes at depth ≥ 2h.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum YlabStatus ylab_field_curvature(const struct YlabField *f, struct YlabCurvatureSummary *out);

/**
 * # Safety
 * `out` must be a valid pointer.
 */
enum YlabStatus ylab_radial_ball(size_t n, double radius, struct YlabRadial **out);

/**
 * # Safety
 * `out` must be a valid pointer.
 */
enum YlabStatus ylab_radial_annulus(size_t n,
                                    double r0,
                                    double outer,
                                    double tol,
                                    struct YlabRadial **out);

/**
 * # Safety
 * `s` must be null or a handle from this library, freed at most once.
 */
void ylab_radial_free(struct YlabRadial *s);

/**
 * # Safety
 * `s` must be null or a live handle from this library.
 */
size_t ylab_radial_len(const struct YlabRadial *s);

/**
 * Copies the mesh and profile into caller buffers of capacity `cap`.
 *
 * # Safety
 * `r` and `v` must point to `cap` writable doubles.
 */
enum YlabStatus ylab_radial_copy(const struct YlabRadial *s, double *r, double *v, size_t cap);

/**
 * Largest Ricci eigenvalue and the radius where it occurs.
 *
 * # Safety
 * `value` and `at` must be valid pointers.
 */
enum YlabStatus ylab_radial_max_ricci(const struct YlabRadial *s, double *value, double *at);

/**
 * `y = T(x)`, with `y` of length `n + 1`.
 *
 * # Safety
 * `x` must point to `n` doubles and `y` to `n + 1`.
 */
enum YlabStatus ylab_stereographic_lift(const double *x, size_t n, double *y);

/**
 * `x = T⁻¹(y)`, with `y` of length `n + 1`. Fails at the north pole.
 *
 * # Safety
 * `y` must point to `n + 1` doubles and `x` to `n`.
 */
enum YlabStatus ylab_stereographic_project(const double *y, size_t n, double *x);

/**
 * Runs the convex-domain inequality checks; `pass` receives 1 or 0 and
 * `sectional_gap` the strict negativity margin.
 *
 * # Safety
 * `pass` and `sectional_gap` must be valid pointers.
 */
enum YlabStatus ylab_verify_convex(const struct YlabDomain *d,
                                   double h,
                                   double tol,
                                   int32_t *pass,
                                   double *sectional_gap);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* YLAB_H */
