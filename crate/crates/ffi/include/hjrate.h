#ifndef HJRATE_H
#define HJRATE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status codes returned by every fallible function.
typedef enum HjStatus {
  HJ_STATUS_OK = 0,
  HJ_STATUS_NULL_POINTER = 1,
  HJ_STATUS_INVALID_ARGUMENT = 2,
  HJ_STATUS_INVALID_GRID = 3,
  HJ_STATUS_GRID_MISMATCH = 4,
  HJ_STATUS_INVALID_CERTIFICATE = 5,
  HJ_STATUS_INCOMPATIBLE = 6,
  HJ_STATUS_CFL_VIOLATION = 7,
  HJ_STATUS_NON_FINITE = 8,
  HJ_STATUS_MAX_ITERATIONS = 9,
  HJ_STATUS_DEGENERATE = 10,
  HJ_STATUS_INSUFFICIENT_POINTS = 11,
  HJ_STATUS_CONFIG = 12,
  HJ_STATUS_IO = 13,
  HJ_STATUS_BUFFER_TOO_SMALL = 14,
  HJ_STATUS_PANIC = 15,
  HJ_STATUS_OTHER = 16,
} HjStatus;

// Sup- or inf-envelope with its maximiser map.
typedef struct HjEnvelope HjEnvelope;

// Periodic uniform grid.
typedef struct HjGrid HjGrid;

// Nodal values on a grid.
typedef struct HjGridFn HjGridFn;

// Least-squares fit of `log err` against `log ε`.
typedef struct HjRateFit {
  double slope;
  double intercept;
  double std_error;
  double interval_lo;
  double interval_hi;
  size_t points;
} HjRateFit;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or NULL. Valid until the
// next call into this library from the same thread.
const char *hj_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *hj_version(void);

// # Safety
// `out` must be valid for writing one pointer.
enum HjStatus hj_grid_new(size_t dim, size_t points_per_axis, double length, struct HjGrid **out);

// # Safety
// `grid` must be NULL or a handle from `hj_grid_new` not yet freed.
void hj_grid_free(struct HjGrid *grid);

// Total node count, or 0 for NULL.
//
// # Safety
// `grid` must be NULL or a live handle.
size_t hj_grid_len(const struct HjGrid *grid);

// Copies `len` row-major values (`len` must equal the node count).
//
// # Safety
// `grid` must be a live handle, `values` readable for `len` doubles and
// `out` writable for one pointer.
enum HjStatus hj_gridfn_new(const struct HjGrid *grid,
                            const double *values,
                            size_t len,
                            struct HjGridFn **out);

// # Safety
// `f` must be NULL or a live handle.
void hj_gridfn_free(struct HjGridFn *f);

// # Safety
// `f` must be NULL or a live handle.
size_t hj_gridfn_len(const struct HjGridFn *f);

// # Safety
// `f` must be a live handle and `out` writable for `len` doubles.
enum HjStatus hj_gridfn_copy_values(const struct HjGridFn *f, double *out, size_t len);

// `sup_y { f(y) − |x − y|²/(2δ) }` on the grid.
//
// # Safety
// `f` must be a live handle and `out` writable for one pointer.
enum HjStatus hj_sup_convolution(const struct HjGridFn *f, double delta, struct HjEnvelope **out);

// `inf_y { f(y) + |x − y|²/(2δ) }` on the grid.
//
// # Safety
// `f` must be a live handle and `out` writable for one pointer.
enum HjStatus hj_inf_convolution(const struct HjGridFn *f, double delta, struct HjEnvelope **out);

// # Safety
// `env` must be NULL or a live handle.
void hj_envelope_free(struct HjEnvelope *env);

// # Safety
// `env` must be NULL or a live handle.
size_t hj_envelope_len(const struct HjEnvelope *env);

// # Safety
// `env` must be a live handle and `out` writable for `len` doubles.
enum HjStatus hj_envelope_copy_values(const struct HjEnvelope *env, double *out, size_t len);

// Flat index of the selected point for every node.
//
// # Safety
// `env` must be a live handle and `out` writable for `len` entries.
enum HjStatus hj_envelope_copy_argmax(const struct HjEnvelope *env, size_t *out, size_t len);

// Exhaustive discrete Hölder seminorm.
//
// # Safety
// `f` must be a live handle and `out` writable for one double.
enum HjStatus hj_holder_seminorm(const struct HjGridFn *f, double alpha, double *out);

// # Safety
// `f`, `g` must be live handles and `out` writable for one double.
enum HjStatus hj_sup_norm_diff(const struct HjGridFn *f, const struct HjGridFn *g, double *out);

// `4‖Du₀‖√(εt) + C_F tε`.
//
// # Safety
// `out` must be writable for one double.
enum HjStatus hj_heat_bound(double lip_u0, double c_f, double t, double epsilon, double *out);

// # Safety
// `epsilons` and `errors` must be readable for `len` doubles; `out` writable.
enum HjStatus hj_fit_rate(const double *epsilons,
                          const double *errors,
                          size_t len,
                          struct HjRateFit *out);

// Runs an ε-sweep described by a JSON config (the CLI format, with an
// inline `problem`) and returns the report as JSON. `passed` receives
// whether every bound held and the fitted rate is consistent. Nothing is
// written to disk. Free the report with `hj_string_free`.
//
// # Safety
// `config_json` must be a NUL-terminated string; `report_json` and
// `passed` must be writable.
enum HjStatus hj_run_sweep_json(const char *config_json,
                                bool stationary,
                                char **report_json,
                                bool *passed);

// # Safety
// `s` must be NULL or a string returned by this library, not yet freed.
void hj_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HJRATE_H */
