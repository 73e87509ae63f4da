#ifndef CNLS_LAB_H
#define CNLS_LAB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Sub-threshold region of a field.
typedef enum CnlsLabel {
  CNLS_LABEL_K_PLUS = 0,
  CNLS_LABEL_K_MINUS = 1,
  CNLS_LABEL_ABOVE_THRESHOLD = 2,
} CnlsLabel;

// How an evolution ended.
typedef enum CnlsOutcome {
  CNLS_OUTCOME_COMPLETED = 0,
  CNLS_OUTCOME_BLOW_UP = 1,
  CNLS_OUTCOME_STEP_UNDERFLOW = 2,
} CnlsOutcome;

// Result of every fallible call.
typedef enum CnlsStatus {
  CNLS_STATUS_OK = 0,
  CNLS_STATUS_INVALID_ARGUMENT = 1,
  CNLS_STATUS_INCOMPATIBLE_GRID = 2,
  CNLS_STATUS_DOMAIN_TOO_SMALL = 3,
  CNLS_STATUS_NUMERIC_FAILURE = 4,
  CNLS_STATUS_PARSE = 5,
  CNLS_STATUS_IO = 6,
  CNLS_STATUS_NULL_POINTER = 7,
  CNLS_STATUS_PANIC = 8,
} CnlsStatus;

// Opaque complex field on a grid.
typedef struct CnlsField CnlsField;

// Opaque uniform radial grid.
typedef struct CnlsGrid CnlsGrid;

// The four integrals behind every functional.
typedef struct CnlsNorms {
  double mass;
  double grad_sq;
  double l4_4;
  double l10_3;
  double energy;
  double energy_c;
} CnlsNorms;

// Time-stepping parameters; see [`cnls_solver_defaults`].
typedef struct CnlsSolverConfig {
  double dt0;
  double dt_min;
  double t_end;
  double tol_drift;
  double blowup_factor;
  size_t record_stride;
} CnlsSolverConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or NULL. The pointer
// stays valid until the next call into this library on the same thread.
const char *cnls_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *cnls_version(void);

// # Safety
// `out` must be a valid pointer to writable storage for one handle.
enum CnlsStatus cnls_grid_new(double r_max, size_t n, struct CnlsGrid **out);

// # Safety
// `grid` must come from [`cnls_grid_new`] and not be used afterwards. NULL is ignored.
void cnls_grid_free(struct CnlsGrid *grid);

// Number of nodes (`n + 1`), or 0 for NULL.
//
// # Safety
// `grid` must be NULL or a live grid handle.
size_t cnls_grid_len(const struct CnlsGrid *grid);

// Node spacing, or NaN for NULL.
//
// # Safety
// `grid` must be NULL or a live grid handle.
double cnls_grid_spacing(const struct CnlsGrid *grid);

// Field from `len` node values (`re[i] + i·im[i]`); `im` may be NULL for a real field.
//
// # Safety
// `re` (and `im` if non-NULL) must point to `len` readable doubles.
enum CnlsStatus cnls_field_from_values(const struct CnlsGrid *grid,
                                       const double *re,
                                       const double *im,
                                       size_t len,
                                       struct CnlsField **out);

// `a·exp(-r²/(2 width²))`.
//
// # Safety
// `grid` must be a live grid handle and `out` writable.
enum CnlsStatus cnls_field_gaussian(const struct CnlsGrid *grid,
                                    double a,
                                    double width,
                                    struct CnlsField **out);

// The ground state `W(r) = (1 + r²/8)^{-1}` sampled on `grid`.
//
// # Safety
// `grid` must be a live grid handle and `out` writable.
enum CnlsStatus cnls_field_ground_state(const struct CnlsGrid *grid, struct CnlsField **out);

// Rescaled, smoothly truncated ground state `a·λ W(λ r)·χ(r / r_cut)`.
//
// # Safety
// `grid` must be a live grid handle and `out` writable.
enum CnlsStatus cnls_field_rescaled_w(const struct CnlsGrid *grid,
                                      double a,
                                      double lam,
                                      double r_cut,
                                      struct CnlsField **out);

// # Safety
// `field` must come from this library and not be used afterwards. NULL is ignored.
void cnls_field_free(struct CnlsField *field);

// Number of nodes, or 0 for NULL.
//
// # Safety
// `field` must be NULL or a live field handle.
size_t cnls_field_len(const struct CnlsField *field);

// Copies node values out; `len` must equal [`cnls_field_len`]. `im` may be NULL.
//
// # Safety
// `re` (and `im` if non-NULL) must point to `len` writable doubles.
enum CnlsStatus cnls_field_values(const struct CnlsField *field,
                                  double *re,
                                  double *im,
                                  size_t len);

// # Safety
// `field` must be a live field handle and `out` writable.
enum CnlsStatus cnls_norms(const struct CnlsField *field, struct CnlsNorms *out);

// `K_{α,β}`; the pair must lie in the admissible cone.
//
// # Safety
// `field` must be a live field handle and `out` writable.
enum CnlsStatus cnls_k(const struct CnlsField *field, double alpha, double beta, double *out);

// `¼ (‖∇u‖ / ‖u‖_{L⁴})⁴`.
//
// # Safety
// `field` must be a live field handle and `out` writable.
enum CnlsStatus cnls_sobolev_quotient(const struct CnlsField *field, double *out);

// Region label with the canonical pair against threshold `m` (`m <= 0` selects `8π²/3`).
//
// # Safety
// `field` must be a live field handle and `out` writable.
enum CnlsStatus cnls_classify(const struct CnlsField *field, double m, enum CnlsLabel *out);

// Free Crank–Nicolson step `e^{iτΔ}` (τ may be negative); writes a new field.
//
// # Safety
// `field` must be a live field handle and `out` writable.
enum CnlsStatus cnls_linear_step(const struct CnlsField *field, double tau, struct CnlsField **out);

// One Strang step of the full equation; writes a new field.
//
// # Safety
// `field` must be a live field handle and `out` writable.
enum CnlsStatus cnls_strang_step(const struct CnlsField *field, double tau, struct CnlsField **out);

struct CnlsSolverConfig cnls_solver_defaults(void);

// Adaptive evolution to `cfg.t_end` or breakdown. Writes the outcome, the
// final (or detection) time and the last recorded field.
//
// # Safety
// `field` must be a live field handle; `cfg`, `outcome`, `t` and
// `final_field` must be valid pointers.
enum CnlsStatus cnls_evolve(const struct CnlsField *field,
                            const struct CnlsSolverConfig *cfg,
                            enum CnlsOutcome *outcome,
                            double *t,
                            struct CnlsField **final_field);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CNLS_LAB_H */
