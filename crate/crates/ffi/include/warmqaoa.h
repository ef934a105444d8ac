#ifndef WARMQAOA_H
#define WARMQAOA_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes shared by every function in this library.
typedef enum WqStatus {
  WQ_STATUS_OK = 0,
  WQ_STATUS_NULL_POINTER = 1,
  WQ_STATUS_INVALID_ARGUMENT = 2,
  WQ_STATUS_INVALID_INSTANCE = 3,
  WQ_STATUS_PARSE = 4,
  WQ_STATUS_TOO_MANY_QUBITS = 5,
  WQ_STATUS_COMPUTATION = 6,
  WQ_STATUS_PANIC = 7,
} WqStatus;

typedef enum WqVariant {
  WQ_VARIANT_STANDARD = 0,
  WQ_VARIANT_WARMSTART = 1,
  // Uses the `delta0` / `delta1` arguments of [`wq_run_qaoa`].
  WQ_VARIANT_PREPROCESSED = 2,
} WqVariant;

// Opaque portfolio instance.
typedef struct WqInstance WqInstance;

// Extremes of the unpenalized cost over selections meeting the budget.
typedef struct WqSpectrum {
  double fc_min;
  double fc_max;
  // Basis index of the optimum; bit `i` is asset `i`.
  uint64_t argmin_index;
  uint64_t feasible_count;
  // Number of selections tied with the optimum.
  uint64_t optimal_count;
} WqSpectrum;

typedef struct WqQaoaOptions {
  uint32_t restarts;
  uint32_t max_evals_per_layer;
  uint64_t shots;
  uint64_t seed;
  // Nonzero scores the exact output distribution instead of sampled shots.
  uint8_t exact_scoring;
} WqQaoaOptions;

typedef struct WqQaoaResult {
  double approx_ratio;
  double ground_state_probability;
  double expectation;
  // Free qubits after rounding, or -1 for variants without rounding.
  int64_t n_free;
  // Objective evaluations at the requested depth.
  uint64_t evaluations;
} WqQaoaResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or null. The pointer is
// owned by the library and valid until the next call on the same thread.
const char *wq_last_error(void);

// Library version as a static NUL-terminated string.
const char *wq_version(void);

// Parses an instance from NUL-terminated JSON.
//
// # Safety
// `json` must be a valid C string and `out` a valid pointer.
enum WqStatus wq_instance_from_json(const char *json, struct WqInstance **out);

// The bundled ten-asset DAX instance.
//
// # Safety
// `out` must be a valid pointer.
enum WqStatus wq_instance_appendix(struct WqInstance **out);

// Releases an instance; null is ignored.
//
// # Safety
// `inst` must come from a `wq_instance_*` constructor and not be freed twice.
void wq_instance_free(struct WqInstance *inst);

// # Safety
// `inst` and `out` must be valid pointers.
enum WqStatus wq_instance_n_assets(const struct WqInstance *inst, size_t *out);

// Portfolio cost without the budget penalty.
//
// # Safety
// `bits` must point to `len` bytes, each 0 or 1; `inst` and `out` must be valid.
enum WqStatus wq_portfolio_cost(const struct WqInstance *inst,
                                const uint8_t *bits,
                                size_t len,
                                double *out);

// Portfolio cost plus the quadratic budget penalty.
//
// # Safety
// Same contract as [`wq_portfolio_cost`].
enum WqStatus wq_penalized_cost(const struct WqInstance *inst,
                                const uint8_t *bits,
                                size_t len,
                                double *out);

// Solves the continuous relaxation; writes `len` values into `x_out`.
// `objective_out` may be null.
//
// # Safety
// `x_out` must have room for `len` doubles, `len` equal to the asset count.
enum WqStatus wq_relax(const struct WqInstance *inst,
                       double *x_out,
                       size_t len,
                       double *objective_out);

// Brute-force spectrum over all budget-feasible selections.
//
// # Safety
// `inst` and `out` must be valid pointers.
enum WqStatus wq_spectrum(const struct WqInstance *inst, struct WqSpectrum *out);

// Defaults: 10 restarts, 2000 evaluations per layer, 1000 shots, seed 0, shot scoring.
struct WqQaoaOptions wq_qaoa_options_default(void);

// Optimizes depths `0..=depth` with warm-seeded restarts and scores depth
// `depth` on the full problem. `options` may be null for the defaults;
// `delta0`/`delta1` are read only for [`WqVariant::Preprocessed`].
//
// # Safety
// `inst` and `out` must be valid pointers; `options` must be null or valid.
enum WqStatus wq_run_qaoa(const struct WqInstance *inst,
                          enum WqVariant variant,
                          double delta0,
                          double delta1,
                          size_t depth,
                          const struct WqQaoaOptions *options,
                          struct WqQaoaResult *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* WARMQAOA_H */
