#ifndef VNRECUR_H
#define VNRECUR_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes. The nonzero values 2–4 agree with the CLI exit codes.
 */
typedef enum VnStatus {
  VnStatus_Ok = 0,
  VnStatus_NullPointer = 1,
  VnStatus_InvalidInput = 2,
  VnStatus_InvariantFailure = 3,
  VnStatus_Io = 4,
  VnStatus_Panic = 5,
} VnStatus;

/**
 * A block algebra `⊕ M_{n_k}` with its weighted trace.
 */
typedef struct VnAlgebra VnAlgebra;

/**
 * An element of a [`VnAlgebra`].
 */
typedef struct VnElement VnElement;

/**
 * A Hamiltonian system on a [`VnAlgebra`].
 */
typedef struct VnSystem VnSystem;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *vn_version(void);

/**
 * Message of the last failed call on this thread, or null. The pointer is
 * valid until the next failing call on the same thread.
 */
const char *vn_last_error_message(void);

/**
 * Creates an algebra with `n_blocks` blocks of sizes `dims`. `weights` may
 * be null for the default weights `n_k² / Σ n_j²`.
 *
 * # Safety
 * `dims` (and `weights` unless null) must point to `n_blocks` values; `out`
 * must be a valid place to store the handle.
 */
enum VnStatus vn_algebra_new(const uintptr_t *dims,
                             const double *weights,
                             uintptr_t n_blocks,
                             struct VnAlgebra **out);

/**
 * # Safety
 * `alg` must be null or a handle from [`vn_algebra_new`] not yet freed.
 */
void vn_algebra_free(struct VnAlgebra *alg);

/**
 * `Σ n_k²`, the number of packed entries of an element; 0 for null.
 *
 * # Safety
 * `alg` must be null or a live algebra handle.
 */
uintptr_t vn_algebra_dimension(const struct VnAlgebra *alg);

/**
 * Builds an element from packed entries; `im` may be null for a real
 * element.
 *
 * # Safety
 * `re` (and `im` unless null) must point to `len` values; `alg` must be a
 * live algebra handle and `out` a valid place to store the handle.
 */
enum VnStatus vn_element_new(const struct VnAlgebra *alg,
                             const double *re,
                             const double *im,
                             uintptr_t len,
                             struct VnElement **out);

/**
 * # Safety
 * `el` must be null or a handle from this library not yet freed.
 */
void vn_element_free(struct VnElement *el);

/**
 * Copies the packed entries of `el` into `re` and `im` (each of length
 * `len`, which must equal the algebra dimension).
 *
 * # Safety
 * `el` must be a live element handle; `re` and `im` must have room for
 * `len` values.
 */
enum VnStatus vn_element_entries(const struct VnElement *el, double *re, double *im, uintptr_t len);

/**
 * Normalized weighted trace `tr(A)`.
 *
 * # Safety
 * `alg` and `el` must be live handles; `re` and `im` valid places to store
 * the result.
 */
enum VnStatus vn_element_trace(const struct VnAlgebra *alg,
                               const struct VnElement *el,
                               double *re,
                               double *im);

/**
 * Hamiltonian system `(𝔐, H)`; `H` must be Hermitian.
 *
 * # Safety
 * `alg` and `hamiltonian` must be live handles and `out` a valid place to
 * store the handle.
 */
enum VnStatus vn_system_new(const struct VnAlgebra *alg,
                            const struct VnElement *hamiltonian,
                            struct VnSystem **out);

/**
 * # Safety
 * `sys` must be null or a handle from [`vn_system_new`] not yet freed.
 */
void vn_system_free(struct VnSystem *sys);

/**
 * `τ_t(A) = U_t* A U_t` as a new element.
 *
 * # Safety
 * `sys` and `el` must be live handles and `out` a valid place to store the
 * handle.
 */
enum VnStatus vn_system_evolve(const struct VnSystem *sys,
                               double t,
                               const struct VnElement *el,
                               struct VnElement **out);

/**
 * Samples `tr(P τ_t(P))` at the `n` times in `t_grid` into `values`.
 * The algebra must be a factor and `p` a projection.
 *
 * # Safety
 * `sys` and `p` must be live handles; `t_grid` and `values` must hold `n`
 * values.
 */
enum VnStatus vn_continuous_scan(const struct VnSystem *sys,
                                 const struct VnElement *p,
                                 const double *t_grid,
                                 uintptr_t n,
                                 double *values);

/**
 * Overlaps `μ(S ∩ T⁻ⁿ(S))` for `n = 1..=n_max` of a measure-preserving map
 * on `m` points. `first` receives the least `n` with a positive overlap,
 * or 0 when there is none in range.
 *
 * # Safety
 * `weights` and `map` must hold `m` values, `subset` `subset_len` values,
 * `overlaps` room for `n_max` values; `first` must be valid.
 */
enum VnStatus vn_classical_recurrence(const double *weights,
                                      const uintptr_t *map,
                                      uintptr_t m,
                                      const uintptr_t *subset,
                                      uintptr_t subset_len,
                                      uintptr_t n_max,
                                      double *overlaps,
                                      uintptr_t *first);

/**
 * Runs a scenario file, or a bundled scenario by name, writing its outputs
 * to `out_dir`. `tol ≤ 0` selects `VNRECUR_TOL` or the built-in default.
 *
 * # Safety
 * `scenario` and `out_dir` must be NUL-terminated strings.
 */
enum VnStatus vn_scenario_run(const char *scenario, const char *out_dir, double tol);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* VNRECUR_H */
