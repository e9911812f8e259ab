#ifndef RECURLAB_H
#define RECURLAB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum RlStatus {
  RL_STATUS_OK = 0,
  RL_STATUS_NULL_POINTER = 1,
  RL_STATUS_INVALID_ARGUMENT = 2,
  RL_STATUS_SPACE_MISMATCH = 3,
  /**
   * Parameters below what the grid can resolve.
   */
  RL_STATUS_INFEASIBLE = 4,
  RL_STATUS_IO = 5,
  RL_STATUS_GUARANTEE_VIOLATED = 6,
  RL_STATUS_PANIC = 7,
} RlStatus;

/**
 * A bijection of the cells of a dyadic grid.
 */
typedef struct RlPermutation RlPermutation;

/**
 * A measure-preserving map.
 */
typedef struct RlSystem RlSystem;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or null. Valid until the
 * next failing call on the same thread.
 */
const char *rl_last_error_message(void);

/**
 * Identity map on the `dim`-torus.
 *
 * # Safety
 * `out` must be valid for one write.
 */
enum RlStatus rl_system_identity(size_t dim, struct RlSystem **out);

/**
 * Rotation `x -> x + alpha` on the `dim`-torus.
 *
 * # Safety
 * `alpha` must hold `dim` values and `out` must be valid for one write.
 */
enum RlStatus rl_system_rotation(const double *alpha, size_t dim, struct RlSystem **out);

/**
 * Toral automorphism with the row-major `dim x dim` integer matrix.
 *
 * # Safety
 * `matrix` must hold `dim * dim` values and `out` must be valid for one write.
 */
enum RlStatus rl_system_automorphism(const int64_t *matrix, size_t dim, struct RlSystem **out);

/**
 * The cat map `[[2, 1], [1, 1]]` on the 2-torus.
 *
 * # Safety
 * `out` must be valid for one write.
 */
enum RlStatus rl_system_cat(struct RlSystem **out);

/**
 * The map acting on cell centers by `perm`. The permutation is copied.
 *
 * # Safety
 * `perm` must be a live handle and `out` must be valid for one write.
 */
enum RlStatus rl_system_from_permutation(const struct RlPermutation *perm, struct RlSystem **out);

/**
 * # Safety
 * `sys` must be null or a handle not yet freed.
 */
void rl_system_free(struct RlSystem *sys);

/**
 * Dimension of the state space, or 0 for a null handle.
 *
 * # Safety
 * `sys` must be null or a live handle.
 */
size_t rl_system_dim(const struct RlSystem *sys);

/**
 * Writes `T^n x` into `out`.
 *
 * # Safety
 * `x` and `out` must each hold `dim` values.
 */
enum RlStatus rl_iterate(const struct RlSystem *sys,
                         const double *x,
                         size_t dim,
                         uint64_t n,
                         double *out);

/**
 * `min_{start <= n <= end} n^beta d(T^n x, x)` with `f = Id`.
 *
 * # Safety
 * `x` must hold `dim` values and `out` must be valid for one write.
 */
enum RlStatus rl_recurrence_score(const struct RlSystem *sys,
                                  const double *x,
                                  size_t dim,
                                  double beta,
                                  uint64_t start,
                                  uint64_t end,
                                  double *out);

/**
 * `min_{start <= n <= end} n^beta d(T^n x, y)` with `f = Id`.
 *
 * # Safety
 * `x` and `y` must hold `dim` values and `out` must be valid for one write.
 */
enum RlStatus rl_hitting_score(const struct RlSystem *sys,
                               const double *x,
                               const double *y,
                               size_t dim,
                               double beta,
                               uint64_t start,
                               uint64_t end,
                               double *out);

/**
 * Nearest bijection of the level-`level` grid to `sys`.
 *
 * # Safety
 * `sys` must be a live handle and `out` must be valid for one write.
 */
enum RlStatus rl_discretize(const struct RlSystem *sys, uint32_t level, struct RlPermutation **out);

/**
 * Number of cells.
 *
 * # Safety
 * `perm` must be null or a live handle.
 */
size_t rl_permutation_len(const struct RlPermutation *perm);

/**
 * Copies the forward cell array into `out`, which holds `len` entries.
 *
 * # Safety
 * `out` must be valid for `len` writes.
 */
enum RlStatus rl_permutation_forward(const struct RlPermutation *perm, uint32_t *out, size_t len);

/**
 * Fraction of cells whose cycle length is at most `period`.
 *
 * # Safety
 * `perm` must be a live handle and `out` must be valid for one write.
 */
enum RlStatus rl_period_fraction(const struct RlPermutation *perm, uint64_t period, double *out);

/**
 * Tower redirect of `perm` at scale `delta`. Writes the new permutation
 * and its sup displacement from `perm`; `max_displacement` may be null.
 *
 * # Safety
 * `perm` must be a live handle and `out` must be valid for one write.
 */
enum RlStatus rl_towerize(const struct RlPermutation *perm,
                          double delta,
                          double epsilon,
                          struct RlPermutation **out,
                          double *max_displacement);

/**
 * Reads a GPRM file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` valid for one write.
 */
enum RlStatus rl_permutation_load(const char *path_c, struct RlPermutation **out);

/**
 * Writes a GPRM file.
 *
 * # Safety
 * `perm` must be a live handle and `path` a NUL-terminated string.
 */
enum RlStatus rl_permutation_save(const struct RlPermutation *perm, const char *path_c);

/**
 * # Safety
 * `perm` must be null or a handle not yet freed.
 */
void rl_permutation_free(struct RlPermutation *perm);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RECURLAB_H */
