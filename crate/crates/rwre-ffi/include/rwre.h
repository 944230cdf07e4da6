/* C interface for the rwre simulation library. Generated by cbindgen. */

#ifndef RWRE_H
#define RWRE_H

/* This file is auto-generated; edit build.rs / src/lib.rs instead. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status codes returned by every fallible entry point.
typedef enum RwreStatus {
  RWRE_STATUS_OK = 0,
  RWRE_STATUS_NULL_POINTER = 1,
  RWRE_STATUS_INVALID_ARGUMENT = 2,
  RWRE_STATUS_NOT_DIFFUSIVE = 3,
  RWRE_STATUS_BUDGET_EXHAUSTED = 4,
  RWRE_STATUS_GEN_CAP_EXCEEDED = 5,
  RWRE_STATUS_DEGENERATE = 6,
  RWRE_STATUS_LOW_ACCEPTANCE = 7,
  RWRE_STATUS_INTERNAL = 8,
} RwreStatus;

// Opaque environment family handle.
typedef struct RwreFamily RwreFamily;

// Opaque pool of martingale-limit samples.
typedef struct RwrePool RwrePool;

// Opaque handle owning one simulated replica: the environment together with
// its edge local times.
typedef struct RwreSim RwreSim;

// Regime diagnostics as plain data. `kappa` and `c0` are NaN when the
// corresponding flag is zero.
typedef struct RwreRegimeReport {
  double psi1;
  double psi_prime1;
  double psi2;
  double kappa;
  int32_t has_kappa;
  double c0;
  int32_t has_c0;
  int32_t diffusive;
  int32_t assumption1_ok;
  int32_t assumption2_ok;
} RwreRegimeReport;

// Per-generation observables of a simulated replica.
typedef struct RwreObservables {
  uint64_t range;
  uint64_t martingale;
  uint64_t local_time;
} RwreObservables;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Static, human-readable description of a status code.
const char *rwre_status_message(enum RwreStatus status);

// Create a d-ary Gaussian family handle. The displacement mean is derived
// from the criticality normalization, as in the library.
//
// # Safety
// `out` must be a valid pointer; on success it receives an owned handle that
// must be released with `rwre_family_free`.
enum RwreStatus rwre_family_new_gaussian(uint32_t d, double sigma2, struct RwreFamily **out);

// # Safety
// `family` must be a handle from [`rwre_family_new_gaussian`] (or null).
void rwre_family_free(struct RwreFamily *family);

// Evaluate the log-Laplace transform `psi(t)` of the family.
//
// # Safety
// `family` and `out` must be valid pointers.
enum RwreStatus rwre_family_psi(const struct RwreFamily *family, double t, double *out);

// Fill the regime diagnostics for a family.
//
// # Safety
// `family` and `out` must be valid pointers.
enum RwreStatus rwre_regime_report(const struct RwreFamily *family, struct RwreRegimeReport *out);

// Simulate one replica: `excursions` excursions of the walk (backend 0,
// generation-capped at `gen_cap`) or the direct range construction down to
// `max_generation` (backend 1). The replica is reproducible from
// `(seed, replica)`.
//
// # Safety
// `family` and `out` must be valid pointers; the returned handle must be
// released with [`rwre_sim_free`].
enum RwreStatus rwre_simulate(const struct RwreFamily *family,
                              uint64_t seed,
                              uint64_t replica,
                              uint32_t excursions,
                              uint32_t max_generation,
                              uint32_t backend,
                              uint32_t gen_cap,
                              size_t vertex_budget,
                              struct RwreSim **out);

// # Safety
// `sim` must be a handle from [`rwre_simulate`] (or null).
void rwre_sim_free(struct RwreSim *sim);

// Range size, additive-martingale value and local time of one generation.
//
// # Safety
// `sim` and `out` must be valid pointers.
enum RwreStatus rwre_sim_observables(const struct RwreSim *sim,
                                     uint32_t generation,
                                     struct RwreObservables *out);

// Draw one uniform vertex pair from a generation of the range and report its
// coalescence depth. `*out_found` is 0 when the generation is empty (a
// conditioning rejection), in which case `*out_lca_depth` is untouched.
//
// # Safety
// `sim`, `out_found` and `out_lca_depth` must be valid pointers.
enum RwreStatus rwre_sim_pair_coalescence(const struct RwreSim *sim,
                                          uint32_t generation,
                                          uint64_t seed,
                                          int32_t *out_found,
                                          uint32_t *out_lca_depth);

// Build a pool of martingale-limit proxy samples at the given depth.
//
// # Safety
// `family` and `out` must be valid; release the handle with
// [`rwre_pool_free`].
enum RwreStatus rwre_pool_new(const struct RwreFamily *family,
                              uint32_t depth,
                              size_t size,
                              uint64_t seed,
                              struct RwrePool **out);

// # Safety
// `pool` must be a handle from [`rwre_pool_new`] (or null).
void rwre_pool_free(struct RwrePool *pool);

// Mean and second moment of the pool.
//
// # Safety
// All pointers must be valid.
enum RwreStatus rwre_pool_stats(const struct RwrePool *pool,
                                double *out_mean,
                                double *out_second_moment);

// One exact transition of the quadratic-mechanism branching process.
//
// # Safety
// `out` must be a valid pointer.
enum RwreStatus rwre_feller_step(double y, double delta, double c0, uint64_t seed, double *out);

// Pmf of the Polya-Aeppli cluster-count limit.
//
// # Safety
// `out` must be a valid pointer.
enum RwreStatus rwre_polya_aeppli_pmf(uint64_t ell,
                                      double a,
                                      double b,
                                      double c0,
                                      double w,
                                      double *out);

// Closed-form recent-past coalescence limit for single-excursion sampling.
//
// # Safety
// `out` must be a valid pointer.
enum RwreStatus rwre_single_excursion_limit(double a, double b, double *out);

// Monte Carlo recent-past coalescence limit over a sample pool.
//
// # Safety
// `pool`, `out_value` and `out_se` must be valid pointers.
enum RwreStatus rwre_recent_past_limit(double a,
                                       double b,
                                       double c0,
                                       const struct RwrePool *pool,
                                       uint64_t samples,
                                       uint64_t seed,
                                       double *out_value,
                                       double *out_se);

// Monte Carlo remote-past coalescence limit (head probability) at
// separation generation `m`.
//
// # Safety
// `family`, `pool`, `out_head` and `out_se` must be valid pointers.
enum RwreStatus rwre_remote_past_limit(const struct RwreFamily *family,
                                       uint32_t m,
                                       double b,
                                       double c0,
                                       const struct RwrePool *pool,
                                       uint64_t replicas,
                                       uint64_t seed,
                                       double *out_head,
                                       double *out_se);

// Laplace transform of the limiting rescaled martingale value.
//
// # Safety
// `pool` and `out` must be valid pointers.
enum RwreStatus rwre_martingale_limit_laplace(double theta,
                                              double a,
                                              double c0,
                                              const struct RwrePool *pool,
                                              double *out);

// Monte Carlo estimate of the range-density constant
// `c_inf = E[(sum_j e^{-S_j})^{-1}]` with adaptive truncation.
//
// # Safety
// `family`, `out_value` and `out_se` must be valid pointers.
enum RwreStatus rwre_estimate_cinf(const struct RwreFamily *family,
                                   size_t replicas,
                                   uint64_t seed,
                                   double *out_value,
                                   double *out_se);

// Backend selector value for the step-by-step walk.
uint32_t rwre_backend_walk(void);

// Backend selector value for the direct range construction.
uint32_t rwre_backend_gw(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RWRE_H */
