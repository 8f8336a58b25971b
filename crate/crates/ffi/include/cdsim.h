#ifndef CDSIM_H
#define CDSIM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CdsimStatus {
  CDSIM_STATUS_OK = 0,
  CDSIM_STATUS_NULL_POINTER = 1,
  /**
   * Parameters or configuration rejected, including the cutoff inequality.
   */
  CDSIM_STATUS_INVALID_CONFIG = 2,
  /**
   * A runtime invariant of the simulation failed.
   */
  CDSIM_STATUS_INVARIANT_VIOLATION = 3,
  CDSIM_STATUS_IO = 4,
  CDSIM_STATUS_BUFFER_TOO_SMALL = 5,
  CDSIM_STATUS_INVALID_UTF8 = 6,
  CDSIM_STATUS_PANIC = 7,
  CDSIM_STATUS_OTHER = 8,
} CdsimStatus;

typedef enum CdsimTopology {
  CDSIM_TOPOLOGY_CHAIN = 0,
  CDSIM_TOPOLOGY_HONEYCOMB = 1,
  CDSIM_TOPOLOGY_SQUARE = 2,
  CDSIM_TOPOLOGY_TRIANGULAR = 3,
} CdsimTopology;

/**
 * Opaque network handle.
 */
typedef struct CdsimNetwork CdsimNetwork;

/**
 * One parameter point. `ny` is ignored for chains.
 */
typedef struct CdsimParams {
  enum CdsimTopology topology;
  bool periodic;
  uint32_t nx;
  uint32_t ny;
  double p_gen;
  double p_swap;
  /**
   * Coherence time in time steps.
   */
  double coherence_time;
  double f_new;
  double f_min;
  uint32_t t_cut;
  uint32_t max_swap_distance;
  double q;
} CdsimParams;

typedef struct CdsimEstimate {
  uint32_t node;
  double mean;
  double std;
  double band6;
  bool steady;
} CdsimEstimate;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *cdsim_last_error_message(void);

/**
 * Largest cutoff allowed by the cutoff inequality.
 *
 * # Safety
 * `out` must be null or valid for writes.
 */
enum CdsimStatus cdsim_max_cutoff(double coherence_time,
                                  double f_new,
                                  double f_min,
                                  uint32_t max_swap_distance,
                                  uint32_t *out);

/**
 * Largest swap distance allowed by the cutoff inequality for `t_cut`.
 *
 * # Safety
 * `out` must be null or valid for writes.
 */
enum CdsimStatus cdsim_max_swap_distance(double coherence_time,
                                         uint32_t t_cut,
                                         double f_new,
                                         double f_min,
                                         uint32_t *out);

/**
 * Fidelity after `dt` steps of depolarizing decay.
 */
double cdsim_decay(double f, double dt, double coherence_time);

/**
 * Fidelity of the link produced by swapping two Werner links.
 */
double cdsim_swap_fidelity(double f1, double f2);

/**
 * Fidelity at time `t` of a link built from `m` elementary links whose
 * birth times add up to `birth_sum`.
 */
double cdsim_link_fidelity(double f_new,
                           uint32_t m,
                           uint64_t birth_sum,
                           uint64_t t,
                           double coherence_time);

/**
 * Creates an empty network. The first [`cdsim_network_step`] runs time 0.
 *
 * # Safety
 * `params` must be null or point to a valid `CdsimParams`; `out` must be
 * null or valid for writes.
 */
enum CdsimStatus cdsim_network_new(const struct CdsimParams *params,
                                   uint64_t seed,
                                   struct CdsimNetwork **out);

/**
 * Releases a network. Null is ignored.
 *
 * # Safety
 * `network` must be null or a handle from [`cdsim_network_new`] that has not
 * been freed.
 */
void cdsim_network_free(struct CdsimNetwork *network);

/**
 * Runs one protocol step and checks the metric bounds.
 *
 * # Safety
 * `network` must be null or a live handle.
 */
enum CdsimStatus cdsim_network_step(struct CdsimNetwork *network);

/**
 * Number of nodes, or 0 for a null handle.
 *
 * # Safety
 * `network` must be null or a live handle.
 */
size_t cdsim_network_node_count(const struct CdsimNetwork *network);

/**
 * Number of live links, or 0 for a null handle.
 *
 * # Safety
 * `network` must be null or a live handle.
 */
size_t cdsim_network_link_count(const struct CdsimNetwork *network);

/**
 * Number of steps run so far.
 *
 * # Safety
 * `network` must be null or a live handle.
 */
uint64_t cdsim_network_steps(const struct CdsimNetwork *network);

/**
 * Copies the per-node virtual neighborhood sizes and virtual degrees after
 * the latest step into `v` and `k`, each holding `len` entries.
 *
 * # Safety
 * `network` must be null or a live handle; `v` and `k` must be null or valid
 * for `len` writes.
 */
enum CdsimStatus cdsim_network_metrics(const struct CdsimNetwork *network,
                                       uint32_t *v,
                                       uint32_t *k,
                                       size_t len);

/**
 * Steady-state estimates of `v` and `k` for one node from `realizations`
 * independent runs of the default schedule.
 *
 * # Safety
 * `params` must be null or valid; `out_v` and `out_k` must be null or valid
 * for writes.
 */
enum CdsimStatus cdsim_estimate(const struct CdsimParams *params,
                                size_t realizations,
                                uint64_t seed,
                                uint32_t node,
                                struct CdsimEstimate *out_v,
                                struct CdsimEstimate *out_k);

/**
 * Loads an experiment file, runs it and writes the CSV and its metadata.
 *
 * # Safety
 * Both paths must be null or NUL-terminated strings.
 */
enum CdsimStatus cdsim_run_sweep(const char *config_path, const char *csv_path);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CDSIM_H */
