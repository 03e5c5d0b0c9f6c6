#ifndef NEXFAM_H
#define NEXFAM_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Primal update: contraction iteration to the scheduled accuracy.
 */
#define NEXFAM_PRIMAL_FIXED_POINT 0

/*
 Primal update: a single Newton step.
 */
#define NEXFAM_PRIMAL_NEWTON_STEP 1

/*
 Primal update: exact minimizer, quadratic models only.
 */
#define NEXFAM_PRIMAL_CLOSED_FORM 2

/*
 Graph, model and training set loaded from a bundle directory.
 */
typedef struct NexfamBundle NexfamBundle;

/*
 Undirected weighted graph.
 */
typedef struct NexfamGraph NexfamGraph;

/*
 Per-node likelihood (Gaussian or logistic).
 */
typedef struct NexfamModel NexfamModel;

/*
 Output of one primal-dual solve.
 */
typedef struct NexfamSolution NexfamSolution;

/*
 Solver settings; obtain defaults from `nexfam_solver_options_default`.
 */
typedef struct NexfamSolverOptions {
  double lambda;
  /*
   Primal step scale in (0, 1).
   */
  double tau;
  size_t max_iterations;
  /*
   Relative-change stopping threshold; zero or negative disables it.
   */
  double tolerance;
  /*
   One of the `NEXFAM_PRIMAL_*` constants.
   */
  int primal_update;
} NexfamSolverOptions;

/*
 Return code of every fallible call; zero means success.
 */
typedef int32_t NexfamStatus;

#define NEXFAM_OK 0

/*
 A required pointer argument was null.
 */
#define NEXFAM_ERR_NULL_POINTER 1

/*
 Bad argument values, shapes or configuration.
 */
#define NEXFAM_ERR_INVALID_ARGUMENT 2

/*
 The graph is not connected.
 */
#define NEXFAM_ERR_DISCONNECTED 3

/*
 The solver failed numerically (non-finite iterate, step-size or contraction violation).
 */
#define NEXFAM_ERR_NUMERICAL 4

/*
 A file could not be read or parsed.
 */
#define NEXFAM_ERR_IO 5

/*
 The caller's output buffer is shorter than the result.
 */
#define NEXFAM_ERR_BUFFER_TOO_SMALL 6

/*
 A Rust panic was caught at the boundary; the handle arguments should be considered lost.
 */
#define NEXFAM_ERR_PANIC 7

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the most recent failure on the calling thread, or null if none.
 The string stays valid until the next failing call on this thread.
 */
const char *nexfam_last_error(void);

/*
 Library version as a static NUL-terminated string.
 */
const char *nexfam_version(void);

/*
 Defaults: `lambda = 1`, `tau = 0.9`, 1000 iterations, no tolerance, fixed-point updates.
 */
struct NexfamSolverOptions nexfam_solver_options_default(void);

/*
 Builds a graph on nodes `0..node_count` from `edge_count` edges
 `(low[k], high[k], weight[k])`.

 # Safety
 `low`, `high` and `weight` must each point to `edge_count` readable values;
 `out` must be a valid pointer to write the handle to.
 */
NexfamStatus nexfam_graph_new(size_t node_count,
                              const size_t *low,
                              const size_t *high,
                              const double *weight,
                              size_t edge_count,
                              struct NexfamGraph **out);

/*
 # Safety
 `graph` must be null or a handle from `nexfam_graph_new` not yet freed.
 */
void nexfam_graph_free(struct NexfamGraph *graph);

/*
 # Safety
 `graph` must be a live handle and `out` writable.
 */
NexfamStatus nexfam_graph_counts(const struct NexfamGraph *graph, size_t *nodes, size_t *edges);

/*
 Total variation of the signal `w` (row-major `node_count x dim`).

 # Safety
 `graph` must be a live handle, `w` must hold `node_count * dim` values and `out` be writable.
 */
NexfamStatus nexfam_graph_tv_norm(const struct NexfamGraph *graph,
                                  const double *w,
                                  size_t dim,
                                  double *out);

/*
 Smallest nonzero Laplacian eigenvalue.

 # Safety
 `graph` must be a live handle and `out` writable.
 */
NexfamStatus nexfam_graph_spectral_gap(const struct NexfamGraph *graph, double *out);

/*
 Gaussian linear model. `features` is row-major `node_count x dim`;
 a NaN label marks an unobserved node; `variances` may be null (all ones).

 # Safety
 `features` must hold `node_count * dim` values, `labels` `node_count` values,
 `variances` null or `node_count` values; `out` must be writable.
 */
NexfamStatus nexfam_gaussian_model_new(size_t node_count,
                                       size_t dim,
                                       const double *features,
                                       const double *labels,
                                       const double *variances,
                                       struct NexfamModel **out);

/*
 Logistic model with labels `+1`, `-1` (or `0` for the negative class); NaN marks unobserved.

 # Safety
 `features` must hold `node_count * dim` values, `labels` `node_count` values;
 `out` must be writable.
 */
NexfamStatus nexfam_logistic_model_new(size_t node_count,
                                       size_t dim,
                                       const double *features,
                                       const double *labels,
                                       struct NexfamModel **out);

/*
 # Safety
 `model` must be null or a live model handle.
 */
void nexfam_model_free(struct NexfamModel *model);

/*
 Fits the network Lasso with the primal-dual solver. `training` lists the
 `training_len` labelled node indices.

 # Safety
 `graph` and `model` must be live handles, `training` must hold
 `training_len` values, `options` must be readable and `out` writable.
 */
NexfamStatus nexfam_solve(const struct NexfamGraph *graph,
                          const struct NexfamModel *model,
                          const size_t *training,
                          size_t training_len,
                          const struct NexfamSolverOptions *options,
                          struct NexfamSolution **out);

/*
 Loads a bundle directory written by `nexfam gen`.

 # Safety
 `dir` must be a NUL-terminated path and `out` writable.
 */
NexfamStatus nexfam_bundle_load(const char *dir, struct NexfamBundle **out);

/*
 Node count and signal dimension of a bundle.

 # Safety
 `bundle` must be a live handle; `nodes` and `dim` writable.
 */
NexfamStatus nexfam_bundle_shape(const struct NexfamBundle *bundle, size_t *nodes, size_t *dim);

/*
 Fits a loaded bundle with its own training set.

 # Safety
 `bundle` must be a live handle, `options` readable and `out` writable.
 */
NexfamStatus nexfam_bundle_solve(const struct NexfamBundle *bundle,
                                 const struct NexfamSolverOptions *options,
                                 struct NexfamSolution **out);

/*
 # Safety
 `bundle` must be null or a live bundle handle.
 */
void nexfam_bundle_free(struct NexfamBundle *bundle);

/*
 Copies the fitted weights (row-major `nodes x dim`) into `out`, which
 must have room for `capacity` values. `written` receives the number needed.

 # Safety
 `solution` must be a live handle, `out` writable for `capacity` values and `written` writable.
 */
NexfamStatus nexfam_solution_weights(const struct NexfamSolution *solution,
                                     double *out,
                                     size_t capacity,
                                     size_t *written);

/*
 Iterations run, whether the tolerance stopped the run, and the final objective.

 # Safety
 `solution` must be a live handle; the three output pointers writable.
 */
NexfamStatus nexfam_solution_summary(const struct NexfamSolution *solution,
                                     size_t *iterations,
                                     int *converged,
                                     double *objective);

/*
 # Safety
 `solution` must be null or a live solution handle.
 */
void nexfam_solution_free(struct NexfamSolution *solution);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NEXFAM_H */
