#ifndef OODLENS_H
#define OODLENS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum OodStatus {
  OOD_STATUS_OK = 0,
  OOD_STATUS_NULL_POINTER = 1,
  OOD_STATUS_INVALID_INPUT = 2,
  OOD_STATUS_PRECONDITION = 3,
  OOD_STATUS_INFEASIBLE = 4,
  OOD_STATUS_DEGENERATE = 5,
  OOD_STATUS_UNDEFINED_METRIC = 6,
  OOD_STATUS_INTERNAL = 7,
  OOD_STATUS_PANIC = 8,
} OodStatus;

/*
 Logistic-regression family over one feature matrix.
 */
typedef struct OodDetector OodDetector;

/*
 Grid assignment of a 2D point set.
 */
typedef struct OodLayout OodLayout;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the last failed call on this thread, or null. Valid until the
 next call into the library on the same thread.
 */
const char *oodlens_last_error(void);

/*
 Library version as a static nul-terminated string.
 */
const char *oodlens_version(void);

/*
 Solves the `n × n` assignment problem on `costs`. Writes the column of
 each row to `out_perm[n]` and the total cost to `out_cost`.

 # Safety
 `costs` must point to `n*n` doubles, `out_perm` to `n` writable slots.
 */
enum OodStatus oodlens_lap_solve_dense(const double *costs,
                                       size_t n,
                                       size_t *out_perm,
                                       double *out_cost);

/*
 Packs `n_points` points (`xy[2*n_points]`, interleaved) into the smallest
 square grid holding them, using the kNN-sparsified solver with `k`
 neighbours (clamped to the cell count). Set `with_baseline` to also solve
 the dense problem and record the cost ratio.

 # Safety
 `xy` must point to `2*n_points` doubles; `out` must be writable.
 */
enum OodStatus oodlens_layout_compute(const double *xy,
                                      size_t n_points,
                                      size_t k,
                                      bool with_baseline,
                                      struct OodLayout **out);

/*
 Grid rows and columns.

 # Safety
 `layout` must come from [`oodlens_layout_compute`]; outputs must be writable.
 */
enum OodStatus oodlens_layout_grid(const struct OodLayout *layout, size_t *out_m, size_t *out_n);

/*
 Row-major cell index of every input point.

 # Safety
 `out_cells` must have room for `len` entries; `len` must equal the point count.
 */
enum OodStatus oodlens_layout_cells(const struct OodLayout *layout, size_t *out_cells, size_t len);

/*
 Total assignment cost, the k actually used and the cost ratio (NaN unless
 the baseline was requested).

 # Safety
 `layout` must come from [`oodlens_layout_compute`]; outputs must be writable.
 */
enum OodStatus oodlens_layout_stats(const struct OodLayout *layout,
                                    double *out_total_cost,
                                    size_t *out_k,
                                    double *out_cr);

/*
 # Safety
 `layout` must come from [`oodlens_layout_compute`] and not be used afterwards. Null is ignored.
 */
void oodlens_layout_free(struct OodLayout *layout);

/*
 Entropy of the averaged class distribution for each sample.
 `probs` holds `n_samples × n_models × n_classes` probabilities.

 # Safety
 `probs` must hold the stated number of doubles, `out_scores` `n_samples`.
 */
enum OodStatus oodlens_entropy_scores(const double *probs,
                                      size_t n_samples,
                                      size_t n_models,
                                      size_t n_classes,
                                      double *out_scores);

/*
 # Safety
 `scores` and `is_ood` must hold `n` entries; `out` must be writable.
 */
enum OodStatus oodlens_auroc(const double *scores, const uint8_t *is_ood, size_t n, double *out);

/*
 # Safety
 `scores` and `is_ood` must hold `n` entries; `out` must be writable.
 */
enum OodStatus oodlens_aupr(const double *scores, const uint8_t *is_ood, size_t n, double *out);

/*
 # Safety
 `scores` and `is_ood` must hold `n` entries; `out` must be writable.
 */
enum OodStatus oodlens_prec_at_k(const double *scores,
                                 const uint8_t *is_ood,
                                 size_t n,
                                 size_t k,
                                 double *out);

/*
 Trains `n_models` classifiers (regularization coefficients spread over
 1e-5..1e5) on `x[n × dim]` with class labels in `0..n_classes`.

 # Safety
 `x` must hold `n*dim` doubles, `labels` `n` entries; `out` must be writable.
 */
enum OodStatus oodlens_detector_train(const double *x,
                                      size_t n,
                                      size_t dim,
                                      const size_t *labels,
                                      size_t n_classes,
                                      size_t n_models,
                                      struct OodDetector **out);

/*
 Number of classifiers in the family (duplicated coefficients collapse).

 # Safety
 `detector` must come from [`oodlens_detector_train`].
 */
enum OodStatus oodlens_detector_size(const struct OodDetector *detector, size_t *out);

/*
 OoD score (nats), task confidence and predicted class for `x[n × dim]`.
 `out_confidence` and `out_class` may be null.

 # Safety
 `x` must hold `n*dim` doubles; non-null outputs must have room for `n` entries.
 */
enum OodStatus oodlens_detector_score(const struct OodDetector *detector,
                                      const double *x,
                                      size_t n,
                                      size_t dim,
                                      double *out_scores,
                                      double *out_confidence,
                                      size_t *out_class);

/*
 # Safety
 `detector` must come from [`oodlens_detector_train`] and not be used afterwards. Null is ignored.
 */
void oodlens_detector_free(struct OodDetector *detector);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* OODLENS_H */
