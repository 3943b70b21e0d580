#ifndef LANN_H
#define LANN_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum LannStatus {
  LANN_STATUS_OK = 0,
  LANN_STATUS_NULL_POINTER = 1,
  LANN_STATUS_INVALID_ARGUMENT = 2,
  LANN_STATUS_INVALID_DIMENSION = 3,
  LANN_STATUS_INSUFFICIENT_POINTS = 4,
  LANN_STATUS_DEGENERATE_METRIC = 5,
  LANN_STATUS_INVALID_DATASET = 6,
  LANN_STATUS_IO = 7,
  LANN_STATUS_PARSE = 8,
  LANN_STATUS_MODEL_FORMAT = 9,
  LANN_STATUS_PANIC = 10,
} LannStatus;

typedef enum LannSymmetrize {
  LANN_SYMMETRIZE_MEAN = 0,
  LANN_SYMMETRIZE_MIN = 1,
  LANN_SYMMETRIZE_NONE = 2,
} LannSymmetrize;

typedef enum LannAlgorithm {
  LANN_ALGORITHM_LANN = 0,
  LANN_ALGORITHM_KNN = 1,
} LannAlgorithm;

/**
 * Opaque labeled dataset.
 */
typedef struct LannDataset LannDataset;

/**
 * Opaque trained model.
 */
typedef struct LannModel LannModel;

/**
 * Training and inference settings, mirrored from the Rust side.
 */
typedef struct LannHyperparams {
  size_t k;
  double beta;
  double learning_rate;
  size_t epochs;
  double epsilon;
  uint64_t seed;
} LannHyperparams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL if none. The
 * pointer stays valid until the next failing call on the same thread.
 */
const char *lann_last_error_message(void);

struct LannHyperparams lann_hyperparams_default(void);

/**
 * Builds a dataset from `m * n` row-major points and `m` labels in
 * `0..n_classes`.
 */
enum LannStatus lann_dataset_from_arrays(const double *points,
                                         size_t m,
                                         size_t n,
                                         const size_t *labels,
                                         size_t n_classes,
                                         struct LannDataset **out);

/**
 * Reads a CSV file with a header row; the last column holds the labels.
 */
enum LannStatus lann_dataset_load_csv(const char *path, struct LannDataset **out);

void lann_dataset_free(struct LannDataset *dataset);

/**
 * Number of points, or 0 for NULL.
 */
size_t lann_dataset_len(const struct LannDataset *dataset);

size_t lann_dataset_dim(const struct LannDataset *dataset);

size_t lann_dataset_n_classes(const struct LannDataset *dataset);

/**
 * Z-scores the dataset, trains the local metrics and returns the model.
 * `final_loss` may be NULL; it receives the last epoch's mean loss, or NaN
 * when `epochs` is 0.
 */
enum LannStatus lann_fit(const struct LannDataset *dataset,
                         const struct LannHyperparams *hyper,
                         struct LannModel **out,
                         double *final_loss);

void lann_model_free(struct LannModel *model);

enum LannStatus lann_model_save(const struct LannModel *model, const char *path);

enum LannStatus lann_model_load(const char *path, struct LannModel **out);

/**
 * Number of training points, or 0 for NULL.
 */
size_t lann_model_len(const struct LannModel *model);

size_t lann_model_dim(const struct LannModel *model);

size_t lann_model_n_classes(const struct LannModel *model);

/**
 * Classifies a raw query of length `dim`. `probabilities` may be NULL or
 * point to `n_classes` doubles.
 */
enum LannStatus lann_predict(const struct LannModel *model,
                             const double *query,
                             size_t dim,
                             size_t *label,
                             double *probabilities);

/**
 * Writes the `dim` feature relevances behind the prediction for `query`.
 */
enum LannStatus lann_explain(const struct LannModel *model,
                             const double *query,
                             size_t dim,
                             double *relevances);

/**
 * Writes the `len * len` row-major distance matrix between the training
 * points, where `len` is `lann_model_len(model)`.
 */
enum LannStatus lann_distance_matrix(const struct LannModel *model,
                                     enum LannSymmetrize mode,
                                     double *matrix);

/**
 * Stratified `folds`-fold cross-validation. `accuracies` receives one value
 * per fold; `mean` and `std` may be NULL.
 */
enum LannStatus lann_cross_validate(const struct LannDataset *dataset,
                                    const struct LannHyperparams *hyper,
                                    enum LannAlgorithm algorithm,
                                    size_t folds,
                                    uint64_t seed,
                                    double *accuracies,
                                    double *mean,
                                    double *std);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LANN_H */
