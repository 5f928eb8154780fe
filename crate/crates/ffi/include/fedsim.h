/* fedsim C API: bounded dataset-similarity metric for cross-silo federated learning. */

#pragma once

/* Generated with cbindgen:0.29.4 */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Status codes returned by every fallible entry point.
typedef enum FedsimStatus {
  FEDSIM_STATUS_FEDSIM_OK = 0,
  FEDSIM_STATUS_FEDSIM_INVALID_ARGUMENT = 1,
  FEDSIM_STATUS_FEDSIM_COMPUTATION_FAILED = 2,
  FEDSIM_STATUS_FEDSIM_PRIVACY_GATE_REFUSED = 3,
  FEDSIM_STATUS_FEDSIM_IO_ERROR = 4,
  FEDSIM_STATUS_FEDSIM_NULL_POINTER = 5,
} FedsimStatus;

// Collaboration bands from the normalized cost.
typedef enum FedsimBand {
  FEDSIM_BAND_FEDSIM_BENEFICIAL = 0,
  FEDSIM_BAND_FEDSIM_UNCERTAIN = 1,
  FEDSIM_BAND_FEDSIM_DETRIMENTAL = 2,
} FedsimBand;

// Opaque dataset handle.
typedef struct FedsimDataset FedsimDataset;

// Opaque probe-model handle.
typedef struct FedsimModel FedsimModel;

// Opaque similarity-report handle.
typedef struct FedsimReport FedsimReport;

// Metric knobs; zero/negative fields fall back to defaults.
typedef struct FedsimMetricOptions {
  double feature_weight;
  double label_weight;
  double epsilon;
  uintptr_t min_class_samples;
  bool override_stat_floor;
} FedsimMetricOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *fedsim_version(void);

// Message of the most recent error on this thread, or NULL. The returned
// string must be released with `fedsim_string_free`.
char *fedsim_last_error(void);

// Release a string returned by this library.
//
// # Safety
// `s` must have been returned by a fedsim function and not freed before.
void fedsim_string_free(char *s);

// Load a dataset from CSV with a `f0..f{p-1},label` header.
//
// # Safety
// `path` must be a valid NUL-terminated string and `out` a valid pointer.
enum FedsimStatus fedsim_dataset_load_csv(const char *path, struct FedsimDataset **out);

// Load a dataset from the versioned binary cache format.
//
// # Safety
// `path` must be a valid NUL-terminated string and `out` a valid pointer.
enum FedsimStatus fedsim_dataset_load_cache(const char *path, struct FedsimDataset **out);

// Number of samples; 0 for a null handle.
uintptr_t fedsim_dataset_rows(const struct FedsimDataset *d);

// Feature dimension; 0 for a null handle.
uintptr_t fedsim_dataset_dim(const struct FedsimDataset *d);

// Class count; 0 for a null handle.
uintptr_t fedsim_dataset_classes(const struct FedsimDataset *d);

// Release a dataset handle.
//
// # Safety
// `d` must have come from a fedsim loader and not be freed twice.
void fedsim_dataset_free(struct FedsimDataset *d);

// Load probe-model parameters from the versioned binary format.
//
// # Safety
// `path` must be a valid NUL-terminated string and `out` a valid pointer.
enum FedsimStatus fedsim_model_load(const char *path, struct FedsimModel **out);

// Release a model handle.
//
// # Safety
// `m` must have come from this library and not be freed twice.
void fedsim_model_free(struct FedsimModel *m);

// Run the single federated probe round over two clients and return the
// aggregated global model. `hidden` lists the hidden-layer widths; the last
// entry is the activation dimension. `use_relu` false selects tanh.
//
// # Safety
// All pointers must be valid; `hidden` must point at `n_hidden` entries.
enum FedsimStatus fedsim_probe_round(const struct FedsimDataset *a,
                                     const struct FedsimDataset *b,
                                     const uintptr_t *hidden,
                                     uintptr_t n_hidden,
                                     bool use_relu,
                                     double learning_rate,
                                     uintptr_t batch_size,
                                     uintptr_t epochs,
                                     uint64_t seed,
                                     struct FedsimModel **out);

// Pairwise similarity between two datasets under a probe model. `opts` may
// be NULL for defaults.
//
// # Safety
// All handle pointers must be valid.
enum FedsimStatus fedsim_similarity(const struct FedsimDataset *a,
                                    const struct FedsimDataset *b,
                                    const struct FedsimModel *model,
                                    const struct FedsimMetricOptions *opts,
                                    struct FedsimReport **out);

// Similarity through the privacy-preserving path (SMC feature costs plus
// zCDP-noised class statistics). Fails with
// `FEDSIM_STATUS_FEDSIM_PRIVACY_GATE_REFUSED` when `rho` violates the
// reconstruction-infeasibility gate and `allow_weak_privacy` is false.
//
// # Safety
// All handle pointers must be valid.
enum FedsimStatus fedsim_similarity_private(const struct FedsimDataset *a,
                                            const struct FedsimDataset *b,
                                            const struct FedsimModel *model,
                                            const struct FedsimMetricOptions *opts,
                                            double rho,
                                            double delta,
                                            bool allow_weak_privacy,
                                            uint64_t seed,
                                            struct FedsimReport **out);

// The normalized cost in [0,1]; NaN for a null handle.
double fedsim_report_s_tilde(const struct FedsimReport *r);

// Number of shared classes that entered the aggregate.
uintptr_t fedsim_report_class_count(const struct FedsimReport *r);

// Serialize the report to JSON. The returned string must be released with
// `fedsim_string_free`.
//
// # Safety
// `r` must be a valid report handle.
char *fedsim_report_to_json(const struct FedsimReport *r);

// Release a report handle.
//
// # Safety
// `r` must have come from this library and not be freed twice.
void fedsim_report_free(struct FedsimReport *r);

// Classify a normalized cost into a collaboration band.
//
// # Safety
// `out` must be a valid pointer.
enum FedsimStatus fedsim_classify(double s_tilde, enum FedsimBand *out);

// Evaluate the reconstruction-infeasibility gate `rho < 6 sqrt(d) / n`.
//
// # Safety
// `out_pass` and `out_threshold` must be valid pointers.
enum FedsimStatus fedsim_check_privacy_budget(double rho,
                                              uintptr_t d,
                                              uintptr_t n,
                                              bool *out_pass,
                                              double *out_threshold);

// Convert a zCDP budget to the epsilon of an (epsilon, delta) guarantee.
//
// # Safety
// `out_epsilon` must be a valid pointer.
enum FedsimStatus fedsim_zcdp_to_dp(double rho, double delta, double *out_epsilon);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus
