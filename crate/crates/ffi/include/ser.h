#ifndef SER_FFI_H
#define SER_FFI_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every call.
typedef enum SerStatus {
  SER_STATUS_OK = 0,
  SER_STATUS_NULL_POINTER = 1,
  SER_STATUS_INVALID_ARGUMENT = 2,
  SER_STATUS_BUFFER_TOO_SMALL = 3,
  SER_STATUS_CONFIG = 4,
  SER_STATUS_IO = 5,
  SER_STATUS_AUDIO = 6,
  SER_STATUS_FEATURE = 7,
  SER_STATUS_MODEL = 8,
  SER_STATUS_PANIC = 9,
} SerStatus;

// Input feature kind.
typedef enum SerFeature {
  // Log-mel spectrogram.
  SER_FEATURE_LMS = 0,
  // Log-mel spectrogram stacked with MFCC deltas and chroma.
  SER_FEATURE_LMSDDC = 1,
} SerFeature;

// Opaque model handle.
typedef struct SerModel SerModel;

// Macro-averaged scores.
typedef struct SerMetrics {
  double accuracy;
  double precision;
  double recall;
  double f1;
} SerMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *ser_version(void);

// Message of the last failed call on this thread, or NULL if none.
// The pointer stays valid until the next failing call on the same thread.
const char *ser_last_error(void);

// Network input shape `channels x height x frames` for a feature kind
// under the default pipeline.
//
// # Safety
// The out pointers must be valid for writes.
enum SerStatus ser_feature_shape(enum SerFeature feature,
                                 size_t *channels,
                                 size_t *height,
                                 size_t *frames);

// Runs the full preparation and feature pipeline on mono PCM samples.
//
// Writes `channels * height * frames` values (see [`ser_feature_shape`]) to
// `out` and their count to `out_len`. If `out` is NULL or `capacity` is too
// small, only `out_len` is written and `SER_STATUS_BUFFER_TOO_SMALL` returned.
//
// # Safety
// `samples` must point to `n_samples` floats and `out` to `capacity` floats.
enum SerStatus ser_extract_features(const float *samples,
                                    size_t n_samples,
                                    uint32_t sample_rate,
                                    enum SerFeature feature,
                                    float *out,
                                    size_t capacity,
                                    size_t *out_len);

// Like [`ser_extract_features`] but reads a WAV file.
//
// # Safety
// `path` must be a NUL-terminated string and `out` must point to `capacity` floats.
enum SerStatus ser_extract_features_wav(const char *path,
                                        enum SerFeature feature,
                                        float *out,
                                        size_t capacity,
                                        size_t *out_len);

// New model with the default architecture for `feature` and `n_classes`,
// initialized from `seed`.
//
// # Safety
// `out` must be valid for writes. Release the handle with [`ser_model_free`].
enum SerStatus ser_model_new(enum SerFeature feature,
                             size_t n_classes,
                             uint64_t seed,
                             struct SerModel **out);

// New model from a model config file, as written by `ser train`.
//
// # Safety
// `path` must be a NUL-terminated string and `out` valid for writes.
enum SerStatus ser_model_from_config(const char *path, struct SerModel **out);

// Releases a model. NULL is ignored.
//
// # Safety
// `model` must come from this library and not be used afterwards.
void ser_model_free(struct SerModel *model);

// Replaces the weights with those stored at `path`.
//
// # Safety
// `model` must be a live handle and `path` a NUL-terminated string.
enum SerStatus ser_model_load_weights(struct SerModel *model, const char *path);

// Writes the weights to `path`.
//
// # Safety
// `model` must be a live handle and `path` a NUL-terminated string.
enum SerStatus ser_model_save_weights(const struct SerModel *model, const char *path);

// Number of trainable parameters.
//
// # Safety
// `model` must be a live handle and `out` valid for writes.
enum SerStatus ser_model_param_count(const struct SerModel *model, size_t *out);

// Per-sample input shape and class count.
//
// # Safety
// `model` must be a live handle and every out pointer valid for writes.
enum SerStatus ser_model_shape(const struct SerModel *model,
                               size_t *channels,
                               size_t *height,
                               size_t *frames,
                               size_t *n_classes);

// Class probabilities for `n_items` samples laid out back to back, each of
// `channels * height * frames` values. Writes `n_items * n_classes`
// probabilities to `out`, row per sample.
//
// # Safety
// `model` must be a live handle, `input` must point to the full batch and
// `out` to `capacity` floats.
enum SerStatus ser_model_predict_proba(struct SerModel *model,
                                       const float *input,
                                       size_t n_items,
                                       float *out,
                                       size_t capacity);

// Most likely class per sample. Same input layout as
// [`ser_model_predict_proba`]; writes `n_items` class indices.
//
// # Safety
// As for [`ser_model_predict_proba`], with `out` pointing to `n_items` values.
enum SerStatus ser_model_predict(struct SerModel *model,
                                 const float *input,
                                 size_t n_items,
                                 uint32_t *out);

// Accuracy and macro precision, recall and F1 of `predictions` against
// `labels`, both of length `n` with values below `n_classes`.
//
// # Safety
// `predictions` and `labels` must point to `n` values and `out` be valid for writes.
enum SerStatus ser_metrics(const uint32_t *predictions,
                           const uint32_t *labels,
                           size_t n,
                           size_t n_classes,
                           struct SerMetrics *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SER_FFI_H */
