#ifndef LLICTI_H
#define LLICTI_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes.
 */
typedef enum LlictiStatus {
  LLICTI_STATUS_OK = 0,
  LLICTI_STATUS_ARGUMENT = 1,
  LLICTI_STATUS_RANGE = 2,
  LLICTI_STATUS_SHAPE = 3,
  LLICTI_STATUS_NUMERIC = 4,
  LLICTI_STATUS_CAPACITY = 5,
  LLICTI_STATUS_STATE = 6,
  LLICTI_STATUS_FORMAT = 7,
  LLICTI_STATUS_CORRUPTION = 8,
  LLICTI_STATUS_UNSUPPORTED = 9,
  LLICTI_STATUS_IO = 10,
  LLICTI_STATUS_NULL_POINTER = 11,
  LLICTI_STATUS_PANIC = 12,
} LlictiStatus;

/**
 * A byte buffer owned by the library.
 */
typedef struct LlictiBytes LlictiBytes;

/**
 * An 8-bit RGB image, interleaved, owned by the library.
 */
typedef struct LlictiImage LlictiImage;

/**
 * Loaded interpolator weights.
 */
typedef struct LlictiWeights LlictiWeights;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the last failure on this thread (empty if none). The
 * pointer stays valid until the next failing call on the same thread.
 */
const char *llicti_last_error(void);

/**
 * Loads a weight file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum LlictiStatus llicti_weights_load(const char *path, struct LlictiWeights **out);

/**
 * 64-bit identifier of the weights as written into bitstreams; 0 for null.
 *
 * # Safety
 * `weights` must be null or come from [`llicti_weights_load`].
 */
uint64_t llicti_weights_checksum(const struct LlictiWeights *weights);

/**
 * # Safety
 * `weights` must be null or come from [`llicti_weights_load`], and not be
 * used afterwards.
 */
void llicti_weights_free(struct LlictiWeights *weights);

/**
 * Compresses an interleaved 8-bit RGB image. With null `weights` the flat
 * model with `flat_scales` scales is used.
 *
 * # Safety
 * `rgb` must point to `height * width * 3` bytes; `out` must be valid.
 */
enum LlictiStatus llicti_encode(const struct LlictiWeights *weights,
                                uint32_t flat_scales,
                                const uint8_t *rgb,
                                size_t height,
                                size_t width,
                                struct LlictiBytes **out);

/**
 * Decompresses a bitstream. `weights` must be the weights used to encode,
 * or null for flat-model streams.
 *
 * # Safety
 * `data` must point to `len` bytes; `out` must be valid.
 */
enum LlictiStatus llicti_decode(const struct LlictiWeights *weights,
                                const uint8_t *data,
                                size_t len,
                                struct LlictiImage **out);

/**
 * Modelled size in bits (header, fixed segment and coded subbands).
 *
 * # Safety
 * As for [`llicti_encode`]; `bits` must be valid.
 */
enum LlictiStatus llicti_estimate_bits(const struct LlictiWeights *weights,
                                       uint32_t flat_scales,
                                       const uint8_t *rgb,
                                       size_t height,
                                       size_t width,
                                       double *bits);

/**
 * # Safety
 * `bytes` must come from [`llicti_encode`].
 */
const uint8_t *llicti_bytes_data(const struct LlictiBytes *bytes);

/**
 * # Safety
 * `bytes` must come from [`llicti_encode`].
 */
size_t llicti_bytes_len(const struct LlictiBytes *bytes);

/**
 * # Safety
 * `bytes` must be null or come from [`llicti_encode`], and not be used
 * afterwards.
 */
void llicti_bytes_free(struct LlictiBytes *bytes);

/**
 * # Safety
 * `image` must come from [`llicti_decode`].
 */
size_t llicti_image_height(const struct LlictiImage *image);

/**
 * # Safety
 * `image` must come from [`llicti_decode`].
 */
size_t llicti_image_width(const struct LlictiImage *image);

/**
 * Interleaved RGB bytes, `height * width * 3` of them.
 *
 * # Safety
 * `image` must come from [`llicti_decode`].
 */
const uint8_t *llicti_image_rgb(const struct LlictiImage *image);

/**
 * # Safety
 * `image` must be null or come from [`llicti_decode`], and not be used
 * afterwards.
 */
void llicti_image_free(struct LlictiImage *image);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* LLICTI_H */
