#ifndef HYPOCODEC_H
#define HYPOCODEC_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define HCV_FUSION_DEFAULT 0

#define HCV_FUSION_TILE 1

#define HCV_FUSION_CROP 2

#define HCV_FUSION_BLEND 3

#define HCV_RESIDUAL_NONE 0

#define HCV_RESIDUAL_FIRST 1

#define HCV_RESIDUAL_PREVIOUS 2

typedef enum HcvStatus {
  HCV_STATUS_OK = 0,
  HCV_STATUS_NULL_POINTER = 1,
  HCV_STATUS_INVALID_ARGUMENT = 2,
  HCV_STATUS_SHAPE = 3,
  HCV_STATUS_FORMAT = 4,
  HCV_STATUS_CHECKSUM = 5,
  HCV_STATUS_TRUNCATED = 6,
  HCV_STATUS_NUMERIC = 7,
  HCV_STATUS_IO = 8,
  HCV_STATUS_PANIC = 9,
} HcvStatus;

/**
 * Base parameters loaded from a base file.
 */
typedef struct HcvBase HcvBase;

typedef struct HcvVideo HcvVideo;

/**
 * Encoder settings. Start from [`hcv_encode_params_default`].
 */
typedef struct HcvEncodeParams {
  /**
   * Quantizer bit depth, 4..=8.
   */
  uint32_t bits;
  /**
   * One of the `HCV_RESIDUAL_*` constants.
   */
  uint32_t residual_mode;
  /**
   * Keyframe every this many clips; 0 disables keyframes.
   */
  uint32_t keyframe_interval;
  double lambda_temp;
  uint32_t iterations;
  uint32_t finetune_iterations;
  double learning_rate;
  double finetune_learning_rate;
  uint32_t overlap_h;
  uint32_t overlap_w;
  /**
   * One of the `HCV_FUSION_*` constants.
   */
  uint32_t fusion;
  /**
   * Nonzero starts each clip from the previous clip's tokens.
   */
  uint32_t warm_start;
} HcvEncodeParams;

/**
 * A byte buffer owned by the library; release with [`hcv_bytes_free`].
 */
typedef struct HcvBytes {
  uint8_t *data;
  size_t len;
} HcvBytes;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *hcv_version(void);

/**
 * Message for the most recent failure on this thread, empty after a success.
 * Valid until the next call on the same thread.
 */
const char *hcv_last_error(void);

struct HcvEncodeParams hcv_encode_params_default(void);

/**
 * Parses a base file.
 *
 * # Safety
 * `data` must point to `len` readable bytes; `out` must be writable.
 */
enum HcvStatus hcv_base_load(const uint8_t *data, size_t len, struct HcvBase **out);

/**
 * Randomly initialized base for a named preset (`tiny`, `micro`, ...).
 *
 * # Safety
 * `name` must be a NUL-terminated string; `out` must be writable.
 */
enum HcvStatus hcv_base_init(const char *name, uint64_t seed, struct HcvBase **out);

/**
 * Serializes a base into base-file bytes.
 *
 * # Safety
 * `base` must be a live handle; `out` must be writable.
 */
enum HcvStatus hcv_base_save(const struct HcvBase *base, struct HcvBytes *out);

/**
 * Checksum that containers record to identify their base.
 *
 * # Safety
 * `base` must be a live handle or null.
 */
uint32_t hcv_base_fingerprint(const struct HcvBase *base);

/**
 * # Safety
 * `base` must be null or a handle not yet freed.
 */
void hcv_base_free(struct HcvBase *base);

/**
 * Builds a video from planar RGB8 frames (`T x 3 x H x W`).
 *
 * # Safety
 * `rgb` must point to `len` readable bytes; `out` must be writable.
 */
enum HcvStatus hcv_video_from_rgb8(size_t frames,
                                   size_t height,
                                   size_t width,
                                   const uint8_t *rgb,
                                   size_t len,
                                   struct HcvVideo **out);

/**
 * Writes `frames`, `height`, `width` of a video; any output may be null.
 *
 * # Safety
 * `video` must be a live handle; non-null outputs must be writable.
 */
enum HcvStatus hcv_video_dims(const struct HcvVideo *video,
                              size_t *frames,
                              size_t *height,
                              size_t *width);

/**
 * Copies the video out as planar RGB8; `len` must equal `T*3*H*W`.
 *
 * # Safety
 * `video` must be a live handle; `out` must point to `len` writable bytes.
 */
enum HcvStatus hcv_video_to_rgb8(const struct HcvVideo *video, uint8_t *out, size_t len);

/**
 * # Safety
 * `video` must be null or a handle not yet freed.
 */
void hcv_video_free(struct HcvVideo *video);

/**
 * Fits and codes a video into container bytes.
 *
 * # Safety
 * Handles must be live; `params` readable or null for defaults; `out` writable.
 */
enum HcvStatus hcv_encode(const struct HcvBase *base,
                          const struct HcvVideo *video,
                          const struct HcvEncodeParams *params,
                          struct HcvBytes *out);

/**
 * Decodes container bytes; the container must reference `base`.
 *
 * # Safety
 * `base` must be live; `data` must point to `len` bytes; `out` writable.
 */
enum HcvStatus hcv_decode(const struct HcvBase *base,
                          const uint8_t *data,
                          size_t len,
                          struct HcvVideo **out);

/**
 * Bits per pixel of a container (coded payload and histograms only).
 *
 * # Safety
 * `data` must point to `len` bytes; `out` writable.
 */
enum HcvStatus hcv_container_bpp(const uint8_t *data, size_t len, double *out);

/**
 * PSNR in dB over all frames.
 *
 * # Safety
 * Handles must be live; `out` writable.
 */
enum HcvStatus hcv_psnr(const struct HcvVideo *a, const struct HcvVideo *b, double *out);

/**
 * Mean SSIM over all frames.
 *
 * # Safety
 * Handles must be live; `out` writable.
 */
enum HcvStatus hcv_ssim(const struct HcvVideo *a, const struct HcvVideo *b, double *out);

/**
 * # Safety
 * `bytes` must be null or a buffer returned by this library and not yet freed.
 */
void hcv_bytes_free(struct HcvBytes *bytes);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HYPOCODEC_H */
