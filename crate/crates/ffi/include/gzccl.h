#ifndef GZCCL_H
#define GZCCL_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum GzcclCodec {
  /**
   * Error-bounded codec; uses `eb`.
   */
  GZCCL_CODEC_ERROR_BOUNDED = 0,
  /**
   * Fixed-rate quantizer; uses `bits`.
   */
  GZCCL_CODEC_FIXED_RATE = 1,
  /**
   * Raw binary32 on the wire.
   */
  GZCCL_CODEC_NONE = 2,
} GzcclCodec;

typedef enum GzcclKernel {
  GZCCL_KERNEL_COMPRESS = 0,
  GZCCL_KERNEL_DECOMPRESS = 1,
  GZCCL_KERNEL_REDUCE = 2,
} GzcclKernel;

typedef enum GzcclStatus {
  GZCCL_STATUS_OK = 0,
  GZCCL_STATUS_NULL_POINTER = 1,
  GZCCL_STATUS_INVALID_ARGUMENT = 2,
  GZCCL_STATUS_CODEC = 3,
  GZCCL_STATUS_COLLECTIVE = 4,
  GZCCL_STATUS_BUFFER_TOO_SMALL = 5,
  GZCCL_STATUS_PANIC = 6,
} GzcclStatus;

/**
 * Reusable compression workspace.
 */
typedef struct GzcclCompressor GzcclCompressor;

/**
 * Outputs and report of one collective run.
 */
typedef struct GzcclRun GzcclRun;

/**
 * Cost-model parameters. Obtain defaults from [`gzccl_cost_params_default`].
 */
typedef struct GzcclCostParams {
  double alpha;
  double beta;
  double launch;
  double saturation;
  double compress_throughput;
  double decompress_throughput;
  double reduce_throughput;
  double host_device_bandwidth;
  bool staging;
  bool overlap;
  bool multi_stream;
} GzcclCostParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null after a
 * success. Valid until the next call on this thread.
 */
const char *gzccl_last_error(void);

struct GzcclCostParams gzccl_cost_params_default(void);

/**
 * Modeled kernel seconds for `bytes` of input; negative if `params` is null.
 *
 * # Safety
 * `params` must be null or point to a valid struct.
 */
double gzccl_kernel_time(const struct GzcclCostParams *params, size_t bytes, enum GzcclKernel kind);

/**
 * Modeled seconds to move one message of `bytes`; negative if `params` is null.
 *
 * # Safety
 * `params` must be null or point to a valid struct.
 */
double gzccl_msg_time(const struct GzcclCostParams *params, size_t bytes);

/**
 * Largest blob `gzccl_compress` can produce for `n` values.
 */
size_t gzccl_max_compressed_len(size_t n);

struct GzcclCompressor *gzccl_compressor_new(void);

/**
 * # Safety
 * `h` must be null or a handle from `gzccl_compressor_new` not yet freed.
 */
void gzccl_compressor_free(struct GzcclCompressor *h);

/**
 * Compresses `n` values with absolute bound `eb` into `out` (capacity
 * `cap` bytes). `*out_len` receives the blob size, also when the buffer
 * is too small.
 *
 * # Safety
 * `h` must be a live handle; `data` must hold `n` values; `out` must hold
 * `cap` bytes; `out_len` must be writable.
 */
enum GzcclStatus gzccl_compressor_compress(struct GzcclCompressor *h,
                                           const float *data,
                                           size_t n,
                                           double eb,
                                           uint8_t *out,
                                           size_t cap,
                                           size_t *out_len);

/**
 * One-shot form of [`gzccl_compressor_compress`].
 *
 * # Safety
 * As for `gzccl_compressor_compress`, without the handle.
 */
enum GzcclStatus gzccl_compress(const float *data,
                                size_t n,
                                double eb,
                                uint8_t *out,
                                size_t cap,
                                size_t *out_len);

/**
 * Number of values encoded in `blob`.
 *
 * # Safety
 * `blob` must hold `len` bytes; `n` must be writable.
 */
enum GzcclStatus gzccl_decompressed_len(const uint8_t *blob, size_t len, size_t *n);

/**
 * Decodes `blob` into `out` (capacity `cap` values); `*n` receives the
 * value count.
 *
 * # Safety
 * `blob` must hold `len` bytes, `out` `cap` values; `n` must be writable.
 */
enum GzcclStatus gzccl_decompress(const uint8_t *blob,
                                  size_t len,
                                  float *out,
                                  size_t cap,
                                  size_t *n);

/**
 * Runs collective `algorithm` (e.g. `"ring-allreduce"`) over `ranks`
 * simulated ranks. Rank `r` contributes `lens[r]` values at `inputs[r]`
 * (for scatter only the root, rank 0, needs data). `params` may be null
 * for defaults. On success `*out` receives a handle.
 *
 * # Safety
 * `algorithm` must be a nul-terminated string; `inputs` and `lens` must
 * hold `ranks` entries with each `inputs[r]` holding `lens[r]` values;
 * `out` must be writable.
 */
enum GzcclStatus gzccl_run(const char *algorithm,
                           size_t ranks,
                           const float *const *inputs,
                           const size_t *lens,
                           enum GzcclCodec codec,
                           double eb,
                           uint8_t bits,
                           const struct GzcclCostParams *params,
                           struct GzcclRun **out);

/**
 * # Safety
 * `run` must be null or a live handle.
 */
size_t gzccl_run_ranks(const struct GzcclRun *run);

/**
 * Output length of `rank`, 0 for a null handle or bad rank.
 *
 * # Safety
 * `run` must be null or a live handle.
 */
size_t gzccl_run_output_len(const struct GzcclRun *run, size_t rank);

/**
 * Output values of `rank`, owned by the handle; null for a bad rank.
 *
 * # Safety
 * `run` must be null or a live handle.
 */
const float *gzccl_run_output(const struct GzcclRun *run, size_t rank);

/**
 * Simulated completion time in seconds; negative for a null handle.
 *
 * # Safety
 * `run` must be null or a live handle.
 */
double gzccl_run_makespan(const struct GzcclRun *run);

/**
 * The run's JSON report, owned by the handle.
 *
 * # Safety
 * `run` must be null or a live handle.
 */
const char *gzccl_run_report_json(const struct GzcclRun *run);

/**
 * # Safety
 * `run` must be null or a handle from `gzccl_run` not yet freed.
 */
void gzccl_run_free(struct GzcclRun *run);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GZCCL_H */
