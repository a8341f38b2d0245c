#ifndef DIALSUM_H
#define DIALSUM_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum DialsumStatus {
  DIALSUM_STATUS_OK = 0,
  DIALSUM_STATUS_NULL_POINTER = 1,
  DIALSUM_STATUS_INVALID_UTF8 = 2,
  DIALSUM_STATUS_INVALID_ARGUMENT = 3,
  DIALSUM_STATUS_IO = 4,
  DIALSUM_STATUS_PANIC = 5,
} DialsumStatus;

/**
 * Extractive baselines, for [`dialsum_baseline`].
 */
typedef enum DialsumMethod {
  DIALSUM_METHOD_LEAD1 = 0,
  DIALSUM_METHOD_LEAD2 = 1,
  DIALSUM_METHOD_LONG1 = 2,
} DialsumMethod;

/**
 * Dataset splits, for [`dialsum_baseline`].
 */
typedef enum DialsumSplit {
  DIALSUM_SPLIT_TRAIN = 0,
  DIALSUM_SPLIT_VALIDATION = 1,
  DIALSUM_SPLIT_TEST = 2,
} DialsumSplit;

/**
 * A loaded train/validation/test dataset.
 */
typedef struct DialsumDataset DialsumDataset;

/**
 * Corpus-level ROUGE F1 values in [0, 1].
 */
typedef struct DialsumRouge {
  double rouge1;
  double rouge2;
  double rouge_l;
  /**
   * Number of scored instances.
   */
  uintptr_t n;
} DialsumRouge;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static nul-terminated string. Never free it.
 */
const char *dialsum_version(void);

/**
 * Message for the last failed call on this thread, or NULL if the last
 * call succeeded. The pointer stays valid until the next library call on
 * the same thread.
 */
const char *dialsum_last_error(void);

/**
 * Releases a string returned by this library. NULL is ignored.
 *
 * # Safety
 * `s` must come from a dialsum function that documents an owned string
 * result, and must not be freed twice.
 */
void dialsum_string_free(char *s);

/**
 * Loads a dataset. `format` is `"canonical-jsonl"` or `"tweetsumm-import"`.
 * On success `*out` receives a handle to release with
 * [`dialsum_dataset_free`].
 *
 * # Safety
 * `path` and `format` must be nul-terminated strings and `out` a writable
 * pointer.
 */
enum DialsumStatus dialsum_dataset_load(const char *path,
                                        const char *format,
                                        struct DialsumDataset **out);

/**
 * Releases a dataset handle. NULL is ignored.
 *
 * # Safety
 * `dataset` must come from [`dialsum_dataset_load`] and not be used again.
 */
void dialsum_dataset_free(struct DialsumDataset *dataset);

/**
 * Writes the number of examples in each split.
 *
 * # Safety
 * `dataset` must be a live handle; the out pointers must be writable.
 */
enum DialsumStatus dialsum_dataset_split_sizes(const struct DialsumDataset *dataset,
                                               uintptr_t *train,
                                               uintptr_t *validation,
                                               uintptr_t *test);

/**
 * Scores a baseline on one split against all references.
 *
 * # Safety
 * `dataset` must be a live handle and `out` writable.
 */
enum DialsumStatus dialsum_baseline(const struct DialsumDataset *dataset,
                                    enum DialsumMethod method,
                                    enum DialsumSplit split,
                                    uintptr_t token_limit,
                                    bool stem,
                                    struct DialsumRouge *out);

/**
 * ROUGE F1 of one candidate against one reference. The candidate is
 * truncated to `token_limit` tokens.
 *
 * # Safety
 * `candidate` and `reference` must be nul-terminated strings and `out`
 * writable.
 */
enum DialsumStatus dialsum_rouge(const char *candidate,
                                 const char *reference,
                                 uintptr_t token_limit,
                                 bool stem,
                                 struct DialsumRouge *out);

/**
 * Segments a dialog and renders its numbered sentence listing.
 *
 * `turns_json` is a JSON array of `{"speaker": "customer"|"agent", "text": ...}`.
 * On success `*out` receives an owned string to release with
 * [`dialsum_string_free`].
 *
 * # Safety
 * `turns_json` must be a nul-terminated string and `out` writable.
 */
enum DialsumStatus dialsum_render_numbered(const char *turns_json, char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DIALSUM_H */
