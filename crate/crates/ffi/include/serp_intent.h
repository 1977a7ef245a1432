#ifndef SERP_INTENT_H
#define SERP_INTENT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Intent labels in report order.
 */
typedef enum SiIntent {
  SI_INTENT_INFORMATIONAL = 0,
  SI_INTENT_LOCAL_PLACE = 1,
  SI_INTENT_SEXUAL_RACISM = 2,
} SiIntent;

/**
 * Result codes.
 */
typedef enum SiStatus {
  SI_STATUS_OK = 0,
  SI_STATUS_NULL_POINTER = 1,
  SI_STATUS_INVALID_UTF8 = 2,
  SI_STATUS_INVALID_ARGUMENT = 3,
  SI_STATUS_CAPTCHA_DETECTED = 4,
  SI_STATUS_PARSE_FAILED = 5,
  SI_STATUS_BUFFER_TOO_SMALL = 6,
  SI_STATUS_PANIC = 99,
} SiStatus;

typedef struct SiLexicon SiLexicon;

typedef struct SiModel SiModel;

typedef struct SiSelectorConfig SiSelectorConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. The pointer is
 * valid until the next failing call on the same thread.
 */
const char *si_last_error_message(void);

/**
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void si_string_free(char *s);

/**
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle.
 */
enum SiStatus si_selector_config_default(struct SiSelectorConfig **out);

/**
 * # Safety
 * `json` must be a NUL-terminated string; `out` a valid handle slot.
 */
enum SiStatus si_selector_config_from_json(const char *json, struct SiSelectorConfig **out);

/**
 * # Safety
 * `config` must come from a `si_selector_config_*` constructor or be null.
 */
void si_selector_config_free(struct SiSelectorConfig *config);

/**
 * Parses a results page into canonical JSON written to `*out_json`.
 *
 * # Safety
 * `config` must be a live handle; string arguments NUL-terminated;
 * `out_json` a valid pointer.
 */
enum SiStatus si_parse_html(const struct SiSelectorConfig *config,
                            const char *html,
                            const char *query,
                            const char *fetched_at,
                            char **out_json);

/**
 * # Safety
 * `config` must be a live handle; `html` NUL-terminated; `out` valid.
 */
enum SiStatus si_detect_captcha(const struct SiSelectorConfig *config, const char *html, bool *out);

/**
 * Length of the default feature vector.
 */
size_t si_feature_count(void);

/**
 * Default feature vector of a canonical document into `out[0..cap]`.
 *
 * # Safety
 * `doc_json` must be NUL-terminated; `out` must hold `cap` doubles.
 */
enum SiStatus si_extract_features(const char *doc_json, double *out, size_t cap);

/**
 * # Safety
 * `json` must be NUL-terminated; `out` a valid handle slot.
 */
enum SiStatus si_lexicon_from_json(const char *json, struct SiLexicon **out);

/**
 * # Safety
 * `lexicon` must come from [`si_lexicon_from_json`] or be null.
 */
void si_lexicon_free(struct SiLexicon *lexicon);

/**
 * Tags one query with the default stopwords. `out_counts` may be null;
 * otherwise it receives three hit counts in [`SiIntent`] order.
 *
 * # Safety
 * `lexicon` must be live; `query` NUL-terminated; `out_intent` valid;
 * `out_counts` null or room for 3 values.
 */
enum SiStatus si_tag_query(const struct SiLexicon *lexicon,
                           const char *query,
                           bool count_distinct,
                           enum SiIntent *out_intent,
                           size_t *out_counts);

/**
 * Fits KMeans on a row-major `rows x cols` matrix.
 *
 * # Safety
 * `data` must hold `rows * cols` doubles; `out` a valid handle slot.
 */
enum SiStatus si_kmeans_fit(const double *data,
                            size_t rows,
                            size_t cols,
                            size_t k,
                            uint64_t seed,
                            size_t n_init,
                            struct SiModel **out);

/**
 * # Safety
 * `model` must come from [`si_kmeans_fit`] or be null.
 */
void si_model_free(struct SiModel *model);

/**
 * # Safety
 * `model` must be live; `out` valid.
 */
enum SiStatus si_model_wcss(const struct SiModel *model, double *out);

/**
 * Training-row cluster ids into `out[0..cap]`.
 *
 * # Safety
 * `model` must be live; `out` must hold `cap` values.
 */
enum SiStatus si_model_assignments(const struct SiModel *model, size_t *out, size_t cap);

/**
 * Nearest centroid for one row of `cols` values.
 *
 * # Safety
 * `model` must be live; `row` must hold `cols` doubles; `out` valid.
 */
enum SiStatus si_model_predict(const struct SiModel *model,
                               const double *row,
                               size_t cols,
                               size_t *out);

/**
 * Per-class precision and recall of a row-major 3x3 confusion matrix
 * (rows actual, columns predicted, [`SiIntent`] order).
 *
 * # Safety
 * `cells` must hold 9 values; `out_precision` and `out_recall` 3 each.
 */
enum SiStatus si_precision_recall(const uint64_t *cells, double *out_precision, double *out_recall);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SERP_INTENT_H */
