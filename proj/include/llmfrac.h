/* llmfrac — corpus-level estimation of the fraction of LLM-modified
 * sentences, exposed as a C API over opaque handles.
 *
 * Conventions:
 *   - Functions return a status code: 0 ok, 1 usage error, 2 data error,
 *     3 transport error. llmfrac_last_error() describes the most recent
 *     failure on the calling thread.
 *   - Handles are created by *_load / *_build / *_fit functions and
 *     released with the matching *_free.
 *   - Report-producing calls hand back a JSON document in *out_json;
 *     release it with llmfrac_string_free.
 */

#ifndef LLMFRAC_H
#define LLMFRAC_H

#include <stdint.h>

#if defined _WIN32
#define LLMFRAC_API __declspec(dllexport)
#else
#define LLMFRAC_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

enum {
  LLMFRAC_OK = 0,
  LLMFRAC_ERR_USAGE = 1,
  LLMFRAC_ERR_DATA = 2,
  LLMFRAC_ERR_TRANSPORT = 3
};

typedef struct llmfrac_corpus llmfrac_corpus;
typedef struct llmfrac_vocab llmfrac_vocab;
typedef struct llmfrac_model llmfrac_model;

LLMFRAC_API const char* llmfrac_version(void);
LLMFRAC_API const char* llmfrac_last_error(void);
LLMFRAC_API void llmfrac_string_free(char* s);

/* Worker threads for scoring / bootstrap / analyses. Results are
 * identical for any thread count. */
LLMFRAC_API int llmfrac_set_threads(int n);

/* FNV-1a 64 checksum of a file, as a 16-char hex string. */
LLMFRAC_API int llmfrac_file_checksum(const char* path, char** out_hex);

/* ---- corpus ---- */

/* section_filter: "any" | "abstract" | "introduction". Loads the
 * line-delimited JSON corpus and preprocesses it (normalize, segment,
 * tokenize). */
LLMFRAC_API int llmfrac_corpus_load(const char* path, const char* section_filter,
                                    llmfrac_corpus** out);
LLMFRAC_API void llmfrac_corpus_free(llmfrac_corpus* corpus);
LLMFRAC_API int llmfrac_corpus_counts(const llmfrac_corpus* corpus, int64_t* records,
                                      int64_t* sentences, int64_t* empty_token_sentences);
/* One JSON line per sentence: parent_id, index, raw, tokens. */
LLMFRAC_API int llmfrac_corpus_segment_dump(const llmfrac_corpus* corpus, char** out_jsonl);
/* Fills missing preprint_count_year from the same author's most recent
 * earlier year. Returns the number of records filled via *filled. */
LLMFRAC_API int llmfrac_corpus_carry_author_meta(llmfrac_corpus* corpus, int64_t* filled);
/* Attaches embeddings from a sidecar file (one JSON object per line:
 * {"id": ..., "embedding": [...]}) to matching records. */
LLMFRAC_API int llmfrac_corpus_load_embeddings(llmfrac_corpus* corpus, const char* path,
                                               int64_t* attached, int64_t* unmatched);

/* ---- vocabulary ---- */

LLMFRAC_API int llmfrac_vocab_build(const llmfrac_corpus* human, const llmfrac_corpus* llm,
                                    int64_t min_df, llmfrac_vocab** out);
LLMFRAC_API int llmfrac_vocab_load_list(const char* path, llmfrac_vocab** out);
LLMFRAC_API int llmfrac_vocab_size(const llmfrac_vocab* vocab, int64_t* out);
LLMFRAC_API void llmfrac_vocab_free(llmfrac_vocab* vocab);

/* ---- occurrence model ---- */

/* unit: "sentence" | "document". record_manifest != 0 stores the
 * training record ids in the model for later split checking. */
LLMFRAC_API int llmfrac_model_fit(const llmfrac_corpus* human, const llmfrac_corpus* llm,
                                  const llmfrac_vocab* vocab, double smoothing, const char* unit,
                                  int record_manifest, llmfrac_model** out);
LLMFRAC_API int llmfrac_model_save(const llmfrac_model* model, const char* path);
/* Optional provenance block ({tool_version, config, inputs} JSON)
 * persisted inside the model file. */
LLMFRAC_API int llmfrac_model_set_provenance(llmfrac_model* model, const char* provenance_json);
LLMFRAC_API int llmfrac_model_load(const char* path, llmfrac_model** out);
LLMFRAC_API int llmfrac_model_info_json(const llmfrac_model* model, char** out_json);
LLMFRAC_API void llmfrac_model_free(llmfrac_model* model);

/* ---- estimation & analyses (JSON reports) ---- */

/* bootstrap_b = 0 skips the confidence interval. */
LLMFRAC_API int llmfrac_estimate(const llmfrac_model* model, const llmfrac_corpus* corpus,
                                 int64_t bootstrap_b, uint64_t seed, char** out_json);

LLMFRAC_API int llmfrac_validate(const llmfrac_model* model, const llmfrac_corpus* human_heldout,
                                 const llmfrac_corpus* llm_heldout, const double* alphas,
                                 int64_t n_alphas, int64_t n, int64_t bootstrap_b, uint64_t seed,
                                 char** out_json);

LLMFRAC_API int llmfrac_trend(const llmfrac_model* model, const llmfrac_corpus* corpus,
                              int64_t min_bucket, int64_t bootstrap_b, uint64_t seed,
                              char** out_json);

/* predicate: "preprint_count" | "fulltext_words" | "nn_distance".
 * threshold < 0 selects the default (3 / 5000 / median distance).
 * metric: "cosine" | "euclidean"; nn_dedup != 0 skips bit-identical
 * embeddings in the nearest-neighbor search (nn_distance only). */
LLMFRAC_API int llmfrac_stratify(const llmfrac_model* model, const llmfrac_corpus* corpus,
                                 const char* predicate, double threshold, const char* metric,
                                 int nn_dedup, int64_t min_bucket, int64_t bootstrap_b,
                                 uint64_t seed, char** out_json);

LLMFRAC_API int llmfrac_wordshift(const llmfrac_model* model, int64_t top_k, char** out_json);

/* words: comma-separated list. bucket: "month" | "year". */
LLMFRAC_API int llmfrac_wordfreq(const llmfrac_corpus* corpus, const char* words,
                                 const char* bucket, char** out_json);

/* ---- counterfactual generation ---- */

/* config_json keys (all optional unless noted):
 *   mode            "live" | "record" | "replay"   (required)
 *   endpoint        chat-completion URL (live/record)
 *   model           upstream model name, default "gpt-3.5-turbo-0125"
 *   fixtures        fixture file path (record/replay)
 *   api_key_env     environment variable holding the credential
 *   rpm             requests per minute, 0 = unlimited
 *   max_in_flight   parallel requests, default 1
 *   max_attempts    retry budget, default 5
 *   backoff_initial_seconds   default 0.5
 *   cutoff_date     generation refuses records on/after this date,
 *                   default "2022-11-30"; "" disables the check
 *   request_log     path for a JSONL log of parameter blocks
 * Returns batch statistics as JSON via *out_stats_json. */
LLMFRAC_API int llmfrac_generate(const char* in_path, const char* section_filter,
                                 const char* out_path, const char* config_json,
                                 char** out_stats_json);

LLMFRAC_API int llmfrac_proofread(const char* in_path, const char* section_filter,
                                  const char* out_path, const char* config_json,
                                  char** out_stats_json);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* LLMFRAC_H */
