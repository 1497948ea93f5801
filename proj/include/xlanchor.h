#ifndef XLANCHOR_H
#define XLANCHOR_H

#include <stddef.h>
#include <stdint.h>

#if defined(XLA_BUILDING_LIBRARY)
#define XLA_API __attribute__((visibility("default")))
#else
#define XLA_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes double as process exit codes in the CLI. */
typedef enum xla_status {
  XLA_OK = 0,
  XLA_ERR_IO = 2,
  XLA_ERR_VALIDATION = 3, /* bad arguments, malformed input, shape mismatch */
  XLA_ERR_NUMERIC = 4,
  XLA_ERR_INTERNAL = 5
} xla_status;

typedef enum xla_direction { XLA_A_TO_B = 0, XLA_B_TO_A = 1, XLA_BOTH = 2 } xla_direction;

typedef enum xla_model_kind { XLA_MODEL_LINEAR = 1, XLA_MODEL_GAN = 2 } xla_model_kind;

typedef struct xla_dictionary xla_dictionary;
typedef struct xla_corpus xla_corpus;
typedef struct xla_dataset xla_dataset;
typedef struct xla_model xla_model;
typedef struct xla_scores xla_scores;
typedef struct xla_report xla_report;
typedef struct xla_embeddings xla_embeddings;
typedef struct xla_terms xla_terms;

/* Message of the last failed call on this thread; "" after success. */
XLA_API const char* xla_last_error(void);
XLA_API const char* xla_version(void);

/* ---- dictionaries ---- */
XLA_API xla_status xla_dictionary_load(const char* path, xla_dictionary** out);
XLA_API xla_status xla_dictionary_save(const xla_dictionary* dict, const char* path);
XLA_API void xla_dictionary_free(xla_dictionary* dict);
XLA_API size_t xla_dictionary_size(const xla_dictionary* dict);
XLA_API xla_status xla_dictionary_pair(const xla_dictionary* dict, size_t i, const char** a, const char** b);
/* Profiles are "lang", "lang:strip" or "lang:nostrip". `dropped` may be NULL. */
XLA_API xla_status xla_dictionary_clean(const xla_dictionary* in, const char* profile_a, const char* profile_b,
                                        xla_dictionary** out, size_t* dropped);
XLA_API xla_status xla_dictionary_triangulate(const xla_dictionary* ac, const xla_dictionary* cb, xla_dictionary** out);

/* ---- contextual corpora and anchor datasets ---- */
XLA_API xla_status xla_corpus_load(const char* path, xla_corpus** out);
XLA_API void xla_corpus_free(xla_corpus* corpus);
XLA_API size_t xla_corpus_size(const xla_corpus* corpus);
XLA_API xla_status xla_corpus_dims(const xla_corpus* corpus, size_t dims[3]);

/* Fills out[0..2] with one dataset per layer; free each. */
XLA_API xla_status xla_build_anchors(const xla_corpus* a, const xla_corpus* b, const xla_dictionary* dict,
                                     size_t max_contexts, xla_dataset* out[3]);
XLA_API xla_status xla_dataset_load(const char* path, xla_dataset** out);
XLA_API xla_status xla_dataset_save(const xla_dataset* ds, const char* path);
XLA_API void xla_dataset_free(xla_dataset* ds);
XLA_API size_t xla_dataset_size(const xla_dataset* ds);
XLA_API size_t xla_dataset_dim(const xla_dataset* ds);
XLA_API int xla_dataset_layer(const xla_dataset* ds);
XLA_API xla_status xla_dataset_split(const xla_dataset* ds, double fraction, uint64_t seed, xla_dataset** train,
                                     xla_dataset** eval);

/* ---- models ---- */
/* mode: orthogonal|procrustes|least_squares|lsq; preset: ELMoVM|orth|nonorm|evalnorm|def */
XLA_API xla_status xla_linear_train(const xla_dataset* train, const char* mode, const char* preset, xla_model** out);
/* Five '0'/'1' flags plus NUL: map train side, normalize at train, map eval
   side, normalize at eval, normalize for fit. */
XLA_API xla_status xla_linear_preset_bits(const char* preset, char bits[6]);

#define XLA_MAX_HIDDEN 8

typedef struct xla_gan_config {
  size_t batch_size;
  double lr;
  double lr_decay;
  size_t iterations;
  size_t checkpoint_every; /* 0: no checkpoint scoring */
  size_t checkpoint_start;
  uint64_t seed;
  double sup_weight;
  double leaky_alpha;
  size_t gen_hidden_count;
  size_t gen_hidden[XLA_MAX_HIDDEN];
  size_t disc_hidden_count;
  size_t disc_hidden[XLA_MAX_HIDDEN];
} xla_gan_config;

/* name: "10k" or "sweep"; NULL gives library defaults. */
XLA_API xla_status xla_gan_config_preset(const char* name, xla_gan_config* out);
XLA_API xla_status xla_gan_init(size_t dim, int layer, const xla_gan_config* config, xla_model** out);

/* Called after each scored checkpoint; return XLA_OK to continue, anything
   else stops training and becomes the result of xla_gan_train. */
typedef xla_status (*xla_checkpoint_fn)(void* user, const xla_model* model, uint64_t iteration, double avg_precision);

/* Runs config->iterations more steps. `scores` may be NULL; `eval` may be
   NULL when checkpoint_every is 0. */
XLA_API xla_status xla_gan_train(xla_model* model, const xla_dataset* train, const xla_dataset* eval,
                                 const xla_gan_config* config, xla_checkpoint_fn on_checkpoint, void* user,
                                 xla_scores** scores);

/* Detects the model type from the file header. */
XLA_API xla_status xla_model_load(const char* path, xla_model** out);
XLA_API xla_status xla_model_save(const xla_model* model, const char* path);
XLA_API void xla_model_free(xla_model* model);
XLA_API xla_model_kind xla_model_kind_of(const xla_model* model);
XLA_API size_t xla_model_dim(const xla_model* model);
XLA_API int xla_model_layer(const xla_model* model); /* -1 for linear models */
XLA_API uint64_t xla_model_iteration(const xla_model* model); /* 0 for linear models */
/* Row-major rows x dim in, rows x dim out. */
XLA_API xla_status xla_model_map(const xla_model* model, const double* in, size_t rows, size_t cols,
                                 xla_direction direction, double* out);

/* ---- checkpoint scores ---- */
XLA_API xla_status xla_scores_load(const char* path, xla_scores** out);
XLA_API xla_status xla_scores_save(const xla_scores* scores, const char* path);
XLA_API void xla_scores_free(xla_scores* scores);
XLA_API size_t xla_scores_size(const xla_scores* scores);
XLA_API xla_status xla_scores_get(const xla_scores* scores, size_t i, uint64_t* iteration, double* avg_precision);
XLA_API xla_status xla_scores_select_best(const xla_scores* scores, uint64_t* iteration);

/* ---- static embedding tables ---- */
XLA_API xla_status xla_embeddings_load(const char* path, xla_embeddings** out);
XLA_API xla_status xla_embeddings_save(const xla_embeddings* emb, const char* path);
XLA_API void xla_embeddings_free(xla_embeddings* emb);
XLA_API size_t xla_embeddings_size(const xla_embeddings* emb);
XLA_API size_t xla_embeddings_dim(const xla_embeddings* emb);
XLA_API xla_status xla_embeddings_map(const xla_model* model, const xla_embeddings* in, xla_direction direction,
                                      xla_embeddings** out);

/* ---- evaluation ---- */
XLA_API xla_status xla_eval_induction(const xla_model* model, const xla_dataset* eval, int per_query, xla_report** out);

XLA_API xla_status xla_terms_load(const char* path, xla_terms** out);
XLA_API void xla_terms_free(xla_terms* terms);
XLA_API size_t xla_terms_size(const xla_terms* terms);

/* Term vectors are the concatenated layers of each corpus. One model must
   match that width; three models are applied to the layer blocks in order.
   static_src / static_trg may be NULL. */
XLA_API xla_status xla_eval_terms(const xla_terms* src, const xla_terms* trg, const xla_corpus* corpus_src,
                                  const xla_corpus* corpus_trg, const xla_embeddings* static_src,
                                  const xla_embeddings* static_trg, const xla_model* const* models, size_t n_models,
                                  xla_direction direction, xla_report** out);

XLA_API xla_status xla_report_save(const xla_report* report, const char* path);
XLA_API xla_status xla_report_save_per_query(const xla_report* report, const char* path);
XLA_API void xla_report_free(xla_report* report);
XLA_API size_t xla_report_size(const xla_report* report);
XLA_API xla_status xla_report_entry(const xla_report* report, size_t i, const char** metric, const char** direction,
                                    double* value);

#ifdef __cplusplus
}
#endif

#endif
