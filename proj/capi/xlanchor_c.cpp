#include "xlanchor.h"

#include <cstring>
#include <exception>
#include <fstream>
#include <memory>
#include <new>
#include <string>
#include <variant>

#include "xlanchor/anchors.hpp"
#include "xlanchor/error.hpp"
#include "xlanchor/gan.hpp"
#include "xlanchor/linear_align.hpp"
#include "xlanchor/vecstore.hpp"
#include "xlanchor/xeval.hpp"

using namespace xlanchor;

struct xla_dictionary {
  BilingualDictionary value;
};
struct xla_corpus {
  ContextCorpus value;
};
struct xla_dataset {
  AnchorDataset value;
};
struct xla_model {
  std::variant<LinearMapModel, GanModel> value;
};
struct xla_scores {
  std::vector<CheckpointScore> value;
};
struct xla_report {
  EvalReport value;
};
struct xla_embeddings {
  EmbeddingTable value;
};
struct xla_terms {
  std::vector<TermEntry> value;
};

namespace {

thread_local std::string g_last_error;

xla_status status_of(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::io: return XLA_ERR_IO;
    case ErrorKind::format:
    case ErrorKind::validation:
    case ErrorKind::shape: return XLA_ERR_VALIDATION;
    case ErrorKind::numerical: return XLA_ERR_NUMERIC;
  }
  return XLA_ERR_INTERNAL;
}

template <class F>
xla_status guarded(F&& f) {
  try {
    g_last_error.clear();
    return f();
  } catch (const Error& e) {
    g_last_error = e.what();
    return status_of(e.kind());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return XLA_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return XLA_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return XLA_ERR_INTERNAL;
  }
}

void need(const void* p, const char* what) {
  if (!p) throw_error(ErrorKind::validation, std::string(what) + " is NULL");
}

xla_status ok() { return XLA_OK; }

Direction to_direction(xla_direction d) {
  switch (d) {
    case XLA_A_TO_B: return Direction::a_to_b;
    case XLA_B_TO_A: return Direction::b_to_a;
    default: break;
  }
  throw_error(ErrorKind::validation, "direction must be a_to_b or b_to_a");
}

GanTrainConfig to_config(const xla_gan_config& c) {
  GanTrainConfig g;
  g.batch_size = c.batch_size;
  g.lr = c.lr;
  g.lr_decay = c.lr_decay;
  g.iterations = c.iterations;
  g.checkpoint_every = c.checkpoint_every;
  g.checkpoint_start = c.checkpoint_start;
  g.seed = c.seed;
  g.sup_weight = c.sup_weight;
  g.leaky_alpha = c.leaky_alpha;
  require(c.gen_hidden_count <= XLA_MAX_HIDDEN && c.disc_hidden_count <= XLA_MAX_HIDDEN, ErrorKind::validation,
          "too many hidden layers");
  g.gen_hidden.assign(c.gen_hidden, c.gen_hidden + c.gen_hidden_count);
  g.disc_hidden.assign(c.disc_hidden, c.disc_hidden + c.disc_hidden_count);
  g.validate();
  return g;
}

void from_config(const GanTrainConfig& g, xla_gan_config& c) {
  std::memset(&c, 0, sizeof c);
  c.batch_size = g.batch_size;
  c.lr = g.lr;
  c.lr_decay = g.lr_decay;
  c.iterations = g.iterations;
  c.checkpoint_every = g.checkpoint_every;
  c.checkpoint_start = g.checkpoint_start;
  c.seed = g.seed;
  c.sup_weight = g.sup_weight;
  c.leaky_alpha = g.leaky_alpha;
  c.gen_hidden_count = g.gen_hidden.size();
  for (std::size_t i = 0; i < g.gen_hidden.size(); ++i) c.gen_hidden[i] = g.gen_hidden[i];
  c.disc_hidden_count = g.disc_hidden.size();
  for (std::size_t i = 0; i < g.disc_hidden.size(); ++i) c.disc_hidden[i] = g.disc_hidden[i];
}

std::size_t model_dim(const xla_model& m) {
  return std::visit([](const auto& v) { return v.dim; }, m.value);
}

Mapper mapper_for(const xla_model& m, Direction d) {
  if (const auto* lin = std::get_if<LinearMapModel>(&m.value))
    return [lin, d](const Matrix& x) { return map_linear(*lin, x, d); };
  const auto* gan = &std::get<GanModel>(m.value);
  return [gan, d](const Matrix& x) { return map_vectors(*gan, x, d); };
}

Matrix map_with(const xla_model& m, const Matrix& in, Direction d) { return mapper_for(m, d)(in); }

// Converts an exception escaping a C callback boundary into a status-bearing error.
struct CallbackStop {
  xla_status status;
};

}  // namespace

extern "C" {

const char* xla_last_error(void) { return g_last_error.c_str(); }

const char* xla_version(void) { return "0.3.0"; }

// ---- dictionaries ----

xla_status xla_dictionary_load(const char* path, xla_dictionary** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = new xla_dictionary{load_dictionary(path)};
    return ok();
  });
}

xla_status xla_dictionary_save(const xla_dictionary* dict, const char* path) {
  return guarded([&] {
    need(dict, "dictionary");
    need(path, "path");
    save_dictionary(dict->value, path);
    return ok();
  });
}

void xla_dictionary_free(xla_dictionary* dict) { delete dict; }

size_t xla_dictionary_size(const xla_dictionary* dict) { return dict ? dict->value.pairs.size() : 0; }

xla_status xla_dictionary_pair(const xla_dictionary* dict, size_t i, const char** a, const char** b) {
  return guarded([&] {
    need(dict, "dictionary");
    require(i < dict->value.pairs.size(), ErrorKind::validation, "pair index out of range");
    if (a) *a = dict->value.pairs[i].first.c_str();
    if (b) *b = dict->value.pairs[i].second.c_str();
    return ok();
  });
}

xla_status xla_dictionary_clean(const xla_dictionary* in, const char* profile_a, const char* profile_b,
                                xla_dictionary** out, size_t* dropped) {
  return guarded([&] {
    need(in, "dictionary");
    need(profile_a, "profile_a");
    need(profile_b, "profile_b");
    need(out, "out");
    auto cleaned = clean_dictionary(in->value, LanguageProfile::parse(profile_a), LanguageProfile::parse(profile_b));
    if (dropped) {
      BilingualDictionary base = in->value;
      base.normalize();
      *dropped = base.pairs.size() >= cleaned.pairs.size() ? base.pairs.size() - cleaned.pairs.size() : 0;
    }
    *out = new xla_dictionary{std::move(cleaned)};
    return ok();
  });
}

xla_status xla_dictionary_triangulate(const xla_dictionary* ac, const xla_dictionary* cb, xla_dictionary** out) {
  return guarded([&] {
    need(ac, "ac");
    need(cb, "cb");
    need(out, "out");
    *out = new xla_dictionary{triangulate(ac->value, cb->value)};
    return ok();
  });
}

// ---- corpora and datasets ----

xla_status xla_corpus_load(const char* path, xla_corpus** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = new xla_corpus{load_context_corpus(path)};
    return ok();
  });
}

void xla_corpus_free(xla_corpus* corpus) { delete corpus; }

size_t xla_corpus_size(const xla_corpus* corpus) { return corpus ? corpus->value.contexts.size() : 0; }

xla_status xla_corpus_dims(const xla_corpus* corpus, size_t dims[3]) {
  return guarded([&] {
    need(corpus, "corpus");
    need(dims, "dims");
    for (std::size_t i = 0; i < kLayers; ++i) dims[i] = corpus->value.dims[i];
    return ok();
  });
}

xla_status xla_build_anchors(const xla_corpus* a, const xla_corpus* b, const xla_dictionary* dict, size_t max_contexts,
                             xla_dataset* out[3]) {
  return guarded([&] {
    need(a, "corpus_a");
    need(b, "corpus_b");
    need(dict, "dictionary");
    need(out, "out");
    auto ds = build_anchor_datasets(a->value, b->value, dict->value, max_contexts);
    std::array<std::unique_ptr<xla_dataset>, kLayers> made;
    for (std::size_t l = 0; l < kLayers; ++l) made[l] = std::make_unique<xla_dataset>(xla_dataset{std::move(ds[l])});
    for (std::size_t l = 0; l < kLayers; ++l) out[l] = made[l].release();
    return ok();
  });
}

xla_status xla_dataset_load(const char* path, xla_dataset** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = new xla_dataset{load_anchor_dataset(path)};
    return ok();
  });
}

xla_status xla_dataset_save(const xla_dataset* ds, const char* path) {
  return guarded([&] {
    need(ds, "dataset");
    need(path, "path");
    save_anchor_dataset(ds->value, path);
    return ok();
  });
}

void xla_dataset_free(xla_dataset* ds) { delete ds; }

size_t xla_dataset_size(const xla_dataset* ds) { return ds ? ds->value.size() : 0; }

size_t xla_dataset_dim(const xla_dataset* ds) { return ds ? ds->value.dim : 0; }

int xla_dataset_layer(const xla_dataset* ds) { return ds ? ds->value.layer : -1; }

xla_status xla_dataset_split(const xla_dataset* ds, double fraction, uint64_t seed, xla_dataset** train,
                             xla_dataset** eval) {
  return guarded([&] {
    need(ds, "dataset");
    need(train, "train");
    need(eval, "eval");
    Rng rng(seed);
    auto parts = split_dataset(ds->value, fraction, rng);
    auto t = std::make_unique<xla_dataset>(xla_dataset{std::move(parts.train)});
    auto e = std::make_unique<xla_dataset>(xla_dataset{std::move(parts.eval)});
    *train = t.release();
    *eval = e.release();
    return ok();
  });
}

// ---- models ----

xla_status xla_linear_train(const xla_dataset* train, const char* mode, const char* preset, xla_model** out) {
  return guarded([&] {
    need(train, "dataset");
    need(mode, "mode");
    need(preset, "preset");
    need(out, "out");
    const auto m = parse_linear_mode(mode);
    const auto opts = VecmapOptions::preset(preset);
    *out = new xla_model{fit_vecmap(train->value, opts, m)};
    return ok();
  });
}

xla_status xla_linear_preset_bits(const char* preset, char bits[6]) {
  return guarded([&] {
    need(preset, "preset");
    need(bits, "bits");
    const auto b = VecmapOptions::preset(preset).bits();
    std::memcpy(bits, b.c_str(), 6);
    return ok();
  });
}

xla_status xla_gan_config_preset(const char* name, xla_gan_config* out) {
  return guarded([&] {
    need(out, "out");
    from_config(name ? GanTrainConfig::preset(name) : GanTrainConfig{}, *out);
    return ok();
  });
}

xla_status xla_gan_init(size_t dim, int layer, const xla_gan_config* config, xla_model** out) {
  return guarded([&] {
    need(config, "config");
    need(out, "out");
    *out = new xla_model{init_gan(dim, to_config(*config), layer)};
    return ok();
  });
}

xla_status xla_gan_train(xla_model* model, const xla_dataset* train, const xla_dataset* eval,
                         const xla_gan_config* config, xla_checkpoint_fn on_checkpoint, void* user,
                         xla_scores** scores) {
  return guarded([&]() -> xla_status {
    need(model, "model");
    need(train, "train");
    need(config, "config");
    auto* gan = std::get_if<GanModel>(&model->value);
    require(gan != nullptr, ErrorKind::validation, "model is not a GAN model");
    const auto cfg = to_config(*config);
    require(eval != nullptr || cfg.checkpoint_every == 0, ErrorKind::validation,
            "checkpoint scoring needs an evaluation dataset");
    static const AnchorDataset kEmpty;
    CheckpointCallback cb;
    if (on_checkpoint)
      cb = [&](const GanModel&, const CheckpointScore& s) {
        const auto st = on_checkpoint(user, model, s.iteration, s.avg_precision);
        if (st != XLA_OK) throw CallbackStop{st};
      };
    std::vector<CheckpointScore> result;
    try {
      result = xlanchor::train(*gan, train->value, eval ? eval->value : kEmpty, cfg, cb);
    } catch (const CallbackStop& stop) {
      if (g_last_error.empty()) g_last_error = "training stopped by checkpoint callback";
      return stop.status;
    }
    if (scores) *scores = new xla_scores{std::move(result)};
    return XLA_OK;
  });
}

xla_status xla_model_load(const char* path, xla_model** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    std::ifstream in(path, std::ios::binary);
    if (!in) throw_error(ErrorKind::io, std::string("cannot open '") + path + "'");
    char head[5] = {};
    in.read(head, 5);
    in.close();
    if (in.gcount() == 5 && std::memcmp(head, "XLGAN", 5) == 0)
      *out = new xla_model{load_gan(path)};
    else
      *out = new xla_model{load_linear_model(path)};
    return ok();
  });
}

xla_status xla_model_save(const xla_model* model, const char* path) {
  return guarded([&] {
    need(model, "model");
    need(path, "path");
    if (const auto* lin = std::get_if<LinearMapModel>(&model->value))
      save_linear_model(*lin, path);
    else
      save_gan(std::get<GanModel>(model->value), path);
    return ok();
  });
}

void xla_model_free(xla_model* model) { delete model; }

xla_model_kind xla_model_kind_of(const xla_model* model) {
  return model && std::holds_alternative<GanModel>(model->value) ? XLA_MODEL_GAN : XLA_MODEL_LINEAR;
}

size_t xla_model_dim(const xla_model* model) { return model ? model_dim(*model) : 0; }

int xla_model_layer(const xla_model* model) {
  if (!model) return -1;
  const auto* gan = std::get_if<GanModel>(&model->value);
  return gan ? gan->layer : -1;
}

uint64_t xla_model_iteration(const xla_model* model) {
  if (!model) return 0;
  const auto* gan = std::get_if<GanModel>(&model->value);
  return gan ? gan->iteration : 0;
}

xla_status xla_model_map(const xla_model* model, const double* in, size_t rows, size_t cols, xla_direction direction,
                         double* out) {
  return guarded([&] {
    need(model, "model");
    require(rows == 0 || (in && out), ErrorKind::validation, "input and output buffers are required");
    if (cols != model_dim(*model))
      throw_error(ErrorKind::shape, "input dimension " + std::to_string(cols) + " does not match model dimension " +
                                        std::to_string(model_dim(*model)));
    if (rows == 0) return ok();
    const Matrix m(rows, cols, Vector(in, in + rows * cols));
    const Matrix r = map_with(*model, m, to_direction(direction));
    std::memcpy(out, r.data(), r.size() * sizeof(double));
    return ok();
  });
}

// ---- scores ----

xla_status xla_scores_load(const char* path, xla_scores** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = new xla_scores{load_scores(path)};
    return ok();
  });
}

xla_status xla_scores_save(const xla_scores* scores, const char* path) {
  return guarded([&] {
    need(scores, "scores");
    need(path, "path");
    save_scores(scores->value, path);
    return ok();
  });
}

void xla_scores_free(xla_scores* scores) { delete scores; }

size_t xla_scores_size(const xla_scores* scores) { return scores ? scores->value.size() : 0; }

xla_status xla_scores_get(const xla_scores* scores, size_t i, uint64_t* iteration, double* avg_precision) {
  return guarded([&] {
    need(scores, "scores");
    require(i < scores->value.size(), ErrorKind::validation, "score index out of range");
    if (iteration) *iteration = scores->value[i].iteration;
    if (avg_precision) *avg_precision = scores->value[i].avg_precision;
    return ok();
  });
}

xla_status xla_scores_select_best(const xla_scores* scores, uint64_t* iteration) {
  return guarded([&] {
    need(scores, "scores");
    need(iteration, "iteration");
    *iteration = select_best_iteration(scores->value);
    return ok();
  });
}

// ---- embeddings ----

xla_status xla_embeddings_load(const char* path, xla_embeddings** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = new xla_embeddings{load_embeddings(path)};
    return ok();
  });
}

xla_status xla_embeddings_save(const xla_embeddings* emb, const char* path) {
  return guarded([&] {
    need(emb, "embeddings");
    need(path, "path");
    save_embeddings(emb->value, path);
    return ok();
  });
}

void xla_embeddings_free(xla_embeddings* emb) { delete emb; }

size_t xla_embeddings_size(const xla_embeddings* emb) { return emb ? emb->value.size() : 0; }

size_t xla_embeddings_dim(const xla_embeddings* emb) { return emb ? emb->value.dim() : 0; }

xla_status xla_embeddings_map(const xla_model* model, const xla_embeddings* in, xla_direction direction,
                              xla_embeddings** out) {
  return guarded([&] {
    need(model, "model");
    need(in, "embeddings");
    need(out, "out");
    if (in->value.size() > 0 && in->value.dim() != model_dim(*model))
      throw_error(ErrorKind::shape, "embedding dimension " + std::to_string(in->value.dim()) +
                                        " does not match model dimension " + std::to_string(model_dim(*model)));
    Matrix mapped = in->value.size() ? map_with(*model, in->value.vectors(), to_direction(direction))
                                     : Matrix(0, model_dim(*model));
    *out = new xla_embeddings{EmbeddingTable(in->value.tokens(), std::move(mapped))};
    return ok();
  });
}

// ---- evaluation ----

xla_status xla_eval_induction(const xla_model* model, const xla_dataset* eval, int per_query, xla_report** out) {
  return guarded([&] {
    need(model, "model");
    need(eval, "dataset");
    need(out, "out");
    if (eval->value.dim != model_dim(*model))
      throw_error(ErrorKind::shape, "dataset dimension " + std::to_string(eval->value.dim) +
                                        " does not match model dimension " + std::to_string(model_dim(*model)));
    EvalReport rep = std::visit([&](const auto& m) { return induction_score(m, eval->value, per_query != 0); },
                                model->value);
    *out = new xla_report{std::move(rep)};
    return ok();
  });
}

xla_status xla_terms_load(const char* path, xla_terms** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = new xla_terms{load_terms(path)};
    return ok();
  });
}

void xla_terms_free(xla_terms* terms) { delete terms; }

size_t xla_terms_size(const xla_terms* terms) { return terms ? terms->value.size() : 0; }

xla_status xla_eval_terms(const xla_terms* src, const xla_terms* trg, const xla_corpus* corpus_src,
                          const xla_corpus* corpus_trg, const xla_embeddings* static_src,
                          const xla_embeddings* static_trg, const xla_model* const* models, size_t n_models,
                          xla_direction direction, xla_report** out) {
  return guarded([&] {
    need(src, "source terms");
    need(trg, "target terms");
    need(corpus_src, "source corpus");
    need(corpus_trg, "target corpus");
    need(out, "out");
    require(n_models == 1 || n_models == kLayers, ErrorKind::validation, "expected one model or one per layer");
    need(models, "models");
    for (std::size_t i = 0; i < n_models; ++i) need(models[i], "model");
    require(!src->value.empty() && !trg->value.empty(), ErrorKind::validation, "term lists are empty");
    require(corpus_src->value.dims == corpus_trg->value.dims, ErrorKind::shape, "corpora differ in layer dimensions");

    const auto vectors = [](const std::vector<TermEntry>& terms, const ContextCorpus& c, const xla_embeddings* st) {
      TermVectorizer tv(c, st ? &st->value : nullptr);
      Matrix m(terms.size(), tv.dim());
      for (std::size_t i = 0; i < terms.size(); ++i) {
        const Vector v = tv.term_vector(terms[i]);
        std::copy(v.begin(), v.end(), m.row(i).begin());
      }
      return m;
    };
    const Matrix sv = vectors(src->value, corpus_src->value, static_src);
    const Matrix tv = vectors(trg->value, corpus_trg->value, static_trg);

    Mapper ab, ba;
    if (n_models == 1) {
      ab = mapper_for(*models[0], Direction::a_to_b);
      ba = mapper_for(*models[0], Direction::b_to_a);
    } else {
      std::vector<std::size_t> widths(corpus_src->value.dims.begin(), corpus_src->value.dims.end());
      std::vector<Mapper> fwd, bwd;
      for (std::size_t l = 0; l < kLayers; ++l) {
        if (model_dim(*models[l]) != widths[l])
          throw_error(ErrorKind::shape, "model " + std::to_string(l) + " has dimension " +
                                            std::to_string(model_dim(*models[l])) + ", layer has " +
                                            std::to_string(widths[l]));
        fwd.push_back(mapper_for(*models[l], Direction::a_to_b));
        bwd.push_back(mapper_for(*models[l], Direction::b_to_a));
      }
      ab = sliced_mapper(widths, std::move(fwd));
      ba = sliced_mapper(std::move(widths), std::move(bwd));
    }
    if (n_models == 1 && model_dim(*models[0]) != sv.cols())
      throw_error(ErrorKind::shape, "model dimension " + std::to_string(model_dim(*models[0])) +
                                        " does not match term vector width " + std::to_string(sv.cols()));
    const EvalDirection dir = direction == XLA_A_TO_B   ? EvalDirection::a_to_b
                              : direction == XLA_B_TO_A ? EvalDirection::b_to_a
                                                        : EvalDirection::both;
    *out = new xla_report{terminology_accuracy(sv, tv, ab, ba, dir)};
    return ok();
  });
}

xla_status xla_report_save(const xla_report* report, const char* path) {
  return guarded([&] {
    need(report, "report");
    need(path, "path");
    std::ofstream f(path);
    if (!f) throw_error(ErrorKind::io, std::string("cannot open '") + path + "' for writing");
    write_report(f, report->value);
    f.close();
    if (!f) throw_error(ErrorKind::io, std::string("failed to write '") + path + "'");
    return ok();
  });
}

xla_status xla_report_save_per_query(const xla_report* report, const char* path) {
  return guarded([&] {
    need(report, "report");
    need(path, "path");
    std::ofstream f(path);
    if (!f) throw_error(ErrorKind::io, std::string("cannot open '") + path + "' for writing");
    write_per_query(f, report->value);
    f.close();
    if (!f) throw_error(ErrorKind::io, std::string("failed to write '") + path + "'");
    return ok();
  });
}

void xla_report_free(xla_report* report) { delete report; }

size_t xla_report_size(const xla_report* report) { return report ? report->value.values.size() : 0; }

xla_status xla_report_entry(const xla_report* report, size_t i, const char** metric, const char** direction,
                            double* value) {
  return guarded([&] {
    need(report, "report");
    require(i < report->value.values.size(), ErrorKind::validation, "report index out of range");
    const auto& e = report->value.values[i];
    if (metric) *metric = e.metric.c_str();
    if (direction) *direction = e.direction.c_str();
    if (value) *value = e.value;
    return ok();
  });
}

}  // extern "C"
