#include <CLI11.hpp>

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "xlanchor.h"

namespace {

struct Failure {
  xla_status status;
  std::string message;
};

void check(xla_status st) {
  if (st != XLA_OK) throw Failure{st, xla_last_error()};
}

[[noreturn]] void usage_error(const std::string& msg) { throw Failure{XLA_ERR_VALIDATION, msg}; }

template <class T, void (*Free)(T*)>
struct Handle {
  T* p = nullptr;
  Handle() = default;
  Handle(const Handle&) = delete;
  Handle& operator=(const Handle&) = delete;
  Handle(Handle&& o) noexcept : p(std::exchange(o.p, nullptr)) {}
  ~Handle() { Free(p); }
  T** out() { return &p; }
  T* get() const { return p; }
};

using Dict = Handle<xla_dictionary, xla_dictionary_free>;
using Corpus = Handle<xla_corpus, xla_corpus_free>;
using Dataset = Handle<xla_dataset, xla_dataset_free>;
using Model = Handle<xla_model, xla_model_free>;
using Scores = Handle<xla_scores, xla_scores_free>;
using Report = Handle<xla_report, xla_report_free>;
using Embeddings = Handle<xla_embeddings, xla_embeddings_free>;
using Terms = Handle<xla_terms, xla_terms_free>;

std::string fnv1a64(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Failure{XLA_ERR_IO, "cannot open '" + path + "'"};
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof buf);
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
  }
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(h));
  return hex;
}

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(17);
  s << v;
  return s.str();
}

// "key<TAB>value" record written next to every output file.
class Manifest {
 public:
  explicit Manifest(std::string command) { add("command", std::move(command)); }

  void add(const std::string& key, const std::string& value) { lines_.emplace_back(key, value); }
  void flag(const std::string& key, const std::string& value) { add("flag." + key, value); }
  void flag(const std::string& key, double value) { add("flag." + key, fmt(value)); }
  void flag(const std::string& key, std::uint64_t value) { add("flag." + key, std::to_string(value)); }
  void seed(std::uint64_t s) { add("seed", std::to_string(s)); }
  void input(const std::string& key, const std::string& path) {
    add("input." + key, path);
    add("digest." + key, "fnv1a64:" + fnv1a64(path));
  }

  void write_for(const std::string& output) const {
    const std::string path = output + ".manifest";
    std::ofstream out(path);
    if (!out) throw Failure{XLA_ERR_IO, "cannot open '" + path + "' for writing"};
    out << "version\t" << xla_version() << '\n';
    for (const auto& [k, v] : lines_) out << k << '\t' << v << '\n';
    out << "output\t" << output << '\n';
    if (!out) throw Failure{XLA_ERR_IO, "failed to write '" + path + "'"};
  }

 private:
  std::vector<std::pair<std::string, std::string>> lines_;
};

xla_direction parse_direction(const std::string& s, bool allow_both) {
  if (s == "a_to_b") return XLA_A_TO_B;
  if (s == "b_to_a") return XLA_B_TO_A;
  if (allow_both && s == "both") return XLA_BOTH;
  usage_error("bad direction '" + s + "'");
}

void print_report(const xla_report* r) {
  for (std::size_t i = 0; i < xla_report_size(r); ++i) {
    const char* metric;
    const char* dir;
    double v;
    check(xla_report_entry(r, i, &metric, &dir, &v));
    std::cout << metric << '\t' << dir << '\t' << fmt(v) << '\n';
  }
}

std::string join_widths(const std::vector<std::size_t>& w) {
  std::string s;
  for (std::size_t i = 0; i < w.size(); ++i) s += (i ? "," : "") + std::to_string(w[i]);
  return s;
}

// ---------------------------------------------------------------------------

struct CleanDictArgs {
  std::string in, out, profile_a, profile_b;
};

void run_clean_dict(const CleanDictArgs& a) {
  Dict in, out;
  check(xla_dictionary_load(a.in.c_str(), in.out()));
  std::size_t dropped = 0;
  check(xla_dictionary_clean(in.get(), a.profile_a.c_str(), a.profile_b.c_str(), out.out(), &dropped));
  check(xla_dictionary_save(out.get(), a.out.c_str()));
  Manifest m("clean-dict");
  m.flag("profile-a", a.profile_a);
  m.flag("profile-b", a.profile_b);
  m.input("in", a.in);
  m.write_for(a.out);
  std::cerr << "kept " << xla_dictionary_size(out.get()) << ", dropped " << dropped << '\n';
}

struct TriangulateArgs {
  std::string ac, cb, out;
};

void run_triangulate(const TriangulateArgs& a) {
  Dict ac, cb, out;
  check(xla_dictionary_load(a.ac.c_str(), ac.out()));
  check(xla_dictionary_load(a.cb.c_str(), cb.out()));
  check(xla_dictionary_triangulate(ac.get(), cb.get(), out.out()));
  check(xla_dictionary_save(out.get(), a.out.c_str()));
  Manifest m("triangulate");
  m.input("ac", a.ac);
  m.input("cb", a.cb);
  m.write_for(a.out);
}

struct BuildAnchorsArgs {
  std::string corpus_a, corpus_b, dict, out_prefix;
  std::size_t max_contexts = 20;
};

void run_build_anchors(const BuildAnchorsArgs& a) {
  Corpus ca, cb;
  Dict d;
  check(xla_corpus_load(a.corpus_a.c_str(), ca.out()));
  check(xla_corpus_load(a.corpus_b.c_str(), cb.out()));
  check(xla_dictionary_load(a.dict.c_str(), d.out()));
  xla_dataset* raw[3] = {};
  check(xla_build_anchors(ca.get(), cb.get(), d.get(), a.max_contexts, raw));
  Dataset ds[3];
  for (int l = 0; l < 3; ++l) ds[l].p = raw[l];
  Manifest m("build-anchors");
  m.flag("max-contexts", static_cast<std::uint64_t>(a.max_contexts));
  m.input("corpus-a", a.corpus_a);
  m.input("corpus-b", a.corpus_b);
  m.input("dict", a.dict);
  for (int l = 0; l < 3; ++l) {
    const std::string path = a.out_prefix + ".layer" + std::to_string(l) + ".pairs";
    check(xla_dataset_save(ds[l].get(), path.c_str()));
    m.write_for(path);
  }
  std::cerr << xla_dataset_size(ds[0].get()) << " anchor pairs per layer\n";
}

struct SplitArgs {
  std::string in, out_train, out_eval;
  double fraction = 0.985;
  std::uint64_t seed = 0;
};

void run_split(const SplitArgs& a) {
  Dataset ds, tr, ev;
  check(xla_dataset_load(a.in.c_str(), ds.out()));
  check(xla_dataset_split(ds.get(), a.fraction, a.seed, tr.out(), ev.out()));
  check(xla_dataset_save(tr.get(), a.out_train.c_str()));
  check(xla_dataset_save(ev.get(), a.out_eval.c_str()));
  Manifest m("split");
  m.seed(a.seed);
  m.flag("fraction", a.fraction);
  m.input("in", a.in);
  m.write_for(a.out_train);
  m.write_for(a.out_eval);
  std::cerr << "train " << xla_dataset_size(tr.get()) << ", eval " << xla_dataset_size(ev.get()) << '\n';
}

struct TrainLinearArgs {
  std::string train, mode = "procrustes", preset = "ELMoVM", out;
};

void run_train_linear(const TrainLinearArgs& a) {
  Dataset ds;
  Model model;
  check(xla_dataset_load(a.train.c_str(), ds.out()));
  check(xla_linear_train(ds.get(), a.mode.c_str(), a.preset.c_str(), model.out()));
  check(xla_model_save(model.get(), a.out.c_str()));
  char bits[6];
  check(xla_linear_preset_bits(a.preset.c_str(), bits));
  Manifest m("train-linear");
  m.flag("mode", a.mode);
  m.flag("preset", a.preset);
  m.add("vecmap.bits", bits);
  const char* names[5] = {"map_train_side", "normalize_at_train", "map_eval_side", "normalize_at_eval",
                          "normalize_for_fit"};
  for (int i = 0; i < 5; ++i) m.add(std::string("vecmap.") + names[i], std::string(1, bits[i]));
  m.input("train", a.train);
  m.write_for(a.out);
}

struct TrainGanArgs {
  std::vector<std::string> train, eval;
  int layer = -1;
  std::string preset = "10k";
  std::uint64_t seed = 0;
  std::string out, scores_out, resume, final_out;
  std::size_t iterations = 0, batch_size = 0, checkpoint_every = 0, checkpoint_start = 0;
  bool iterations_set = false, checkpoint_every_set = false, checkpoint_start_set = false;
  double lr = 0, lr_decay = -1, sup_weight = -1;
  std::vector<std::size_t> gen_hidden, disc_hidden;
  bool keep_checkpoints = false;
};

struct CheckpointSink {
  std::string out;
  bool keep = false;
  bool have_best = false;
  double best = -1.0;
  std::uint64_t best_iteration = 0;
};

xla_status on_checkpoint(void* user, const xla_model* model, std::uint64_t iteration, double avg) {
  auto* s = static_cast<CheckpointSink*>(user);
  std::cerr << "iteration " << iteration << " avg_precision " << fmt(avg) << '\n';
  if (s->keep) {
    const std::string path = s->out + ".iter" + std::to_string(iteration);
    if (const auto st = xla_model_save(model, path.c_str()); st != XLA_OK) return st;
  }
  if (!s->have_best || avg > s->best) {
    s->have_best = true;
    s->best = avg;
    s->best_iteration = iteration;
    return xla_model_save(model, s->out.c_str());
  }
  return XLA_OK;
}

struct GanJob {
  std::string train, eval, out, scores_out, final_out;
  std::uint64_t seed = 0;
  xla_status status = XLA_OK;
  std::string error;
  std::uint64_t selected = 0;
  std::uint64_t final_iteration = 0;
};

void train_one(const TrainGanArgs& a, const xla_gan_config& base, GanJob& job) {
  try {
    Dataset tr, ev;
    check(xla_dataset_load(job.train.c_str(), tr.out()));
    if (!job.eval.empty()) check(xla_dataset_load(job.eval.c_str(), ev.out()));
    const int layer = xla_dataset_layer(tr.get());
    if (a.layer >= 0 && a.layer != layer)
      usage_error("--layer " + std::to_string(a.layer) + " but '" + job.train + "' holds layer " + std::to_string(layer));
    xla_gan_config cfg = base;
    cfg.seed = job.seed;
    Model model;
    if (!a.resume.empty()) {
      check(xla_model_load(a.resume.c_str(), model.out()));
      if (xla_model_kind_of(model.get()) != XLA_MODEL_GAN) usage_error("--resume needs a GAN model");
    } else {
      check(xla_gan_init(xla_dataset_dim(tr.get()), layer, &cfg, model.out()));
    }
    CheckpointSink sink{job.out, a.keep_checkpoints};
    Scores scores;
    check(xla_gan_train(model.get(), tr.get(), ev.get(), &cfg, cfg.checkpoint_every ? on_checkpoint : nullptr, &sink,
                        scores.out()));
    job.final_iteration = xla_model_iteration(model.get());
    if (xla_scores_size(scores.get()) > 0) {
      check(xla_scores_select_best(scores.get(), &job.selected));
    } else {
      check(xla_model_save(model.get(), job.out.c_str()));
      job.selected = job.final_iteration;
    }
    if (!job.final_out.empty()) check(xla_model_save(model.get(), job.final_out.c_str()));
    if (!job.scores_out.empty()) check(xla_scores_save(scores.get(), job.scores_out.c_str()));
  } catch (const Failure& f) {
    job.status = f.status;
    job.error = f.message;
  }
}

void run_train_gan(const TrainGanArgs& a) {
  if (a.train.empty() || a.train.size() > 3) usage_error("--train takes one to three datasets");
  xla_gan_config cfg;
  check(xla_gan_config_preset(a.preset.c_str(), &cfg));
  if (a.iterations_set) cfg.iterations = a.iterations;
  if (a.batch_size) cfg.batch_size = a.batch_size;
  if (a.checkpoint_every_set) cfg.checkpoint_every = a.checkpoint_every;
  if (a.checkpoint_start_set) cfg.checkpoint_start = a.checkpoint_start;
  if (a.lr > 0) cfg.lr = a.lr;
  if (a.lr_decay >= 0) cfg.lr_decay = a.lr_decay;
  if (a.sup_weight >= 0) cfg.sup_weight = a.sup_weight;
  const auto set_widths = [](const std::vector<std::size_t>& w, std::size_t* dst, std::size_t& count) {
    if (w.empty()) return;
    if (w.size() > XLA_MAX_HIDDEN) usage_error("too many hidden widths");
    count = w.size();
    for (std::size_t i = 0; i < w.size(); ++i) dst[i] = w[i];
  };
  set_widths(a.gen_hidden, cfg.gen_hidden, cfg.gen_hidden_count);
  set_widths(a.disc_hidden, cfg.disc_hidden, cfg.disc_hidden_count);
  if (cfg.checkpoint_every && a.eval.empty()) usage_error("checkpoint scoring needs --eval");
  if (!a.eval.empty() && a.eval.size() != a.train.size()) usage_error("give one --eval per --train");
  if (a.train.size() > 1 && !a.resume.empty()) usage_error("--resume works with a single dataset");

  const bool multi = a.train.size() > 1;
  std::vector<GanJob> jobs(a.train.size());
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    auto& j = jobs[i];
    j.train = a.train[i];
    if (!a.eval.empty()) j.eval = a.eval[i];
    const std::string suffix = multi ? ".part" + std::to_string(i) : "";
    j.out = a.out + suffix;
    if (!a.scores_out.empty()) j.scores_out = a.scores_out + suffix;
    if (!a.final_out.empty()) j.final_out = a.final_out + suffix;
    j.seed = a.seed + i;
  }
  if (multi) {
    std::vector<std::thread> threads;
    for (auto& j : jobs) threads.emplace_back([&a, &cfg, &j] { train_one(a, cfg, j); });
    for (auto& t : threads) t.join();
  } else {
    train_one(a, cfg, jobs[0]);
  }
  for (const auto& j : jobs)
    if (j.status != XLA_OK) throw Failure{j.status, j.error};

  for (const auto& j : jobs) {
    Manifest m("train-gan");
    m.seed(j.seed);
    m.flag("preset", a.preset);
    m.flag("iterations", static_cast<std::uint64_t>(cfg.iterations));
    m.flag("batch-size", static_cast<std::uint64_t>(cfg.batch_size));
    m.flag("lr", cfg.lr);
    m.flag("lr-decay", cfg.lr_decay);
    m.flag("sup-weight", cfg.sup_weight);
    m.flag("checkpoint-every", static_cast<std::uint64_t>(cfg.checkpoint_every));
    m.flag("checkpoint-start", static_cast<std::uint64_t>(cfg.checkpoint_start));
    m.flag("gen-hidden", join_widths({cfg.gen_hidden, cfg.gen_hidden + cfg.gen_hidden_count}));
    m.flag("disc-hidden", join_widths({cfg.disc_hidden, cfg.disc_hidden + cfg.disc_hidden_count}));
    m.input("train", j.train);
    if (!j.eval.empty()) m.input("eval", j.eval);
    if (!a.resume.empty()) m.input("resume", a.resume);
    m.add("selected_iteration", std::to_string(j.selected));
    m.add("final_iteration", std::to_string(j.final_iteration));
    m.write_for(j.out);
    if (!j.scores_out.empty()) m.write_for(j.scores_out);
    if (!j.final_out.empty()) m.write_for(j.final_out);
    std::cout << j.out << '\t' << j.selected << '\n';
  }
}

struct SelectArgs {
  std::string scores, out;
};

void run_select(const SelectArgs& a) {
  Scores s;
  check(xla_scores_load(a.scores.c_str(), s.out()));
  std::uint64_t best = 0;
  check(xla_scores_select_best(s.get(), &best));
  double avg = 0;
  for (std::size_t i = 0; i < xla_scores_size(s.get()); ++i) {
    std::uint64_t it;
    double v;
    check(xla_scores_get(s.get(), i, &it, &v));
    if (it == best) {
      avg = v;
      break;
    }
  }
  std::cout << best << '\n';
  if (!a.out.empty()) {
    std::ofstream out(a.out);
    if (!out) throw Failure{XLA_ERR_IO, "cannot open '" + a.out + "' for writing"};
    out << "iteration\t" << best << "\navg_precision\t" << fmt(avg) << '\n';
    if (!out) throw Failure{XLA_ERR_IO, "failed to write '" + a.out + "'"};
    Manifest m("select-iterations");
    m.input("scores", a.scores);
    m.write_for(a.out);
  }
}

struct MapArgs {
  std::string model, in, out, direction = "a_to_b";
};

void run_map(const MapArgs& a) {
  const auto dir = parse_direction(a.direction, false);
  Model model;
  Embeddings in, out;
  check(xla_model_load(a.model.c_str(), model.out()));
  check(xla_embeddings_load(a.in.c_str(), in.out()));
  check(xla_embeddings_map(model.get(), in.get(), dir, out.out()));
  check(xla_embeddings_save(out.get(), a.out.c_str()));
  Manifest m("map-vectors");
  m.flag("direction", a.direction);
  m.input("model", a.model);
  m.input("in", a.in);
  m.write_for(a.out);
}

struct EvalInductionArgs {
  std::string model, eval, report, per_query;
};

void run_eval_induction(const EvalInductionArgs& a) {
  Model model;
  Dataset ds;
  Report rep;
  check(xla_model_load(a.model.c_str(), model.out()));
  check(xla_dataset_load(a.eval.c_str(), ds.out()));
  check(xla_eval_induction(model.get(), ds.get(), !a.per_query.empty(), rep.out()));
  check(xla_report_save(rep.get(), a.report.c_str()));
  if (!a.per_query.empty()) check(xla_report_save_per_query(rep.get(), a.per_query.c_str()));
  Manifest m("eval-induction");
  m.input("model", a.model);
  m.input("eval", a.eval);
  m.write_for(a.report);
  if (!a.per_query.empty()) m.write_for(a.per_query);
  print_report(rep.get());
}

struct EvalTermsArgs {
  std::string src_terms, trg_terms, corpus_src, corpus_trg, static_src, static_trg, report, direction = "both";
  std::vector<std::string> models;
};

void run_eval_terms(const EvalTermsArgs& a) {
  const auto dir = parse_direction(a.direction, true);
  if (a.models.size() != 1 && a.models.size() != 3) usage_error("--model takes one model or one per layer");
  Terms src, trg;
  Corpus cs, ct;
  Embeddings ss, st;
  check(xla_terms_load(a.src_terms.c_str(), src.out()));
  check(xla_terms_load(a.trg_terms.c_str(), trg.out()));
  check(xla_corpus_load(a.corpus_src.c_str(), cs.out()));
  check(xla_corpus_load(a.corpus_trg.c_str(), ct.out()));
  if (!a.static_src.empty()) check(xla_embeddings_load(a.static_src.c_str(), ss.out()));
  if (!a.static_trg.empty()) check(xla_embeddings_load(a.static_trg.c_str(), st.out()));
  std::vector<Model> models(a.models.size());
  std::vector<const xla_model*> ptrs;
  for (std::size_t i = 0; i < a.models.size(); ++i) {
    check(xla_model_load(a.models[i].c_str(), models[i].out()));
    ptrs.push_back(models[i].get());
  }
  Report rep;
  check(xla_eval_terms(src.get(), trg.get(), cs.get(), ct.get(), ss.get(), st.get(), ptrs.data(), ptrs.size(), dir,
                       rep.out()));
  check(xla_report_save(rep.get(), a.report.c_str()));
  Manifest m("eval-terms");
  m.flag("direction", a.direction);
  m.input("src-terms", a.src_terms);
  m.input("trg-terms", a.trg_terms);
  m.input("corpus-src", a.corpus_src);
  m.input("corpus-trg", a.corpus_trg);
  if (!a.static_src.empty()) m.input("static-src", a.static_src);
  if (!a.static_trg.empty()) m.input("static-trg", a.static_trg);
  for (std::size_t i = 0; i < a.models.size(); ++i) m.input("model" + std::to_string(i), a.models[i]);
  m.write_for(a.report);
  print_report(rep.get());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cross-lingual alignment of contextual embeddings"};
  app.set_version_flag("--version", std::string(xla_version()));
  app.set_config("--config", "", "key=value file with flag defaults ([subcommand] sections)");
  app.require_subcommand(1);

  CleanDictArgs clean;
  auto* c = app.add_subcommand("clean-dict", "Filter and normalize a bilingual dictionary");
  c->add_option("--in", clean.in)->required();
  c->add_option("--out", clean.out)->required();
  c->add_option("--profile-a", clean.profile_a, "lang[:strip|:nostrip]")->required();
  c->add_option("--profile-b", clean.profile_b, "lang[:strip|:nostrip]")->required();

  TriangulateArgs tri;
  auto* t = app.add_subcommand("triangulate", "Compose a-c and c-b dictionaries into a-b");
  t->add_option("--ac", tri.ac)->required();
  t->add_option("--cb", tri.cb)->required();
  t->add_option("--out", tri.out)->required();

  BuildAnchorsArgs ba;
  auto* b = app.add_subcommand("build-anchors", "Extract per-layer anchor pairs from aligned corpora");
  b->add_option("--corpus-a", ba.corpus_a)->required();
  b->add_option("--corpus-b", ba.corpus_b)->required();
  b->add_option("--dict", ba.dict)->required();
  b->add_option("--out-prefix", ba.out_prefix, "writes <prefix>.layer{0,1,2}.pairs")->required();
  b->add_option("--max-contexts", ba.max_contexts)->capture_default_str();

  SplitArgs sp;
  auto* s = app.add_subcommand("split", "Seeded train/eval split of an anchor dataset");
  s->add_option("--in", sp.in)->required();
  s->add_option("--out-train", sp.out_train)->required();
  s->add_option("--out-eval", sp.out_eval)->required();
  s->add_option("--fraction", sp.fraction)->capture_default_str();
  s->add_option("--seed", sp.seed)->capture_default_str();

  TrainLinearArgs tl;
  auto* l = app.add_subcommand("train-linear", "Fit a linear (Procrustes or least-squares) map");
  l->add_option("--train", tl.train)->required();
  l->add_option("--mode", tl.mode, "procrustes|orthogonal|lsq|least_squares")->capture_default_str();
  l->add_option("--preset", tl.preset, "ELMoVM|orth|nonorm|evalnorm|def")->capture_default_str();
  l->add_option("--out", tl.out)->required();

  TrainGanArgs tg;
  auto* g = app.add_subcommand("train-gan", "Train the bidirectional GAN mapping");
  g->add_option("--train", tg.train, "anchor dataset; up to three (one per layer) train concurrently")->required();
  g->add_option("--eval", tg.eval, "evaluation dataset, one per --train");
  g->add_option("--layer", tg.layer, "expected layer of the data");
  g->add_option("--preset", tg.preset, "10k|sweep")->capture_default_str();
  g->add_option("--seed", tg.seed, "base seed; dataset i uses seed + i")->capture_default_str();
  g->add_option("--out", tg.out, "model file (the selected checkpoint when scoring)")->required();
  g->add_option("--scores-out", tg.scores_out);
  g->add_option("--final-out", tg.final_out, "also write the model after the last iteration");
  g->add_option("--resume", tg.resume, "continue training a saved GAN model");
  g->add_flag("--keep-checkpoints", tg.keep_checkpoints, "write <out>.iter<N> at each scored checkpoint");
  auto* gi = g->add_option("--iterations", tg.iterations);
  g->add_option("--batch-size", tg.batch_size);
  auto* ge = g->add_option("--checkpoint-every", tg.checkpoint_every);
  auto* gs = g->add_option("--checkpoint-start", tg.checkpoint_start);
  g->add_option("--lr", tg.lr);
  g->add_option("--lr-decay", tg.lr_decay);
  g->add_option("--sup-weight", tg.sup_weight);
  g->add_option("--gen-hidden", tg.gen_hidden)->delimiter(',');
  g->add_option("--disc-hidden", tg.disc_hidden)->delimiter(',');

  SelectArgs sel;
  auto* si = app.add_subcommand("select-iterations", "Pick the best-scoring checkpoint");
  si->add_option("--scores", sel.scores)->required();
  si->add_option("--out", sel.out);

  MapArgs mp;
  auto* m = app.add_subcommand("map-vectors", "Map an embedding table with a saved model");
  m->add_option("--model", mp.model)->required();
  m->add_option("--in", mp.in)->required();
  m->add_option("--out", mp.out)->required();
  m->add_option("--direction", mp.direction, "a_to_b|b_to_a")->capture_default_str();

  EvalInductionArgs ei;
  auto* e = app.add_subcommand("eval-induction", "Dictionary induction precision@1/5/10");
  e->add_option("--model", ei.model)->required();
  e->add_option("--eval", ei.eval)->required();
  e->add_option("--report", ei.report)->required();
  e->add_option("--per-query", ei.per_query, "write per-query diagnostics");

  EvalTermsArgs et;
  auto* tm = app.add_subcommand("eval-terms", "Terminology alignment accuracy@1");
  tm->add_option("--src-terms", et.src_terms)->required();
  tm->add_option("--trg-terms", et.trg_terms)->required();
  tm->add_option("--corpus-src", et.corpus_src)->required();
  tm->add_option("--corpus-trg", et.corpus_trg)->required();
  tm->add_option("--static-src", et.static_src);
  tm->add_option("--static-trg", et.static_trg);
  tm->add_option("--model", et.models, "one model, or three per-layer models")->required();
  tm->add_option("--report", et.report)->required();
  tm->add_option("--direction", et.direction, "a_to_b|b_to_a|both")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& err) {
    return app.exit(err);
  } catch (const CLI::CallForAllHelp& err) {
    return app.exit(err);
  } catch (const CLI::CallForVersion& err) {
    return app.exit(err);
  } catch (const CLI::ParseError& err) {
    app.exit(err);
    return XLA_ERR_VALIDATION;
  }

  tg.iterations_set = gi->count() > 0;
  tg.checkpoint_every_set = ge->count() > 0;
  tg.checkpoint_start_set = gs->count() > 0;

  try {
    if (c->parsed()) run_clean_dict(clean);
    else if (t->parsed()) run_triangulate(tri);
    else if (b->parsed()) run_build_anchors(ba);
    else if (s->parsed()) run_split(sp);
    else if (l->parsed()) run_train_linear(tl);
    else if (g->parsed()) run_train_gan(tg);
    else if (si->parsed()) run_select(sel);
    else if (m->parsed()) run_map(mp);
    else if (e->parsed()) run_eval_induction(ei);
    else if (tm->parsed()) run_eval_terms(et);
  } catch (const Failure& f) {
    std::cerr << "xlanchor-cli: error: " << f.message << '\n';
    return f.status;
  } catch (const std::exception& ex) {
    std::cerr << "xlanchor-cli: error: " << ex.what() << '\n';
    return XLA_ERR_INTERNAL;
  }
  return 0;
}
