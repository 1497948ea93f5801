#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <unistd.h>
#include <vector>

#include "xlanchor.h"

namespace fs = std::filesystem;

namespace {

struct Scratch {
  fs::path dir;
  Scratch() {
    dir = fs::temp_directory_path() / ("xla-capi-" + std::to_string(::getpid()) + "-" + std::to_string(counter()++));
    fs::create_directories(dir);
  }
  ~Scratch() {
    std::error_code ec;
    fs::remove_all(dir, ec);
  }
  std::string file(const std::string& name) const { return (dir / name).string(); }
  static int& counter() {
    static int c = 0;
    return c;
  }
};

void spit(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

// y is x with coordinates cycled by one, so a permutation maps a to b exactly.
std::string rotation_dataset(std::size_t n, std::size_t dim, unsigned seed, int layer = 0) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> nd;
  std::string s = "XLANCHOR-PAIRS 1 " + std::to_string(dim) + " en sl " + std::to_string(layer) + "\n";
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> x(dim);
    for (double& v : x) v = nd(gen);
    std::string a, b;
    char buf[64];
    for (std::size_t c = 0; c < dim; ++c) {
      std::snprintf(buf, sizeof buf, "%s%.17g", c ? " " : "", x[c]);
      a += buf;
      std::snprintf(buf, sizeof buf, "%s%.17g", c ? " " : "", x[(c + 1) % dim]);
      b += buf;
    }
    s += std::to_string(i) + "\ts" + std::to_string(i) + "\tt" + std::to_string(i) + "\t" + a + "\t" + b + "\n";
  }
  return s;
}

double report_value(const xla_report* r, const std::string& metric, const std::string& dir) {
  for (size_t i = 0; i < xla_report_size(r); ++i) {
    const char *m = nullptr, *d = nullptr;
    double v = 0;
    REQUIRE(xla_report_entry(r, i, &m, &d, &v) == XLA_OK);
    if (metric == m && dir == d) return v;
  }
  FAIL("metric not found: " << metric << " " << dir);
  return -1;
}

}  // namespace

TEST_CASE("errors are reported through status codes") {
  xla_dictionary* d = nullptr;
  CHECK(xla_dictionary_load("/nonexistent/dict.tsv", &d) == XLA_ERR_IO);
  CHECK(d == nullptr);
  CHECK(std::string(xla_last_error()).find("nonexistent") != std::string::npos);
  CHECK(xla_dictionary_load(nullptr, &d) == XLA_ERR_VALIDATION);
  char bits[6];
  CHECK(xla_linear_preset_bits("def", bits) == XLA_OK);
  CHECK(std::string(bits) == "00111");
  CHECK(std::string(xla_last_error()).empty());
  CHECK(xla_linear_preset_bits("bogus", bits) == XLA_ERR_VALIDATION);
  CHECK(std::string(xla_version()).size() > 0);

  Scratch s;
  spit(s.file("bad.pairs"), "XLANCHOR-PAIRS 1 2 en sl 0\n0\ta\tb\t1 x\t1 2\n");
  xla_dataset* ds = nullptr;
  CHECK(xla_dataset_load(s.file("bad.pairs").c_str(), &ds) == XLA_ERR_VALIDATION);
  CHECK(std::string(xla_last_error()).find(":2:") != std::string::npos);
}

TEST_CASE("dictionary cleaning and triangulation") {
  Scratch s;
  spit(s.file("d.tsv"), "#langs en sl\nnew york\tnew york\ncafé\tkava\ndog\tpes\n");
  xla_dictionary *d = nullptr, *clean = nullptr;
  REQUIRE(xla_dictionary_load(s.file("d.tsv").c_str(), &d) == XLA_OK);
  CHECK(xla_dictionary_size(d) == 3);
  size_t dropped = 0;
  REQUIRE(xla_dictionary_clean(d, "en:strip", "sl", &clean, &dropped) == XLA_OK);
  CHECK(xla_dictionary_size(clean) == 2);
  CHECK(dropped == 1);
  const char *a = nullptr, *b = nullptr;
  REQUIRE(xla_dictionary_pair(clean, 0, &a, &b) == XLA_OK);
  CHECK(std::string(a) == "cafe");
  CHECK(xla_dictionary_pair(clean, 5, &a, &b) == XLA_ERR_VALIDATION);

  spit(s.file("cb.tsv"), "pes\thund\nkava\tkaffee\n");
  xla_dictionary *cb = nullptr, *tri = nullptr;
  REQUIRE(xla_dictionary_load(s.file("cb.tsv").c_str(), &cb) == XLA_OK);
  REQUIRE(xla_dictionary_triangulate(clean, cb, &tri) == XLA_OK);
  CHECK(xla_dictionary_size(tri) == 2);
  REQUIRE(xla_dictionary_save(tri, s.file("tri.tsv").c_str()) == XLA_OK);
  xla_dictionary_free(d);
  xla_dictionary_free(clean);
  xla_dictionary_free(cb);
  xla_dictionary_free(tri);
  xla_dictionary_free(nullptr);
}

TEST_CASE("anchors from corpora") {
  Scratch s;
  spit(s.file("a.ctx"), "XLANCHOR-CTX 1 1 1 1\n#1 2\nThe\tthe\t0\t0\t0\nDog\tdog\t1\t2\t3\n");
  spit(s.file("b.ctx"), "XLANCHOR-CTX 1 1 1 1\n#1 1\nPes\tpes\t4\t5\t6\n");
  spit(s.file("d.tsv"), "dog\tpes\n");
  xla_corpus *ca = nullptr, *cb = nullptr;
  xla_dictionary* d = nullptr;
  REQUIRE(xla_corpus_load(s.file("a.ctx").c_str(), &ca) == XLA_OK);
  REQUIRE(xla_corpus_load(s.file("b.ctx").c_str(), &cb) == XLA_OK);
  REQUIRE(xla_dictionary_load(s.file("d.tsv").c_str(), &d) == XLA_OK);
  size_t dims[3];
  REQUIRE(xla_corpus_dims(ca, dims) == XLA_OK);
  CHECK(dims[2] == 1);
  CHECK(xla_corpus_size(ca) == 1);
  xla_dataset* out[3] = {nullptr, nullptr, nullptr};
  REQUIRE(xla_build_anchors(ca, cb, d, 20, out) == XLA_OK);
  for (int l = 0; l < 3; ++l) {
    CHECK(xla_dataset_size(out[l]) == 1);
    CHECK(xla_dataset_layer(out[l]) == l);
    CHECK(xla_dataset_dim(out[l]) == 1);
    xla_dataset_free(out[l]);
  }
  CHECK(xla_build_anchors(ca, cb, d, 0, out) == XLA_ERR_VALIDATION);
  xla_corpus_free(ca);
  xla_corpus_free(cb);
  xla_dictionary_free(d);
}

TEST_CASE("linear model through the C API") {
  Scratch s;
  spit(s.file("all.pairs"), rotation_dataset(300, 6, 1));
  xla_dataset *all = nullptr, *train = nullptr, *eval = nullptr;
  REQUIRE(xla_dataset_load(s.file("all.pairs").c_str(), &all) == XLA_OK);
  REQUIRE(xla_dataset_split(all, 0.9, 7, &train, &eval) == XLA_OK);
  CHECK(xla_dataset_size(train) == 270);
  CHECK(xla_dataset_size(eval) == 30);

  xla_model* m = nullptr;
  REQUIRE(xla_linear_train(train, "orthogonal", "nonorm", &m) == XLA_OK);
  CHECK(xla_model_kind_of(m) == XLA_MODEL_LINEAR);
  CHECK(xla_model_dim(m) == 6);
  const double in[6] = {1, 2, 3, 4, 5, 6};
  double out[6];
  REQUIRE(xla_model_map(m, in, 1, 6, XLA_A_TO_B, out) == XLA_OK);
  for (int c = 0; c < 6; ++c) CHECK(out[c] == doctest::Approx(in[(c + 1) % 6]).epsilon(1e-9));
  CHECK(xla_model_map(m, in, 1, 5, XLA_A_TO_B, out) == XLA_ERR_VALIDATION);

  xla_report* rep = nullptr;
  REQUIRE(xla_eval_induction(m, eval, 1, &rep) == XLA_OK);
  CHECK(report_value(rep, "precision@1", "a_to_b") == 1.0);
  REQUIRE(xla_report_save(rep, s.file("r.tsv").c_str()) == XLA_OK);
  REQUIRE(xla_report_save_per_query(rep, s.file("q.tsv").c_str()) == XLA_OK);
  xla_report_free(rep);

  REQUIRE(xla_model_save(m, s.file("m.lin").c_str()) == XLA_OK);
  xla_model* back = nullptr;
  REQUIRE(xla_model_load(s.file("m.lin").c_str(), &back) == XLA_OK);
  double out2[6];
  REQUIRE(xla_model_map(back, in, 1, 6, XLA_A_TO_B, out2) == XLA_OK);
  for (int c = 0; c < 6; ++c) CHECK(out2[c] == out[c]);
  xla_model_free(back);
  xla_model_free(m);
  CHECK(xla_linear_train(train, "cca", "def", &m) == XLA_ERR_VALIDATION);
  xla_dataset_free(all);
  xla_dataset_free(train);
  xla_dataset_free(eval);
}

namespace {

struct CallbackLog {
  std::vector<uint64_t> iterations;
  int stop_after = -1;
};

xla_status on_checkpoint(void* user, const xla_model* model, uint64_t iteration, double avg) {
  auto* log = static_cast<CallbackLog*>(user);
  log->iterations.push_back(iteration);
  CHECK(xla_model_iteration(model) == iteration);
  CHECK((avg >= 0.0 && avg <= 1.0));
  if (log->stop_after >= 0 && static_cast<int>(log->iterations.size()) > log->stop_after) return XLA_ERR_VALIDATION;
  return XLA_OK;
}

}  // namespace

TEST_CASE("GAN training through the C API") {
  Scratch s;
  spit(s.file("all.pairs"), rotation_dataset(120, 4, 2, 1));
  xla_dataset *all = nullptr, *train = nullptr, *eval = nullptr;
  REQUIRE(xla_dataset_load(s.file("all.pairs").c_str(), &all) == XLA_OK);
  REQUIRE(xla_dataset_split(all, 0.9, 1, &train, &eval) == XLA_OK);

  xla_gan_config cfg;
  REQUIRE(xla_gan_config_preset("sweep", &cfg) == XLA_OK);
  CHECK(cfg.iterations == 50000);
  CHECK(cfg.gen_hidden_count == 3);
  CHECK(cfg.gen_hidden[1] == 4096);
  REQUIRE(xla_gan_config_preset(nullptr, &cfg) == XLA_OK);
  CHECK(xla_gan_config_preset("nope", &cfg) == XLA_ERR_VALIDATION);
  cfg.batch_size = 8;
  cfg.lr = 1e-3;
  cfg.iterations = 40;
  cfg.checkpoint_every = 10;
  cfg.gen_hidden_count = 1;
  cfg.gen_hidden[0] = 8;
  cfg.disc_hidden_count = 1;
  cfg.disc_hidden[0] = 8;

  xla_model* m = nullptr;
  REQUIRE(xla_gan_init(4, 1, &cfg, &m) == XLA_OK);
  CHECK(xla_model_kind_of(m) == XLA_MODEL_GAN);
  CHECK(xla_model_layer(m) == 1);
  CallbackLog log;
  xla_scores* scores = nullptr;
  REQUIRE(xla_gan_train(m, train, eval, &cfg, on_checkpoint, &log, &scores) == XLA_OK);
  CHECK(log.iterations == std::vector<uint64_t>{10, 20, 30, 40});
  CHECK(xla_scores_size(scores) == 4);
  uint64_t best = 0;
  REQUIRE(xla_scores_select_best(scores, &best) == XLA_OK);
  CHECK(best % 10 == 0);
  REQUIRE(xla_scores_save(scores, s.file("s.tsv").c_str()) == XLA_OK);
  xla_scores* sb = nullptr;
  REQUIRE(xla_scores_load(s.file("s.tsv").c_str(), &sb) == XLA_OK);
  uint64_t it = 0;
  double v0 = 0, v1 = 0;
  REQUIRE(xla_scores_get(scores, 2, &it, &v0) == XLA_OK);
  REQUIRE(xla_scores_get(sb, 2, &it, &v1) == XLA_OK);
  CHECK(it == 30);
  CHECK(v0 == v1);
  xla_scores_free(sb);
  xla_scores_free(scores);

  REQUIRE(xla_model_save(m, s.file("g.bin").c_str()) == XLA_OK);
  xla_model* back = nullptr;
  REQUIRE(xla_model_load(s.file("g.bin").c_str(), &back) == XLA_OK);
  CHECK(xla_model_iteration(back) == 40);
  const double in[8] = {0.1, 0.2, 0.3, 0.4, -1, 0, 1, 0};
  double o1[8], o2[8];
  REQUIRE(xla_model_map(m, in, 2, 4, XLA_B_TO_A, o1) == XLA_OK);
  REQUIRE(xla_model_map(back, in, 2, 4, XLA_B_TO_A, o2) == XLA_OK);
  for (int i = 0; i < 8; ++i) CHECK(o1[i] == o2[i]);

  log = {};
  log.stop_after = 1;
  CHECK(xla_gan_train(back, train, eval, &cfg, on_checkpoint, &log, nullptr) == XLA_ERR_VALIDATION);
  CHECK(log.iterations.size() == 2);
  cfg.checkpoint_every = 0;
  CHECK(xla_gan_train(back, train, nullptr, &cfg, nullptr, nullptr, nullptr) == XLA_OK);
  cfg.checkpoint_every = 10;
  CHECK(xla_gan_train(back, train, nullptr, &cfg, nullptr, nullptr, nullptr) == XLA_ERR_VALIDATION);

  xla_model_free(back);
  xla_model_free(m);
  xla_dataset_free(all);
  xla_dataset_free(train);
  xla_dataset_free(eval);
}

TEST_CASE("terminology evaluation through the C API") {
  Scratch s;
  spit(s.file("src.ctx"), "XLANCHOR-CTX 1 1 1 1\n#1 2\nheart\theart\t1\t0\t0\nlung\tlung\t0\t1\t0\n");
  spit(s.file("trg.ctx"), "XLANCHOR-CTX 1 1 1 1\n#1 2\nsrce\tsrce\t1\t0.1\t0\npljuča\tpljuča\t0\t1\t0.1\n");
  spit(s.file("src.txt"), "heart\nlung\n");
  spit(s.file("trg.txt"), "srce\npljuča\n");
  spit(s.file("id.pairs"), "XLANCHOR-PAIRS 1 3 en sl 0\n0\ta\tb\t1 0 0\t1 0 0\n1\tc\td\t0 1 0\t0 1 0\n2\te\tf\t0 0 1\t0 0 1\n");
  xla_corpus *cs = nullptr, *ct = nullptr;
  xla_terms *ts = nullptr, *tt = nullptr;
  xla_dataset* ds = nullptr;
  REQUIRE(xla_corpus_load(s.file("src.ctx").c_str(), &cs) == XLA_OK);
  REQUIRE(xla_corpus_load(s.file("trg.ctx").c_str(), &ct) == XLA_OK);
  REQUIRE(xla_terms_load(s.file("src.txt").c_str(), &ts) == XLA_OK);
  REQUIRE(xla_terms_load(s.file("trg.txt").c_str(), &tt) == XLA_OK);
  CHECK(xla_terms_size(ts) == 2);
  REQUIRE(xla_dataset_load(s.file("id.pairs").c_str(), &ds) == XLA_OK);
  xla_model* m = nullptr;
  REQUIRE(xla_linear_train(ds, "orthogonal", "nonorm", &m) == XLA_OK);
  const xla_model* models[1] = {m};
  xla_report* rep = nullptr;
  REQUIRE(xla_eval_terms(ts, tt, cs, ct, nullptr, nullptr, models, 1, XLA_BOTH, &rep) == XLA_OK);
  CHECK(report_value(rep, "accuracy@1", "both") == 1.0);
  xla_report_free(rep);
  CHECK(xla_eval_terms(ts, tt, cs, ct, nullptr, nullptr, models, 2, XLA_BOTH, &rep) == XLA_ERR_VALIDATION);

  spit(s.file("miss.txt"), "heart\nkidney\n");
  xla_terms* tm = nullptr;
  REQUIRE(xla_terms_load(s.file("miss.txt").c_str(), &tm) == XLA_OK);
  CHECK(xla_eval_terms(tm, tt, cs, ct, nullptr, nullptr, models, 1, XLA_BOTH, &rep) == XLA_ERR_VALIDATION);
  CHECK(std::string(xla_last_error()).find("kidney") != std::string::npos);

  xla_terms_free(tm);
  xla_model_free(m);
  xla_dataset_free(ds);
  xla_terms_free(ts);
  xla_terms_free(tt);
  xla_corpus_free(cs);
  xla_corpus_free(ct);
}
