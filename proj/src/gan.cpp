#include "xlanchor/gan.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "textio.hpp"
#include "xlanchor/error.hpp"
#include "xlanchor/xeval.hpp"

namespace xlanchor {

GanTrainConfig GanTrainConfig::preset(const std::string& name) {
  GanTrainConfig c;
  if (name == "10k") {
    c.iterations = 10000;
    c.checkpoint_every = 0;
  } else if (name == "sweep") {
    c.iterations = 50000;
    c.checkpoint_every = 2000;
    c.checkpoint_start = 6000;
  } else {
    throw_error(ErrorKind::validation, "unknown GAN preset '" + name + "' (expected 10k or sweep)");
  }
  return c;
}

void GanTrainConfig::validate() const {
  require(batch_size >= 2, ErrorKind::validation, "batch_size must be at least 2");
  require(std::isfinite(lr) && lr > 0.0, ErrorKind::validation, "lr must be positive");
  require(std::isfinite(lr_decay) && lr_decay >= 0.0, ErrorKind::validation, "lr_decay must be non-negative");
  require(std::isfinite(sup_weight) && sup_weight >= 0.0, ErrorKind::validation, "sup_weight must be non-negative");
  require(leaky_alpha > 0.0 && leaky_alpha < 1.0, ErrorKind::validation, "leaky_alpha must be in (0, 1)");
  require(!gen_hidden.empty() && !disc_hidden.empty(), ErrorKind::validation, "hidden widths must be non-empty");
  for (auto w : gen_hidden) require(w >= 1, ErrorKind::validation, "generator widths must be positive");
  for (auto w : disc_hidden) require(w >= 1, ErrorKind::validation, "discriminator widths must be positive");
}

void round_to_f32(std::span<double> values) {
  for (auto& v : values) v = static_cast<double>(static_cast<float>(v));
}

namespace {

GeneratorNet make_generator(std::size_t dim, const std::vector<std::size_t>& widths, Rng& rng) {
  GeneratorNet g;
  std::size_t in = dim;
  for (auto w : widths) {
    g.hidden.push_back(DenseLayer::uniform_init(in, w, {Activation::relu}, rng));
    g.norms.emplace_back(w);
    in = w;
  }
  g.output = DenseLayer::uniform_init(in, dim, {Activation::tanh}, rng);
  return g;
}

DiscriminatorNet make_discriminator(std::size_t dim, const std::vector<std::size_t>& widths, double alpha, Rng& rng) {
  DiscriminatorNet d;
  std::size_t in = 2 * dim;
  for (auto w : widths) {
    d.layers.push_back(DenseLayer::uniform_init(in, w, {Activation::leaky_relu, alpha}, rng));
    in = w;
  }
  d.layers.push_back(DenseLayer::uniform_init(in, 1, {Activation::sigmoid}, rng));
  return d;
}

AdamState make_adam(const GanTrainConfig& c) {
  AdamState a;
  a.lr = c.lr;
  a.lr_decay = c.lr_decay;
  return a;
}

std::span<double> span_of(Matrix& m) { return {m.data(), m.size()}; }
std::span<double> span_of(Vector& v) { return {v.data(), v.size()}; }

Matrix row_matrix(const Vector& v) { return Matrix(1, v.size(), v); }

void quantize(GeneratorNet& g) {
  for (auto& s : trainable_params(g)) round_to_f32(s);
  for (auto& n : g.norms) {
    round_to_f32(span_of(n.running_mean));
    round_to_f32(span_of(n.running_var));
  }
}

void quantize(DiscriminatorNet& d) {
  for (auto& s : trainable_params(d)) round_to_f32(s);
}

// Places a and b side by side into row r of out.
void put_pair(Matrix& out, std::size_t r, std::span<const double> a, std::span<const double> b) {
  auto row = out.row(r);
  std::copy(a.begin(), a.end(), row.begin());
  std::copy(b.begin(), b.end(), row.begin() + static_cast<std::ptrdiff_t>(a.size()));
}

Matrix labels(std::size_t ones, std::size_t zeros) {
  Matrix m(ones + zeros, 1, 0.0);
  for (std::size_t i = 0; i < ones; ++i) m(i, 0) = 1.0;
  return m;
}

void check_finite(double v, const char* what, std::uint64_t iteration) {
  if (!std::isfinite(v))
    throw_error(ErrorKind::numerical,
                std::string("non-finite ") + what + " at iteration " + std::to_string(iteration));
}

// Column block [begin, begin + count) of an input gradient.
Matrix take_columns(const Matrix& m, std::size_t begin, std::size_t count) { return column_block(m, begin, count); }

void add_into(Matrix& acc, const Matrix& m) {
  auto* a = acc.data();
  const auto* b = m.data();
  for (std::size_t i = 0; i < acc.size(); ++i) a[i] += b[i];
}

}  // namespace

GanModel init_gan(std::size_t dim, const GanTrainConfig& config, int layer) {
  require(dim >= 1, ErrorKind::validation, "GAN dimension must be at least 1");
  require(layer >= 0 && layer < static_cast<int>(kLayers), ErrorKind::validation, "layer must be 0, 1 or 2");
  config.validate();
  GanModel m;
  m.layer = layer;
  m.dim = dim;
  Rng init(config.seed);
  m.g1 = make_generator(dim, config.gen_hidden, init);
  m.g2 = make_generator(dim, config.gen_hidden, init);
  m.d_valid = make_discriminator(dim, config.disc_hidden, config.leaky_alpha, init);
  m.d_domain = make_discriminator(dim, config.disc_hidden, config.leaky_alpha, init);
  m.adam_g1 = m.adam_g2 = m.adam_dv = m.adam_dd = make_adam(config);
  m.rng = Rng(config.seed).fork(0x6261746368ULL);
  round_parameters_to_f32(m);
  return m;
}

void round_parameters_to_f32(GanModel& model) {
  quantize(model.g1);
  quantize(model.g2);
  quantize(model.d_valid);
  quantize(model.d_domain);
}

Matrix generator_forward(GeneratorNet& g, const Matrix& input, GeneratorTape& tape) {
  tape.dense_out.clear();
  tape.norm_out.clear();
  tape.dense_out.reserve(g.hidden.size());
  tape.norm_out.reserve(g.hidden.size());
  tape.norm_cache.assign(g.hidden.size(), {});
  const Matrix* cur = &input;
  for (std::size_t i = 0; i < g.hidden.size(); ++i) {
    tape.dense_out.push_back(dense_forward(g.hidden[i], *cur));
    tape.norm_out.push_back(batchnorm_forward(g.norms[i], tape.dense_out.back(), true, &tape.norm_cache[i]));
    cur = &tape.norm_out.back();
  }
  tape.output = dense_forward(g.output, *cur);
  return tape.output;
}

Matrix generator_infer(const GeneratorNet& g, const Matrix& input) {
  require(input.cols() == g.hidden.front().in_dim(), ErrorKind::shape, "generator input dimension mismatch");
  Matrix cur = input;
  for (std::size_t i = 0; i < g.hidden.size(); ++i) cur = batchnorm_infer(g.norms[i], dense_forward(g.hidden[i], cur));
  return dense_forward(g.output, cur);
}

std::vector<Matrix> generator_backward(const GeneratorNet& g, const Matrix& input, const GeneratorTape& tape,
                                       const Matrix& grad_out) {
  const std::size_t h = g.hidden.size();
  std::vector<Matrix> grads(4 * h + 2);
  const Matrix& last_in = h ? tape.norm_out.back() : input;
  auto og = dense_backward(g.output, last_in, tape.output, grad_out, h > 0, true);
  grads[4 * h] = std::move(og.weight);
  grads[4 * h + 1] = row_matrix(og.bias);
  Matrix grad = std::move(og.input);
  for (std::size_t k = h; k-- > 0;) {
    auto bg = batchnorm_backward(g.norms[k], tape.norm_cache[k], grad);
    grads[4 * k + 2] = row_matrix(bg.gamma);
    grads[4 * k + 3] = row_matrix(bg.beta);
    const Matrix& in = k ? tape.norm_out[k - 1] : input;
    auto dg = dense_backward(g.hidden[k], in, tape.dense_out[k], bg.input, k > 0, true);
    grads[4 * k] = std::move(dg.weight);
    grads[4 * k + 1] = row_matrix(dg.bias);
    grad = std::move(dg.input);
  }
  return grads;
}

ParamSpans trainable_params(GeneratorNet& g) {
  ParamSpans p;
  for (std::size_t i = 0; i < g.hidden.size(); ++i) {
    p.push_back(span_of(g.hidden[i].weight));
    p.push_back(span_of(g.hidden[i].bias));
    p.push_back(span_of(g.norms[i].gamma));
    p.push_back(span_of(g.norms[i].beta));
  }
  p.push_back(span_of(g.output.weight));
  p.push_back(span_of(g.output.bias));
  return p;
}

Matrix discriminator_forward(const DiscriminatorNet& d, const Matrix& input, DiscriminatorTape* tape) {
  require(input.cols() == d.layers.front().in_dim(), ErrorKind::shape, "discriminator input dimension mismatch");
  if (tape) tape->outputs.clear();
  Matrix cur = input;
  for (const auto& layer : d.layers) {
    cur = dense_forward(layer, cur);
    if (tape) tape->outputs.push_back(cur);
  }
  return cur;
}

DiscriminatorGrads discriminator_backward(const DiscriminatorNet& d, const Matrix& input, const DiscriminatorTape& tape,
                                          const Matrix& grad_out, bool want_params, bool want_input) {
  DiscriminatorGrads out;
  const std::size_t n = d.layers.size();
  if (want_params) out.params.resize(2 * n);
  Matrix grad = grad_out;
  for (std::size_t k = n; k-- > 0;) {
    const Matrix& in = k ? tape.outputs[k - 1] : input;
    const bool need_input = k > 0 || want_input;
    auto g = dense_backward(d.layers[k], in, tape.outputs[k], grad, need_input, want_params);
    if (want_params) {
      out.params[2 * k] = std::move(g.weight);
      out.params[2 * k + 1] = row_matrix(g.bias);
    }
    if (need_input) grad = std::move(g.input);
  }
  if (want_input) out.input = std::move(grad);
  return out;
}

ParamSpans trainable_params(DiscriminatorNet& d) {
  ParamSpans p;
  for (auto& l : d.layers) {
    p.push_back(span_of(l.weight));
    p.push_back(span_of(l.bias));
  }
  return p;
}

GradSpans as_grad_spans(const std::vector<Matrix>& grads) {
  GradSpans s;
  s.reserve(grads.size());
  for (const auto& g : grads) s.emplace_back(g.data(), g.size());
  return s;
}

TrainingBatch make_training_batch(std::size_t dataset_size, Rng& rng, std::size_t batch_size) {
  require(batch_size >= 2, ErrorKind::validation, "batch_size must be at least 2");
  if (dataset_size < batch_size)
    throw_error(ErrorKind::validation, "training set has " + std::to_string(dataset_size) +
                                           " pairs, fewer than the batch size " + std::to_string(batch_size));
  TrainingBatch b;
  b.pairs.reserve(batch_size);
  std::vector<char> taken(dataset_size, 0);
  while (b.pairs.size() < batch_size) {
    const auto i = static_cast<std::size_t>(rng.below(dataset_size));
    if (taken[i]) continue;
    taken[i] = 1;
    b.pairs.push_back(i);
  }
  b.fakes.reserve(batch_size);
  for (std::size_t k = 0; k < batch_size; ++k) {
    FakePair f;
    f.kind = static_cast<FakeKind>(k % 3);
    if (f.kind == FakeKind::mismatched) {
      f.a = static_cast<std::size_t>(rng.below(dataset_size));
      f.b = static_cast<std::size_t>(rng.below(dataset_size - 1));
      if (f.b >= f.a) ++f.b;
    } else {
      f.a = f.b = k;
    }
    b.fakes.push_back(f);
  }
  return b;
}

BatchMatrices materialize_batch(const Matrix& x_all, const Matrix& y_all, const TrainingBatch& batch,
                                const Matrix& g1_out, const Matrix& g2_out) {
  const std::size_t n = batch.pairs.size();
  const std::size_t d = x_all.cols();
  require(y_all.cols() == d && x_all.rows() == y_all.rows(), ErrorKind::shape, "training sides differ in shape");
  require(g1_out.rows() == n && g2_out.rows() == n && g1_out.cols() == d && g2_out.cols() == d, ErrorKind::shape,
          "generator outputs do not match the batch");
  require(batch.fakes.size() == n, ErrorKind::validation, "batch must hold one fake per real pair");
  BatchMatrices m;
  m.dvalid_input = Matrix(2 * n, 2 * d);
  m.ddomain_input = Matrix(2 * n, 2 * d);
  for (std::size_t k = 0; k < n; ++k) {
    const auto p = batch.pairs[k];
    put_pair(m.dvalid_input, k, x_all.row(p), y_all.row(p));
    const auto& f = batch.fakes[k];
    switch (f.kind) {
      case FakeKind::mismatched:
        put_pair(m.dvalid_input, n + k, x_all.row(f.a), y_all.row(f.b));
        break;
      case FakeKind::g1_mapped:
        put_pair(m.dvalid_input, n + k, x_all.row(batch.pairs[f.a]), g1_out.row(f.a));
        break;
      case FakeKind::g2_mapped:
        put_pair(m.dvalid_input, n + k, g2_out.row(f.a), y_all.row(batch.pairs[f.a]));
        break;
    }
    put_pair(m.ddomain_input, k, x_all.row(p), g1_out.row(k));
    put_pair(m.ddomain_input, n + k, g2_out.row(k), y_all.row(p));
  }
  m.dvalid_labels = labels(n, n);
  m.ddomain_labels = labels(n, n);
  return m;
}

BatchMatrices materialize_batch(const GanModel& model, const Matrix& x_all, const Matrix& y_all,
                                const TrainingBatch& batch) {
  const Matrix x = gather_rows(x_all, batch.pairs);
  const Matrix y = gather_rows(y_all, batch.pairs);
  return materialize_batch(x_all, y_all, batch, generator_infer(model.g1, x), generator_infer(model.g2, y));
}

namespace {

double update_discriminator(DiscriminatorNet& d, AdamState& adam, const Matrix& input, const Matrix& target) {
  DiscriminatorTape tape;
  const Matrix p = discriminator_forward(d, input, &tape);
  auto loss = bce_loss(p, target);
  auto g = discriminator_backward(d, input, tape, loss.grad, true, false);
  adam_step(adam, trainable_params(d), as_grad_spans(g.params));
  quantize(d);
  return loss.value;
}

// Adversarial loss of a generated batch against a frozen discriminator and
// its gradient with respect to the generated half of the input.
double adversarial_term(const DiscriminatorNet& d, const Matrix& input, double target, std::size_t gen_col,
                        std::size_t dim, Matrix& grad_acc) {
  DiscriminatorTape tape;
  const Matrix p = discriminator_forward(d, input, &tape);
  auto loss = bce_loss(p, Matrix(p.rows(), 1, target));
  auto g = discriminator_backward(d, input, tape, loss.grad, false, true);
  add_into(grad_acc, take_columns(g.input, gen_col, dim));
  return loss.value;
}

}  // namespace

StepReport train_step(GanModel& model, const Matrix& x_all, const Matrix& y_all, const TrainingBatch& batch,
                      const GanTrainConfig& config) {
  const std::size_t d = model.dim;
  require(x_all.cols() == d && y_all.cols() == d, ErrorKind::shape, "training vectors do not match the model dimension");
  const std::size_t n = batch.pairs.size();
  const Matrix x = gather_rows(x_all, batch.pairs);
  const Matrix y = gather_rows(y_all, batch.pairs);
  const std::uint64_t it = model.iteration + 1;

  GeneratorTape t1, t2;
  const Matrix gx = generator_forward(model.g1, x, t1);
  const Matrix gy = generator_forward(model.g2, y, t2);
  const BatchMatrices bm = materialize_batch(x_all, y_all, batch, gx, gy);

  StepReport r;
  r.d_valid_loss = update_discriminator(model.d_valid, model.adam_dv, bm.dvalid_input, bm.dvalid_labels);
  r.d_domain_loss = update_discriminator(model.d_domain, model.adam_dd, bm.ddomain_input, bm.ddomain_labels);
  check_finite(r.d_valid_loss, "D_valid loss", it);
  check_finite(r.d_domain_loss, "D_domain loss", it);

  // G1: (x, G1 x) should look valid and look like a (G2 y, y) pair.
  {
    const Matrix in = hconcat(x, gx);
    Matrix grad(n, d, 0.0);
    r.g1_adversarial = adversarial_term(model.d_valid, in, 1.0, d, d, grad);
    r.g1_adversarial += adversarial_term(model.d_domain, in, 0.0, d, d, grad);
    auto sup = mse_loss(gx, y);
    r.g1_supervised = sup.value;
    add_into(grad, config.sup_weight * sup.grad);
    check_finite(r.g1_adversarial + r.g1_supervised, "G1 loss", it);
    auto grads = generator_backward(model.g1, x, t1, grad);
    adam_step(model.adam_g1, trainable_params(model.g1), as_grad_spans(grads));
  }
  {
    const Matrix in = hconcat(gy, y);
    Matrix grad(n, d, 0.0);
    r.g2_adversarial = adversarial_term(model.d_valid, in, 1.0, 0, d, grad);
    r.g2_adversarial += adversarial_term(model.d_domain, in, 1.0, 0, d, grad);
    auto sup = mse_loss(gy, x);
    r.g2_supervised = sup.value;
    add_into(grad, config.sup_weight * sup.grad);
    check_finite(r.g2_adversarial + r.g2_supervised, "G2 loss", it);
    auto grads = generator_backward(model.g2, y, t2, grad);
    adam_step(model.adam_g2, trainable_params(model.g2), as_grad_spans(grads));
  }
  quantize(model.g1);
  quantize(model.g2);
  model.iteration = it;
  r.iteration = it;
  return r;
}

Matrix prepare_inputs(const GanModel& model, const Matrix& vectors) {
  require(vectors.cols() == model.dim, ErrorKind::shape,
          "vector dimension does not match the GAN model dimension");
  Matrix m = vectors;
  if (model.normalize_inputs) l2_normalize_rows(m);
  return m;
}

Matrix map_vectors(const GanModel& model, const Matrix& vectors, Direction direction) {
  const Matrix in = prepare_inputs(model, vectors);
  return generator_infer(direction == Direction::a_to_b ? model.g1 : model.g2, in);
}

Vector map_vector(const GanModel& model, std::span<const double> v, Direction direction) {
  require(v.size() == model.dim, ErrorKind::shape, "vector dimension does not match the GAN model dimension");
  const Matrix m(1, v.size(), Vector(v.begin(), v.end()));
  const Matrix out = map_vectors(model, m, direction);
  return Vector(out.values().begin(), out.values().end());
}

std::vector<CheckpointScore> train(GanModel& model, const AnchorDataset& train_ds, const AnchorDataset& eval_ds,
                                   const GanTrainConfig& config, const CheckpointCallback& on_checkpoint,
                                   const std::function<void(const StepReport&)>& on_step) {
  config.validate();
  std::vector<CheckpointScore> scores;
  if (config.iterations == 0) return scores;
  require(train_ds.dim == model.dim, ErrorKind::shape, "training data dimension does not match the model");
  require(train_ds.layer == model.layer, ErrorKind::validation, "training data layer does not match the model");
  if (config.checkpoint_every > 0) {
    require(eval_ds.dim == model.dim, ErrorKind::shape, "evaluation data dimension does not match the model");
    require(eval_ds.layer == model.layer, ErrorKind::validation, "evaluation data layer does not match the model");
    require(eval_ds.lang_a == train_ds.lang_a && eval_ds.lang_b == train_ds.lang_b, ErrorKind::validation,
            "training and evaluation data are for different language pairs");
    require(!eval_ds.records.empty(), ErrorKind::validation, "checkpoint scoring needs a non-empty evaluation set");
  }
  const Matrix x_all = prepare_inputs(model, train_ds.side_a());
  const Matrix y_all = prepare_inputs(model, train_ds.side_b());
  for (std::size_t s = 0; s < config.iterations; ++s) {
    const auto batch = make_training_batch(x_all.rows(), model.rng, config.batch_size);
    const auto report = train_step(model, x_all, y_all, batch, config);
    if (on_step) on_step(report);
    const auto it = model.iteration;
    if (config.checkpoint_every > 0 && it % config.checkpoint_every == 0 && it >= config.checkpoint_start) {
      CheckpointScore cs{it, induction_average(induction_score(model, eval_ds))};
      scores.push_back(cs);
      if (on_checkpoint) on_checkpoint(model, cs);
    }
  }
  return scores;
}

std::uint64_t select_best_iteration(std::span<const CheckpointScore> scores) {
  require(!scores.empty(), ErrorKind::validation, "no checkpoint scores to select from");
  const CheckpointScore* best = &scores.front();
  for (const auto& s : scores)
    if (s.avg_precision > best->avg_precision ||
        (s.avg_precision == best->avg_precision && s.iteration < best->iteration))
      best = &s;
  return best->iteration;
}

void write_scores(std::ostream& out, std::span<const CheckpointScore> scores) {
  for (const auto& s : scores) out << s.iteration << '\t' << detail::format_double(s.avg_precision) << '\n';
  if (!out) throw_error(ErrorKind::io, "failed to write checkpoint scores");
}

std::vector<CheckpointScore> read_scores(std::istream& in, const std::string& name) {
  detail::LineReader rd(in, name);
  std::vector<CheckpointScore> scores;
  std::string line;
  while (rd.next(line)) {
    if (line.empty() || line.front() == '#') continue;
    const auto f = detail::split(line, '\t');
    if (f.size() != 2) rd.fail("expected 'iteration<TAB>avg_precision'");
    CheckpointScore s;
    if (!detail::parse_u64(f[0], s.iteration)) rd.fail("bad iteration '" + std::string(f[0]) + "'");
    if (!detail::parse_double(f[1], s.avg_precision) || s.avg_precision < 0.0 || s.avg_precision > 1.0)
      rd.fail("bad avg_precision '" + std::string(f[1]) + "'");
    scores.push_back(s);
  }
  return scores;
}

void save_scores(std::span<const CheckpointScore> scores, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw_error(ErrorKind::io, "cannot open '" + path + "' for writing");
  write_scores(out, scores);
}

std::vector<CheckpointScore> load_scores(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw_error(ErrorKind::io, "cannot open '" + path + "'");
  return read_scores(in, path);
}

// ---------------------------------------------------------------------------
// Binary model file

namespace {

constexpr std::array<char, 5> kMagic{'X', 'L', 'G', 'A', 'N'};
constexpr std::array<char, 4> kStateTag{'X', 'L', 'T', 'S'};
constexpr std::uint8_t kVersion = 1;
constexpr std::uint32_t kNetworks = 4;
constexpr std::uint32_t kMaxDim = 1u << 24;

enum class TensorKind : std::uint8_t { weight, bias, gamma, beta, running_mean, running_var };

struct TensorRef {
  TensorKind kind;
  std::size_t rows;
  std::size_t cols;
  double* data;
};

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}
  void bytes(const void* p, std::size_t n) { out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n)); }
  void u8(std::uint8_t v) { bytes(&v, 1); }
  void u32(std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    bytes(b, 4);
  }
  void u64(std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    bytes(b, 8);
  }
  void f32(double v) { u32(std::bit_cast<std::uint32_t>(static_cast<float>(v))); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

 private:
  std::ostream& out_;
};

class Reader {
 public:
  Reader(std::istream& in, std::string name) : in_(in), name_(std::move(name)) {}
  [[noreturn]] void fail(const std::string& msg) const { throw_error(ErrorKind::format, name_ + ": " + msg); }
  void bytes(void* p, std::size_t n) {
    in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) fail("truncated GAN model file");
  }
  std::uint8_t u8() {
    std::uint8_t v;
    bytes(&v, 1);
    return v;
  }
  std::uint32_t u32() {
    unsigned char b[4];
    bytes(b, 4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    unsigned char b[8];
    bytes(b, 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
  }
  double f32() { return static_cast<double>(std::bit_cast<float>(u32())); }
  double f64() { return std::bit_cast<double>(u64()); }
  bool at_end() { return in_.peek() == std::char_traits<char>::eof(); }

 private:
  std::istream& in_;
  std::string name_;
};

std::vector<TensorRef> tensors(GeneratorNet& g) {
  std::vector<TensorRef> t;
  for (std::size_t i = 0; i < g.hidden.size(); ++i) {
    auto& l = g.hidden[i];
    auto& n = g.norms[i];
    t.push_back({TensorKind::weight, l.weight.rows(), l.weight.cols(), l.weight.data()});
    t.push_back({TensorKind::bias, 1, l.bias.size(), l.bias.data()});
    t.push_back({TensorKind::gamma, 1, n.gamma.size(), n.gamma.data()});
    t.push_back({TensorKind::beta, 1, n.beta.size(), n.beta.data()});
    t.push_back({TensorKind::running_mean, 1, n.running_mean.size(), n.running_mean.data()});
    t.push_back({TensorKind::running_var, 1, n.running_var.size(), n.running_var.data()});
  }
  t.push_back({TensorKind::weight, g.output.weight.rows(), g.output.weight.cols(), g.output.weight.data()});
  t.push_back({TensorKind::bias, 1, g.output.bias.size(), g.output.bias.data()});
  return t;
}

std::vector<TensorRef> tensors(DiscriminatorNet& d) {
  std::vector<TensorRef> t;
  for (auto& l : d.layers) {
    t.push_back({TensorKind::weight, l.weight.rows(), l.weight.cols(), l.weight.data()});
    t.push_back({TensorKind::bias, 1, l.bias.size(), l.bias.data()});
  }
  return t;
}

std::array<std::vector<TensorRef>, kNetworks> all_tensors(GanModel& m) {
  return {tensors(m.g1), tensors(m.g2), tensors(m.d_valid), tensors(m.d_domain)};
}

std::array<AdamState*, kNetworks> all_adam(GanModel& m) { return {&m.adam_g1, &m.adam_g2, &m.adam_dv, &m.adam_dd}; }

void write_adam(Writer& w, const AdamState& a) {
  w.f64(a.lr);
  w.f64(a.beta1);
  w.f64(a.beta2);
  w.f64(a.epsilon);
  w.f64(a.lr_decay);
  w.u64(a.step);
  w.u32(static_cast<std::uint32_t>(a.m.size()));
  for (std::size_t i = 0; i < a.m.size(); ++i) {
    w.u64(a.m[i].size());
    for (double v : a.m[i]) w.f64(v);
    for (double v : a.v[i]) w.f64(v);
  }
}

void read_adam(Reader& r, AdamState& a, const ParamSpans& params) {
  a.lr = r.f64();
  a.beta1 = r.f64();
  a.beta2 = r.f64();
  a.epsilon = r.f64();
  a.lr_decay = r.f64();
  a.step = r.u64();
  const auto count = r.u32();
  if (count != 0 && count != params.size()) r.fail("optimizer state does not match the network");
  a.m.assign(count, {});
  a.v.assign(count, {});
  for (std::size_t i = 0; i < count; ++i) {
    const auto len = r.u64();
    if (len != params[i].size()) r.fail("optimizer state does not match the network");
    a.m[i].resize(len);
    a.v[i].resize(len);
    for (auto& v : a.m[i]) v = r.f64();
    for (auto& v : a.v[i]) v = r.f64();
  }
}

// Rebuilds a network skeleton from (kind, rows, cols) entries.
struct Shape {
  TensorKind kind;
  std::uint32_t rows;
  std::uint32_t cols;
};

GeneratorNet generator_from_shapes(const std::vector<Shape>& s, std::size_t dim, Reader& r) {
  if (s.size() < 2 || (s.size() - 2) % 6 != 0) r.fail("bad generator shape table");
  GeneratorNet g;
  const std::size_t h = (s.size() - 2) / 6;
  std::size_t in = dim;
  for (std::size_t i = 0; i < h; ++i) {
    const Shape* t = &s[6 * i];
    const std::size_t w = t[0].cols;
    const std::array<TensorKind, 6> kinds{TensorKind::weight, TensorKind::bias, TensorKind::gamma,
                                          TensorKind::beta, TensorKind::running_mean, TensorKind::running_var};
    for (std::size_t j = 0; j < 6; ++j)
      if (t[j].kind != kinds[j] || (j > 0 && (t[j].rows != 1 || t[j].cols != w))) r.fail("bad generator shape table");
    if (t[0].rows != in || w == 0) r.fail("bad generator shape table");
    DenseLayer l;
    l.weight = Matrix(in, w);
    l.bias.assign(w, 0.0);
    l.act = {Activation::relu};
    g.hidden.push_back(std::move(l));
    g.norms.emplace_back(w);
    in = w;
  }
  const Shape* t = &s[6 * h];
  if (t[0].kind != TensorKind::weight || t[0].rows != in || t[0].cols != dim || t[1].kind != TensorKind::bias ||
      t[1].rows != 1 || t[1].cols != dim)
    r.fail("bad generator shape table");
  g.output.weight = Matrix(in, dim);
  g.output.bias.assign(dim, 0.0);
  g.output.act = {Activation::tanh};
  return g;
}

DiscriminatorNet discriminator_from_shapes(const std::vector<Shape>& s, std::size_t dim, double alpha, Reader& r) {
  if (s.size() < 4 || s.size() % 2 != 0) r.fail("bad discriminator shape table");
  DiscriminatorNet d;
  std::size_t in = 2 * dim;
  const std::size_t n = s.size() / 2;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& w = s[2 * i];
    const auto& b = s[2 * i + 1];
    if (w.kind != TensorKind::weight || b.kind != TensorKind::bias || w.rows != in || w.cols == 0 || b.rows != 1 ||
        b.cols != w.cols)
      r.fail("bad discriminator shape table");
    const bool last = i + 1 == n;
    if (last && w.cols != 1) r.fail("bad discriminator shape table");
    DenseLayer l;
    l.weight = Matrix(in, w.cols);
    l.bias.assign(w.cols, 0.0);
    l.act = last ? ActivationSpec{Activation::sigmoid} : ActivationSpec{Activation::leaky_relu, alpha};
    d.layers.push_back(std::move(l));
    in = w.cols;
  }
  return d;
}

}  // namespace

void write_gan(std::ostream& out, const GanModel& model) {
  GanModel& m = const_cast<GanModel&>(model);  // tensor views are only read here
  Writer w(out);
  w.bytes(kMagic.data(), kMagic.size());
  w.u8(kVersion);
  w.u32(static_cast<std::uint32_t>(m.dim));
  w.u32(static_cast<std::uint32_t>(m.layer));
  w.u64(m.iteration);
  w.u8(m.normalize_inputs ? 1 : 0);
  const double alpha = m.d_valid.layers.empty() ? 0.2 : m.d_valid.layers.front().act.alpha;
  w.f64(alpha);
  const auto all = all_tensors(m);
  w.u32(kNetworks);
  for (const auto& net : all) {
    w.u32(static_cast<std::uint32_t>(net.size()));
    for (const auto& t : net) {
      w.u8(static_cast<std::uint8_t>(t.kind));
      w.u32(static_cast<std::uint32_t>(t.rows));
      w.u32(static_cast<std::uint32_t>(t.cols));
    }
  }
  for (const auto& net : all)
    for (const auto& t : net)
      for (std::size_t i = 0; i < t.rows * t.cols; ++i) w.f32(t.data[i]);
  w.bytes(kStateTag.data(), kStateTag.size());
  w.u64(m.rng.state());
  for (auto* a : all_adam(m)) write_adam(w, *a);
  if (!out) throw_error(ErrorKind::io, "failed to write GAN model");
}

GanModel read_gan(std::istream& in, const std::string& name) {
  Reader r(in, name);
  std::array<char, 5> magic{};
  r.bytes(magic.data(), magic.size());
  if (magic != kMagic) r.fail("not a GAN model file (bad magic)");
  const auto version = r.u8();
  if (version != kVersion) r.fail("unsupported GAN model version " + std::to_string(version));
  GanModel m;
  const auto dim = r.u32();
  if (dim == 0 || dim > kMaxDim) r.fail("bad dimension " + std::to_string(dim));
  m.dim = dim;
  const auto layer = r.u32();
  if (layer >= kLayers) r.fail("bad layer " + std::to_string(layer));
  m.layer = static_cast<int>(layer);
  m.iteration = r.u64();
  const auto flags = r.u8();
  if (flags > 1) r.fail("bad flags");
  m.normalize_inputs = flags == 1;
  const double alpha = r.f64();
  if (!(alpha > 0.0 && alpha < 1.0)) r.fail("bad leaky slope");
  if (r.u32() != kNetworks) r.fail("expected four networks");
  std::array<std::vector<Shape>, kNetworks> shapes;
  for (auto& net : shapes) {
    const auto count = r.u32();
    if (count > 4096) r.fail("bad tensor count");
    for (std::uint32_t i = 0; i < count; ++i) {
      Shape s;
      const auto kind = r.u8();
      if (kind > static_cast<std::uint8_t>(TensorKind::running_var)) r.fail("bad tensor kind");
      s.kind = static_cast<TensorKind>(kind);
      s.rows = r.u32();
      s.cols = r.u32();
      if (s.rows > kMaxDim || s.cols > kMaxDim) r.fail("bad tensor shape");
      net.push_back(s);
    }
  }
  m.g1 = generator_from_shapes(shapes[0], dim, r);
  m.g2 = generator_from_shapes(shapes[1], dim, r);
  m.d_valid = discriminator_from_shapes(shapes[2], dim, alpha, r);
  m.d_domain = discriminator_from_shapes(shapes[3], dim, alpha, r);
  for (const auto& net : all_tensors(m))
    for (const auto& t : net)
      for (std::size_t i = 0; i < t.rows * t.cols; ++i) {
        t.data[i] = r.f32();
        if (!std::isfinite(t.data[i])) r.fail("non-finite parameter");
      }
  std::array<char, 4> tag{};
  r.bytes(tag.data(), tag.size());
  if (tag != kStateTag) r.fail("missing training state section");
  m.rng.set_state(r.u64());
  read_adam(r, m.adam_g1, trainable_params(m.g1));
  read_adam(r, m.adam_g2, trainable_params(m.g2));
  read_adam(r, m.adam_dv, trainable_params(m.d_valid));
  read_adam(r, m.adam_dd, trainable_params(m.d_domain));
  if (!r.at_end()) r.fail("trailing bytes after GAN model");
  return m;
}

void save_gan(const GanModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw_error(ErrorKind::io, "cannot open '" + path + "' for writing");
  write_gan(out, model);
  out.close();
  if (!out) throw_error(ErrorKind::io, "failed to write '" + path + "'");
}

GanModel load_gan(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_error(ErrorKind::io, "cannot open '" + path + "'");
  return read_gan(in, path);
}

}  // namespace xlanchor
