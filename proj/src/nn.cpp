#include "xlanchor/nn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "xlanchor/error.hpp"

namespace xlanchor {

namespace {

void check_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw_error(ErrorKind::shape, std::string(op) + ": shape mismatch " + std::to_string(a.rows()) + "x" +
                                      std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                                      std::to_string(b.cols()));
}

// Largest double below 1; keeps saturated tanh / sigmoid outputs inside the open interval.
constexpr double kBelowOne = 1.0 - 0x1p-53;

double sigmoid(double z) {
  double p;
  if (z >= 0.0) {
    p = 1.0 / (1.0 + std::exp(-z));
  } else {
    const double e = std::exp(z);
    p = e / (1.0 + e);
  }
  return std::clamp(p, std::numeric_limits<double>::denorm_min(), kBelowOne);
}

// d act / d pre-activation, expressed through the activation's output.
double activation_slope(double out, ActivationSpec act) {
  switch (act.kind) {
    case Activation::identity: return 1.0;
    case Activation::relu: return out > 0.0 ? 1.0 : 0.0;
    case Activation::leaky_relu: return out > 0.0 ? 1.0 : act.alpha;
    case Activation::tanh: return 1.0 - out * out;
    case Activation::sigmoid: return out * (1.0 - out);
  }
  return 1.0;
}

}  // namespace

DenseLayer DenseLayer::uniform_init(std::size_t in, std::size_t out, ActivationSpec act, Rng& rng) {
  require(in >= 1 && out >= 1, ErrorKind::validation, "DenseLayer: dimensions must be positive");
  if (act.kind == Activation::leaky_relu)
    require(act.alpha > 0.0 && act.alpha < 1.0, ErrorKind::validation, "DenseLayer: leaky slope must be in (0,1)");
  DenseLayer layer;
  layer.act = act;
  layer.weight = Matrix(in, out);
  layer.bias.assign(out, 0.0);
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  for (double& w : layer.weight.values()) w = rng.uniform(-bound, bound);
  for (double& b : layer.bias) b = rng.uniform(-bound, bound);
  return layer;
}

void apply_activation(Matrix& m, ActivationSpec act) {
  switch (act.kind) {
    case Activation::identity: return;
    case Activation::relu:
      for (double& v : m.values()) v = v > 0.0 ? v : 0.0;
      return;
    case Activation::leaky_relu:
      for (double& v : m.values()) v = v > 0.0 ? v : act.alpha * v;
      return;
    case Activation::tanh:
      for (double& v : m.values()) v = std::clamp(std::tanh(v), -kBelowOne, kBelowOne);
      return;
    case Activation::sigmoid:
      for (double& v : m.values()) v = sigmoid(v);
      return;
  }
}

Matrix dense_forward(const DenseLayer& layer, const Matrix& input) {
  if (input.cols() != layer.in_dim())
    throw_error(ErrorKind::shape, "dense_forward: input has " + std::to_string(input.cols()) +
                                      " columns, layer expects " + std::to_string(layer.in_dim()));
  Matrix out = matmul(input, layer.weight);
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) row[c] += layer.bias[c];
  }
  apply_activation(out, layer.act);
  return out;
}

DenseGrads dense_backward(const DenseLayer& layer, const Matrix& input, const Matrix& output,
                          const Matrix& grad_out, bool want_input, bool want_params) {
  if (input.cols() != layer.in_dim()) throw_error(ErrorKind::shape, "dense_backward: input width mismatch");
  check_same_shape(output, grad_out, "dense_backward");
  if (output.rows() != input.rows() || output.cols() != layer.out_dim())
    throw_error(ErrorKind::shape, "dense_backward: output shape inconsistent with layer");

  Matrix delta = grad_out;
  if (layer.act.kind != Activation::identity) {
    const double* o = output.data();
    double* d = delta.data();
    for (std::size_t i = 0; i < delta.size(); ++i) d[i] *= activation_slope(o[i], layer.act);
  }
  DenseGrads g;
  if (want_params) {
    g.weight = matmul_tn(input, delta);
    g.bias.assign(layer.out_dim(), 0.0);
    for (std::size_t r = 0; r < delta.rows(); ++r) {
      auto row = delta.row(r);
      for (std::size_t c = 0; c < row.size(); ++c) g.bias[c] += row[c];
    }
  }
  if (want_input) g.input = matmul_nt(delta, layer.weight);
  return g;
}

DenseGrads dense_backward(const DenseLayer& layer, const Matrix& input, const Matrix& grad_out) {
  return dense_backward(layer, input, dense_forward(layer, input), grad_out);
}

Matrix batchnorm_forward(BatchNormLayer& layer, const Matrix& input, bool training, BatchNormCache* cache) {
  const std::size_t n = input.rows(), f = input.cols();
  if (f != layer.features())
    throw_error(ErrorKind::shape, "batchnorm_forward: expected " + std::to_string(layer.features()) +
                                      " features, got " + std::to_string(f));
  if (!training) return batchnorm_infer(layer, input);
  if (n < 2) throw_error(ErrorKind::validation, "batchnorm_forward: training mode needs batch size >= 2");

  Vector mean(f, 0.0), var(f, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    auto row = input.row(r);
    for (std::size_t c = 0; c < f; ++c) mean[c] += row[c];
  }
  for (double& m : mean) m /= static_cast<double>(n);
  for (std::size_t r = 0; r < n; ++r) {
    auto row = input.row(r);
    for (std::size_t c = 0; c < f; ++c) {
      const double d = row[c] - mean[c];
      var[c] += d * d;
    }
  }
  for (double& v : var) v /= static_cast<double>(n);

  Vector inv_std(f);
  for (std::size_t c = 0; c < f; ++c) inv_std[c] = 1.0 / std::sqrt(var[c] + layer.epsilon);

  Matrix xhat(n, f), out(n, f);
  for (std::size_t r = 0; r < n; ++r) {
    auto in = input.row(r);
    auto xh = xhat.row(r);
    auto o = out.row(r);
    for (std::size_t c = 0; c < f; ++c) {
      xh[c] = (in[c] - mean[c]) * inv_std[c];
      o[c] = layer.gamma[c] * xh[c] + layer.beta[c];
    }
  }

  const double unbias = static_cast<double>(n) / static_cast<double>(n - 1);
  for (std::size_t c = 0; c < f; ++c) {
    layer.running_mean[c] = (1.0 - layer.momentum) * layer.running_mean[c] + layer.momentum * mean[c];
    layer.running_var[c] = (1.0 - layer.momentum) * layer.running_var[c] + layer.momentum * var[c] * unbias;
  }
  if (cache) {
    cache->normalized = std::move(xhat);
    cache->inv_std = std::move(inv_std);
  }
  return out;
}

Matrix batchnorm_infer(const BatchNormLayer& layer, const Matrix& input) {
  const std::size_t f = input.cols();
  if (f != layer.features()) throw_error(ErrorKind::shape, "batchnorm_infer: feature count mismatch");
  Vector scale(f), shift(f);
  for (std::size_t c = 0; c < f; ++c) {
    scale[c] = layer.gamma[c] / std::sqrt(layer.running_var[c] + layer.epsilon);
    shift[c] = layer.beta[c] - layer.running_mean[c] * scale[c];
  }
  Matrix out(input.rows(), f);
  for (std::size_t r = 0; r < input.rows(); ++r) {
    auto in = input.row(r);
    auto o = out.row(r);
    for (std::size_t c = 0; c < f; ++c) o[c] = in[c] * scale[c] + shift[c];
  }
  return out;
}

BatchNormGrads batchnorm_backward(const BatchNormLayer& layer, const BatchNormCache& cache, const Matrix& grad_out) {
  check_same_shape(cache.normalized, grad_out, "batchnorm_backward");
  const std::size_t n = grad_out.rows(), f = grad_out.cols();
  BatchNormGrads g;
  g.gamma.assign(f, 0.0);
  g.beta.assign(f, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    auto dy = grad_out.row(r);
    auto xh = cache.normalized.row(r);
    for (std::size_t c = 0; c < f; ++c) {
      g.beta[c] += dy[c];
      g.gamma[c] += dy[c] * xh[c];
    }
  }
  // dx = gamma * inv_std / n * (n * dy - sum(dy) - x_hat * sum(dy * x_hat))
  const double nn = static_cast<double>(n);
  g.input = Matrix(n, f);
  for (std::size_t r = 0; r < n; ++r) {
    auto dy = grad_out.row(r);
    auto xh = cache.normalized.row(r);
    auto dx = g.input.row(r);
    for (std::size_t c = 0; c < f; ++c)
      dx[c] = layer.gamma[c] * cache.inv_std[c] / nn * (nn * dy[c] - g.beta[c] - xh[c] * g.gamma[c]);
  }
  return g;
}

LossResult bce_loss(const Matrix& predicted, const Matrix& target) {
  check_same_shape(predicted, target, "bce_loss");
  LossResult r;
  r.grad = Matrix(predicted.rows(), predicted.cols());
  const double n = static_cast<double>(predicted.size());
  if (predicted.size() == 0) return r;
  double total = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const double p = std::clamp(predicted.data()[i], kProbClamp, 1.0 - kProbClamp);
    const double t = target.data()[i];
    total -= t * std::log(p) + (1.0 - t) * std::log(1.0 - p);
    r.grad.data()[i] = (p - t) / (p * (1.0 - p) * n);
  }
  r.value = total / n;
  return r;
}

LossResult mse_loss(const Matrix& predicted, const Matrix& target) {
  check_same_shape(predicted, target, "mse_loss");
  LossResult r;
  r.grad = Matrix(predicted.rows(), predicted.cols());
  const double n = static_cast<double>(predicted.size());
  if (predicted.size() == 0) return r;
  double total = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const double d = predicted.data()[i] - target.data()[i];
    total += d * d;
    r.grad.data()[i] = 2.0 * d / n;
  }
  r.value = total / n;
  return r;
}

void adam_step(AdamState& state, const ParamSpans& params, const GradSpans& grads) {
  if (params.size() != grads.size()) throw_error(ErrorKind::shape, "adam_step: parameter/gradient count mismatch");
  if (state.m.empty()) {
    state.m.resize(params.size());
    state.v.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      state.m[i].assign(params[i].size(), 0.0);
      state.v[i].assign(params[i].size(), 0.0);
    }
  }
  if (state.m.size() != params.size()) throw_error(ErrorKind::shape, "adam_step: optimizer state does not match parameters");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].size() != grads[i].size() || state.m[i].size() != params[i].size())
      throw_error(ErrorKind::shape, "adam_step: tensor " + std::to_string(i) + " size mismatch");
  }

  const std::uint64_t t = ++state.step;
  const double lr = state.effective_lr(t);
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    double* p = params[i].data();
    const double* g = grads[i].data();
    double* m = state.m[i].data();
    double* v = state.v[i].data();
    for (std::size_t j = 0; j < params[i].size(); ++j) {
      m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * g[j];
      v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * g[j] * g[j];
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      p[j] -= lr * mhat / (std::sqrt(vhat) + state.epsilon);
    }
  }
}

GradCheckReport grad_check(const std::function<double()>& loss, const ParamSpans& params, const GradSpans& analytic,
                           const GradCheckOptions& opts) {
  if (params.size() != analytic.size()) throw_error(ErrorKind::shape, "grad_check: tensor count mismatch");
  GradCheckReport rep;
  Rng rng(opts.seed);
  for (std::size_t t = 0; t < params.size(); ++t) {
    if (params[t].size() != analytic[t].size())
      throw_error(ErrorKind::shape, "grad_check: tensor " + std::to_string(t) + " size mismatch");
    std::vector<std::size_t> idx;
    if (opts.max_per_tensor == 0 || opts.max_per_tensor >= params[t].size()) {
      idx.resize(params[t].size());
      for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    } else {
      for (std::size_t k = 0; k < opts.max_per_tensor; ++k) idx.push_back(static_cast<std::size_t>(rng.below(params[t].size())));
    }
    for (std::size_t i : idx) {
      double& p = params[t][i];
      const double saved = p;
      p = saved + opts.step;
      const double up = loss();
      p = saved - opts.step;
      const double down = loss();
      p = saved;
      const double numeric = (up - down) / (2.0 * opts.step);
      const double a = analytic[t][i];
      const double denom = std::max({std::abs(a), std::abs(numeric), opts.floor});
      const double rel = std::abs(a - numeric) / denom;
      ++rep.checked;
      if (rel > rep.max_rel_error) {
        rep.max_rel_error = rel;
        rep.worst_tensor = t;
        rep.worst_index = i;
        rep.worst_analytic = a;
        rep.worst_numeric = numeric;
      }
    }
  }
  rep.passed = rep.max_rel_error < opts.tolerance;
  return rep;
}

}  // namespace xlanchor
