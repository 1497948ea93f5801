#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "xlanchor/matrix.hpp"
#include "xlanchor/rng.hpp"

namespace xlanchor {

enum class Activation : std::uint8_t { identity, relu, leaky_relu, tanh, sigmoid };

struct ActivationSpec {
  Activation kind = Activation::identity;
  double alpha = 0.2;  // leaky_relu slope, in (0, 1)
};

// Fully connected layer: out = act(in * weight + bias).
struct DenseLayer {
  Matrix weight;  // in_dim x out_dim
  Vector bias;    // out_dim
  ActivationSpec act;

  std::size_t in_dim() const noexcept { return weight.rows(); }
  std::size_t out_dim() const noexcept { return weight.cols(); }

  // Weights and bias drawn from U(-1/sqrt(in), 1/sqrt(in)).
  static DenseLayer uniform_init(std::size_t in, std::size_t out, ActivationSpec act, Rng& rng);
};

struct DenseGrads {
  Matrix input;   // empty when not requested
  Matrix weight;  // empty when not requested
  Vector bias;
};

Matrix dense_forward(const DenseLayer& layer, const Matrix& input);

// `output` is the value returned by dense_forward for `input`; activation
// derivatives are read off it.
DenseGrads dense_backward(const DenseLayer& layer, const Matrix& input, const Matrix& output,
                          const Matrix& grad_out, bool want_input = true, bool want_params = true);
DenseGrads dense_backward(const DenseLayer& layer, const Matrix& input, const Matrix& grad_out);

void apply_activation(Matrix& m, ActivationSpec act);

struct BatchNormLayer {
  Vector gamma;
  Vector beta;
  Vector running_mean;
  Vector running_var;
  double momentum = 0.1;  // running = (1 - momentum) * running + momentum * batch
  double epsilon = 1e-5;

  explicit BatchNormLayer(std::size_t features = 0)
      : gamma(features, 1.0), beta(features, 0.0), running_mean(features, 0.0), running_var(features, 1.0) {}
  std::size_t features() const noexcept { return gamma.size(); }
};

struct BatchNormCache {
  Matrix normalized;  // x_hat
  Vector inv_std;
};

// Training mode normalizes with biased batch statistics and folds the
// unbiased batch variance into running_var; requires at least two rows.
Matrix batchnorm_forward(BatchNormLayer& layer, const Matrix& input, bool training,
                         BatchNormCache* cache = nullptr);
// Inference mode only; never touches running statistics.
Matrix batchnorm_infer(const BatchNormLayer& layer, const Matrix& input);

struct BatchNormGrads {
  Matrix input;
  Vector gamma;
  Vector beta;
};
BatchNormGrads batchnorm_backward(const BatchNormLayer& layer, const BatchNormCache& cache,
                                  const Matrix& grad_out);

struct LossResult {
  double value = 0.0;
  Matrix grad;  // d value / d predicted
};

inline constexpr double kProbClamp = 1e-7;

// Mean binary cross-entropy; predictions clamped to [1e-7, 1 - 1e-7].
LossResult bce_loss(const Matrix& predicted, const Matrix& target);
// Mean over all entries of (predicted - target)^2.
LossResult mse_loss(const Matrix& predicted, const Matrix& target);

using ParamSpans = std::vector<std::span<double>>;
using GradSpans = std::vector<std::span<const double>>;

// Adam with bias correction. The step size at update t (1-based) is
// lr / (1 + lr_decay * t).
struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double lr_decay = 0.0;
  std::uint64_t step = 0;
  std::vector<Vector> m;
  std::vector<Vector> v;

  double effective_lr(std::uint64_t t) const { return lr / (1.0 + lr_decay * static_cast<double>(t)); }
};

void adam_step(AdamState& state, const ParamSpans& params, const GradSpans& grads);

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::size_t worst_tensor = 0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  bool passed = false;
};

struct GradCheckOptions {
  double tolerance = 1e-4;
  double step = 1e-5;
  // Entries with max(|analytic|, |numeric|) below this are compared on an
  // absolute scale so that round-off on near-zero gradients is not amplified.
  double floor = 1e-6;
  // 0 checks every entry; otherwise a seeded sample of this many entries per tensor.
  std::size_t max_per_tensor = 0;
  std::uint64_t seed = 1;
};

// Central-difference check of `analytic` against `loss` evaluated while the
// entries of `params` are perturbed in place (and restored).
GradCheckReport grad_check(const std::function<double()>& loss, const ParamSpans& params,
                           const GradSpans& analytic, const GradCheckOptions& opts = {});

}  // namespace xlanchor
