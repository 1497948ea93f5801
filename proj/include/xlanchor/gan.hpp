#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "xlanchor/linear_align.hpp"
#include "xlanchor/matrix.hpp"
#include "xlanchor/nn.hpp"
#include "xlanchor/rng.hpp"
#include "xlanchor/vecstore.hpp"

namespace xlanchor {

// Bidirectional adversarial mapping between two embedding spaces of equal
// dimension. G1 maps language a to b, G2 maps b to a. D_valid scores whether
// a concatenated pair [a | b] is a true translation pair; D_domain tells
// (x, G1(x)) pairs apart from (G2(y), y) pairs.

// dense(ReLU) -> batch norm, repeated per hidden width, then dense(tanh) back
// to the input dimension.
struct GeneratorNet {
  std::vector<DenseLayer> hidden;
  std::vector<BatchNormLayer> norms;
  DenseLayer output;

  std::size_t dim() const noexcept { return output.out_dim(); }
};

// [a | b] -> leaky-ReLU dense layers -> one sigmoid unit.
struct DiscriminatorNet {
  std::vector<DenseLayer> layers;
};

struct GanTrainConfig {
  std::size_t batch_size = 256;
  double lr = 2e-5;
  double lr_decay = 1e-5;
  std::size_t iterations = 10000;
  std::size_t checkpoint_every = 0;  // 0 disables checkpoint scoring
  std::size_t checkpoint_start = 0;  // first iteration eligible for scoring
  std::uint64_t seed = 0;
  double sup_weight = 1.0;  // weight of the MSE term in the generator loss
  double leaky_alpha = 0.2;
  std::vector<std::size_t> gen_hidden{2048, 4096, 2048};
  std::vector<std::size_t> disc_hidden{2048, 2048, 1024};

  // "10k": 10000 iterations, no checkpoints. "sweep": 50000 iterations,
  // scored every 2000 from 6000 on.
  static GanTrainConfig preset(const std::string& name);
  void validate() const;
};

struct GanModel {
  int layer = 0;
  std::size_t dim = 0;
  bool normalize_inputs = true;  // unit-length inputs before either generator
  GeneratorNet g1;
  GeneratorNet g2;
  DiscriminatorNet d_valid;
  DiscriminatorNet d_domain;
  AdamState adam_g1;
  AdamState adam_g2;
  AdamState adam_dv;
  AdamState adam_dd;
  std::uint64_t iteration = 0;
  Rng rng;  // batch sampling stream; persisted with the model
};

// Parameters are drawn from the seeded U(-1/sqrt(fan_in), 1/sqrt(fan_in))
// initializer in the order G1, G2, D_valid, D_domain.
GanModel init_gan(std::size_t dim, const GanTrainConfig& config, int layer = 0);

// Generator passes. The tape holds what backward needs.
struct GeneratorTape {
  std::vector<Matrix> dense_out;  // post-ReLU output of each hidden layer
  std::vector<Matrix> norm_out;   // batch norm output of each hidden layer
  std::vector<BatchNormCache> norm_cache;
  Matrix output;
};
Matrix generator_forward(GeneratorNet& g, const Matrix& input, GeneratorTape& tape);  // training mode
Matrix generator_infer(const GeneratorNet& g, const Matrix& input);                   // running statistics
// Gradients in trainable_params order.
std::vector<Matrix> generator_backward(const GeneratorNet& g, const Matrix& input, const GeneratorTape& tape,
                                       const Matrix& grad_out);
// W, b, gamma, beta per hidden layer, then W, b of the output layer.
ParamSpans trainable_params(GeneratorNet& g);

struct DiscriminatorTape {
  std::vector<Matrix> outputs;
};
Matrix discriminator_forward(const DiscriminatorNet& d, const Matrix& input, DiscriminatorTape* tape = nullptr);
struct DiscriminatorGrads {
  Matrix input;
  std::vector<Matrix> params;  // W, b per layer; empty when not requested
};
DiscriminatorGrads discriminator_backward(const DiscriminatorNet& d, const Matrix& input, const DiscriminatorTape& tape,
                                          const Matrix& grad_out, bool want_params, bool want_input);
ParamSpans trainable_params(DiscriminatorNet& d);

GradSpans as_grad_spans(const std::vector<Matrix>& grads);

enum class FakeKind : std::uint8_t { mismatched, g1_mapped, g2_mapped };

struct FakePair {
  FakeKind kind = FakeKind::mismatched;
  std::size_t a = 0;  // dataset row for the a side (or the source row)
  std::size_t b = 0;  // dataset row for the b side (mismatched only)
};

// Index form of one training step's data. `pairs` are distinct dataset rows
// used as real (x, y) pairs for both generators and D_valid. D_valid's fake
// rows cycle mismatched / (x, G1 x) / (G2 y, y); D_domain sees (x, G1 x) with
// label 1 and (G2 y, y) with label 0 for every pair.
struct TrainingBatch {
  std::vector<std::size_t> pairs;
  std::vector<FakePair> fakes;
};

TrainingBatch make_training_batch(std::size_t dataset_size, Rng& rng, std::size_t batch_size);

// Batch rows and labels as seen by the discriminators.
struct BatchMatrices {
  Matrix dvalid_input;  // 2B x 2dim: B real then B fake
  Matrix dvalid_labels;
  Matrix ddomain_input;  // 2B x 2dim: B (x, G1 x) then B (G2 y, y)
  Matrix ddomain_labels;
};
// `g1_out` / `g2_out` are G1(x) and G2(y) for the batch pairs.
BatchMatrices materialize_batch(const Matrix& x_all, const Matrix& y_all, const TrainingBatch& batch,
                                const Matrix& g1_out, const Matrix& g2_out);
// Same, with generator outputs computed in inference mode.
BatchMatrices materialize_batch(const GanModel& model, const Matrix& x_all, const Matrix& y_all,
                                const TrainingBatch& batch);

struct StepReport {
  std::uint64_t iteration = 0;
  double d_valid_loss = 0.0;
  double d_domain_loss = 0.0;
  double g1_adversarial = 0.0;
  double g2_adversarial = 0.0;
  double g1_supervised = 0.0;  // MSE(G1 x, y)
  double g2_supervised = 0.0;  // MSE(G2 y, x)
};

// One discriminator update (D_valid then D_domain) followed by one update of
// each generator against the refreshed discriminators. x_all / y_all are the
// training rows as fed to the generators.
StepReport train_step(GanModel& model, const Matrix& x_all, const Matrix& y_all, const TrainingBatch& batch,
                      const GanTrainConfig& config);

struct CheckpointScore {
  std::uint64_t iteration = 0;
  double avg_precision = 0.0;
};

using CheckpointCallback = std::function<void(const GanModel&, const CheckpointScore&)>;

// Runs config.iterations steps from the model's current iteration. Every
// checkpoint_every iterations (counted on the absolute iteration, from
// checkpoint_start on) the model is scored on eval_ds by dictionary
// induction and `on_checkpoint` is called.
std::vector<CheckpointScore> train(GanModel& model, const AnchorDataset& train_ds, const AnchorDataset& eval_ds,
                                   const GanTrainConfig& config, const CheckpointCallback& on_checkpoint = {},
                                   const std::function<void(const StepReport&)>& on_step = {});

// Rows as fed to the generators (unit-normalized when the model says so).
Matrix prepare_inputs(const GanModel& model, const Matrix& vectors);

// a_to_b uses G1, b_to_a uses G2; inference-mode batch norm.
Matrix map_vectors(const GanModel& model, const Matrix& vectors, Direction direction);
Vector map_vector(const GanModel& model, std::span<const double> v, Direction direction);

// Argmax of avg_precision, ties to the smallest iteration.
std::uint64_t select_best_iteration(std::span<const CheckpointScore> scores);

// "iteration\tavg_precision" per line.
void write_scores(std::ostream& out, std::span<const CheckpointScore> scores);
std::vector<CheckpointScore> read_scores(std::istream& in, const std::string& name = "<stream>");
void save_scores(std::span<const CheckpointScore> scores, const std::string& path);
std::vector<CheckpointScore> load_scores(const std::string& path);

// Binary model file, little endian:
//   "XLGAN" u8 version, u32 dim, u32 layer, u64 iteration, u8 flags, f64 leaky alpha
//   u32 network count; per network u32 tensor count and per tensor
//   (u8 kind, u32 rows, u32 cols)
//   every tensor's values as f32, networks G1, G2, D_valid, D_domain
//   "XLTS" training state: u64 rng state, then per network the Adam
//   hyperparameters, step and f64 moments.
// Parameters are kept at 32-bit precision in memory, so the round trip is exact.
void write_gan(std::ostream& out, const GanModel& model);
GanModel read_gan(std::istream& in, const std::string& name = "<stream>");
void save_gan(const GanModel& model, const std::string& path);
GanModel load_gan(const std::string& path);

// Rounds every value to the nearest 32-bit float.
void round_to_f32(std::span<double> values);
void round_parameters_to_f32(GanModel& model);

}  // namespace xlanchor
