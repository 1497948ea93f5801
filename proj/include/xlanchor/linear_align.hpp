#pragma once

#include <optional>
#include <string>

#include "xlanchor/matrix.hpp"
#include "xlanchor/vecstore.hpp"

namespace xlanchor {

// Side a of an anchor dataset is the evaluation language (the one mapped);
// side b is the training language whose space is the mapping target.
struct VecmapOptions {
  bool map_train_side = false;
  bool normalize_at_train = false;
  bool map_eval_side = true;
  bool normalize_at_eval = false;
  bool normalize_for_fit = false;

  // ELMoVM, orth, nonorm, evalnorm, def. Throws ErrorKind::validation otherwise.
  static VecmapOptions preset(const std::string& name);
  // Five '0'/'1' characters in field order.
  std::string bits() const;
  static VecmapOptions from_bits(const std::string& bits);
  bool operator==(const VecmapOptions&) const = default;
};

enum class LinearMode { orthogonal, least_squares };

const char* to_string(LinearMode mode);
LinearMode parse_linear_mode(const std::string& s);  // orthogonal|procrustes, least_squares|lsq

enum class MapSide { source_eval, target_train };
enum class Direction { a_to_b, b_to_a };

struct LinearMapModel {
  LinearMode mode = LinearMode::orthogonal;
  VecmapOptions options;
  std::size_t dim = 0;
  // Applied to side a. With map_train_side on an orthogonal fit, map_a = U
  // and map_b = V from svd(X^T Y) so both sides land in a shared space;
  // otherwise map_a is the a->b map and map_b the identity.
  Matrix map_a;
  Matrix map_b;
  // b->a map used for the reverse direction: W^T for orthogonal fits, a
  // separately fitted least-squares map otherwise.
  Matrix reverse;
  // Mean of the unit-length vectors of each side in the fitting data.
  Vector mean_a;
  Vector mean_b;
  bool rank_deficient = false;

  // The a->b map as one matrix (map_a * map_b^T).
  Matrix forward() const;
  bool operator==(const LinearMapModel&) const = default;
};

// W = U Vt with U S Vt = svd(X^T Y).
LinearMapModel procrustes(const Matrix& x, const Matrix& y);
// W = pinv(X) Y; the reverse map is pinv(Y) X.
LinearMapModel least_squares_map(const Matrix& x, const Matrix& y);

// unit length -> subtract mean -> unit length
void normalize_with_mean(Matrix& m, std::span<const double> mean);
Vector unit_mean(const Matrix& m);  // mean of the unit-normalized rows

LinearMapModel fit_vecmap(const AnchorDataset& anchors, const VecmapOptions& options, LinearMode mode);

// Side-aware application per the option flags.
Matrix apply_linear(const LinearMapModel& model, const Matrix& vectors, MapSide side);

// Maps vectors of one language into the other language's original space.
Matrix map_linear(const LinearMapModel& model, const Matrix& vectors, Direction direction);

// "XLMAP-LINEAR 1 <dim> <mode> <bits>" then mean_a, mean_b, map_a, map_b and
// reverse rows, full double precision.
void save_linear_model(const LinearMapModel& model, const std::string& path);
LinearMapModel load_linear_model(const std::string& path);
void write_linear_model(std::ostream& out, const LinearMapModel& model);
LinearMapModel read_linear_model(std::istream& in, const std::string& name = "<stream>");

}  // namespace xlanchor
