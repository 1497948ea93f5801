#include "xlanchor/linear_align.hpp"

#include <fstream>
#include <istream>
#include <ostream>

#include "textio.hpp"
#include "xlanchor/error.hpp"
#include "xlanchor/linalg.hpp"

namespace xlanchor {

namespace {

void check_pair(const Matrix& x, const Matrix& y, const char* op) {
  if (x.rows() != y.rows() || x.cols() != y.cols())
    throw_error(ErrorKind::shape, std::string(op) + ": X and Y must have the same shape");
  require(x.rows() >= 1 && x.cols() >= 1, ErrorKind::validation, "linear fit: empty anchor matrix");
}

}  // namespace

VecmapOptions VecmapOptions::preset(const std::string& name) {
  //                  train mapped, train norm, eval mapped, eval norm, fit norm
  if (name == "ELMoVM") return {true, true, true, true, true};
  if (name == "orth") return {false, false, true, false, true};
  if (name == "nonorm") return {false, false, true, false, false};
  if (name == "evalnorm") return {false, false, true, true, false};
  if (name == "def") return {false, false, true, true, true};
  throw_error(ErrorKind::validation, "unknown option preset '" + name + "' (expected ELMoVM, orth, nonorm, evalnorm, def)");
}

std::string VecmapOptions::bits() const {
  std::string s;
  for (bool b : {map_train_side, normalize_at_train, map_eval_side, normalize_at_eval, normalize_for_fit})
    s.push_back(b ? '1' : '0');
  return s;
}

VecmapOptions VecmapOptions::from_bits(const std::string& bits) {
  if (bits.size() != 5 || bits.find_first_not_of("01") != std::string::npos)
    throw_error(ErrorKind::format, "option bits must be five 0/1 characters, got '" + bits + "'");
  return {bits[0] == '1', bits[1] == '1', bits[2] == '1', bits[3] == '1', bits[4] == '1'};
}

const char* to_string(LinearMode mode) { return mode == LinearMode::orthogonal ? "orthogonal" : "least_squares"; }

LinearMode parse_linear_mode(const std::string& s) {
  if (s == "orthogonal" || s == "procrustes") return LinearMode::orthogonal;
  if (s == "least_squares" || s == "lsq") return LinearMode::least_squares;
  throw_error(ErrorKind::validation, "unknown linear mode '" + s + "'");
}

Matrix LinearMapModel::forward() const {
  if (options.map_train_side && mode == LinearMode::orthogonal) return matmul_nt(map_a, map_b);
  return map_a;
}

LinearMapModel procrustes(const Matrix& x, const Matrix& y) {
  check_pair(x, y, "procrustes");
  const Svd d = svd(matmul_tn(x, y));
  LinearMapModel m;
  m.mode = LinearMode::orthogonal;
  m.dim = x.cols();
  m.map_a = matmul(d.u, d.vt);
  m.map_b = Matrix::identity(m.dim);
  m.reverse = transpose(m.map_a);
  m.mean_a.assign(m.dim, 0.0);
  m.mean_b.assign(m.dim, 0.0);
  return m;
}

LinearMapModel least_squares_map(const Matrix& x, const Matrix& y) {
  check_pair(x, y, "least_squares_map");
  const PseudoInverse px = pseudo_inverse(x);
  const PseudoInverse py = pseudo_inverse(y);
  LinearMapModel m;
  m.mode = LinearMode::least_squares;
  m.dim = x.cols();
  m.map_a = matmul(px.pinv, y);
  m.map_b = Matrix::identity(m.dim);
  m.reverse = matmul(py.pinv, x);
  m.mean_a.assign(m.dim, 0.0);
  m.mean_b.assign(m.dim, 0.0);
  m.rank_deficient = px.rank_deficient || py.rank_deficient;
  return m;
}

Vector unit_mean(const Matrix& m) {
  Vector mean(m.cols(), 0.0);
  if (m.rows() == 0) return mean;
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const auto row = m.row(r);
    const double n = norm2(row);
    if (n == 0.0) continue;
    for (std::size_t c = 0; c < row.size(); ++c) mean[c] += row[c] / n;
  }
  for (double& v : mean) v /= static_cast<double>(m.rows());
  return mean;
}

void normalize_with_mean(Matrix& m, std::span<const double> mean) {
  if (mean.size() != m.cols()) throw_error(ErrorKind::shape, "normalize_with_mean: mean length mismatch");
  l2_normalize_rows(m);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) row[c] -= mean[c];
  }
  l2_normalize_rows(m);
}

LinearMapModel fit_vecmap(const AnchorDataset& anchors, const VecmapOptions& options, LinearMode mode) {
  require(!anchors.empty(), ErrorKind::validation, "fit_vecmap: empty anchor dataset");
  Matrix x = anchors.side_a();
  Matrix y = anchors.side_b();
  const Vector mean_a = unit_mean(x);
  const Vector mean_b = unit_mean(y);
  if (options.normalize_for_fit) {
    normalize_with_mean(x, mean_a);
    normalize_with_mean(y, mean_b);
  }

  LinearMapModel m;
  if (mode == LinearMode::orthogonal && options.map_train_side) {
    check_pair(x, y, "fit_vecmap");
    const Svd d = svd(matmul_tn(x, y));
    m.mode = mode;
    m.dim = x.cols();
    m.map_a = d.u;
    m.map_b = transpose(d.vt);
    m.reverse = transpose(matmul(d.u, d.vt));
  } else if (mode == LinearMode::orthogonal) {
    m = procrustes(x, y);
  } else {
    m = least_squares_map(x, y);
  }
  m.options = options;
  m.mean_a = mean_a;
  m.mean_b = mean_b;
  return m;
}

Matrix apply_linear(const LinearMapModel& model, const Matrix& vectors, MapSide side) {
  if (vectors.cols() != model.dim)
    throw_error(ErrorKind::shape, "apply_linear: vectors have dimension " + std::to_string(vectors.cols()) +
                                      ", model expects " + std::to_string(model.dim));
  Matrix v = vectors;
  if (side == MapSide::source_eval) {
    if (model.options.normalize_at_eval) normalize_with_mean(v, model.mean_a);
    return model.options.map_eval_side ? matmul(v, model.map_a) : v;
  }
  if (!model.options.map_train_side) return v;
  if (model.options.normalize_at_train) normalize_with_mean(v, model.mean_b);
  return matmul(v, model.map_b);
}

Matrix map_linear(const LinearMapModel& model, const Matrix& vectors, Direction direction) {
  if (vectors.cols() != model.dim)
    throw_error(ErrorKind::shape, "map_linear: vectors have dimension " + std::to_string(vectors.cols()) +
                                      ", model expects " + std::to_string(model.dim));
  Matrix v = vectors;
  if (model.options.normalize_at_eval)
    normalize_with_mean(v, direction == Direction::a_to_b ? model.mean_a : model.mean_b);
  return matmul(v, direction == Direction::a_to_b ? model.forward() : model.reverse);
}

void write_linear_model(std::ostream& out, const LinearMapModel& model) {
  out << "XLMAP-LINEAR 1 " << model.dim << ' ' << to_string(model.mode) << ' ' << model.options.bits() << '\n';
  out << "rank_deficient " << (model.rank_deficient ? 1 : 0) << '\n';
  const auto vec_line = [&](const char* label, const Vector& v) {
    out << label;
    for (double x : v) out << ' ' << detail::format_double(x);
    out << '\n';
  };
  vec_line("mean_a", model.mean_a);
  vec_line("mean_b", model.mean_b);
  for (const auto& [label, mat] : {std::pair<const char*, const Matrix*>{"map_a", &model.map_a},
                                   {"map_b", &model.map_b},
                                   {"reverse", &model.reverse}}) {
    out << label << '\n';
    for (std::size_t r = 0; r < mat->rows(); ++r) {
      const auto row = mat->row(r);
      for (std::size_t c = 0; c < row.size(); ++c) out << (c ? " " : "") << detail::format_double(row[c]);
      out << '\n';
    }
  }
}

LinearMapModel read_linear_model(std::istream& in, const std::string& name) {
  detail::LineReader rd(in, name);
  std::string line;
  if (!rd.next(line)) rd.fail("missing header");
  const auto head = detail::split(line, ' ');
  if (head.size() != 5 || head[0] != "XLMAP-LINEAR") rd.fail("bad magic (expected 'XLMAP-LINEAR 1 ...')");
  if (head[1] != "1") rd.fail("unsupported linear model version");
  LinearMapModel m;
  std::uint64_t dim = 0;
  if (!detail::parse_u64(head[2], dim) || dim == 0) rd.fail("bad dimension");
  m.dim = dim;
  try {
    m.mode = parse_linear_mode(std::string(head[3]));
    m.options = VecmapOptions::from_bits(std::string(head[4]));
  } catch (const Error& e) {
    rd.fail(e.what());
  }
  const auto parse_doubles = [&](std::string_view s, std::size_t n) {
    const auto parts = detail::split(s, ' ');
    if (parts.size() != n) rd.fail("expected " + std::to_string(n) + " values");
    Vector v(n);
    for (std::size_t i = 0; i < n; ++i)
      if (!detail::parse_double(parts[i], v[i])) rd.fail("bad number '" + std::string(parts[i]) + "'");
    return v;
  };
  const auto expect_label = [&](const std::string& label) -> std::string_view {
    if (!rd.next(line)) rd.fail("truncated model: missing '" + label + "'");
    if (line.compare(0, label.size(), label) != 0) rd.fail("expected '" + label + "'");
    return line.size() > label.size() ? std::string_view(line).substr(label.size() + 1) : std::string_view();
  };
  const auto rd_flag = expect_label("rank_deficient");
  if (rd_flag != "0" && rd_flag != "1") rd.fail("rank_deficient must be 0 or 1");
  m.rank_deficient = rd_flag == "1";
  m.mean_a = parse_doubles(expect_label("mean_a"), dim);
  m.mean_b = parse_doubles(expect_label("mean_b"), dim);
  for (auto [label, mat] : {std::pair<const char*, Matrix*>{"map_a", &m.map_a}, {"map_b", &m.map_b}, {"reverse", &m.reverse}}) {
    if (!rd.next(line) || line != label) rd.fail(std::string("expected '") + label + "'");
    *mat = Matrix(dim, dim);
    for (std::size_t r = 0; r < dim; ++r) {
      if (!rd.next(line)) rd.fail(std::string("truncated model in '") + label + "'");
      const Vector row = parse_doubles(line, dim);
      std::copy(row.begin(), row.end(), mat->row(r).begin());
    }
  }
  while (rd.next(line))
    if (!line.empty()) rd.fail("unexpected trailing content");
  return m;
}

void save_linear_model(const LinearMapModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw_error(ErrorKind::io, "cannot open '" + path + "' for writing");
  write_linear_model(out, model);
  if (!out) throw_error(ErrorKind::io, "write failed for '" + path + "'");
}

LinearMapModel load_linear_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_error(ErrorKind::io, "cannot open '" + path + "' for reading");
  return read_linear_model(in, path);
}

}  // namespace xlanchor
