#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <unistd.h>

#include "xlanchor/matrix.hpp"
#include "xlanchor/rng.hpp"
#include "xlanchor/vecstore.hpp"

namespace testsupport {

using xlanchor::Matrix;
using xlanchor::Rng;
using xlanchor::Vector;

inline Matrix gaussian(std::size_t r, std::size_t c, Rng& rng, double scale = 1.0) {
  Matrix m(r, c);
  for (auto& v : m.values()) v = scale * rng.normal();
  return m;
}

inline Matrix naive_matmul(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows(), b.cols(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t k = 0; k < a.cols(); ++k)
      for (std::size_t j = 0; j < b.cols(); ++j) out(i, j) += a(i, k) * b(k, j);
  return out;
}

// Q factor of a Gaussian matrix by modified Gram-Schmidt with one
// re-orthogonalization pass; independent of the library's SVD.
inline Matrix random_orthogonal(std::size_t n, Rng& rng) {
  Matrix g = gaussian(n, n, rng);
  Matrix q(n, n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    Vector v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = g(i, j);
    for (int pass = 0; pass < 2; ++pass)
      for (std::size_t k = 0; k < j; ++k) {
        double d = 0.0;
        for (std::size_t i = 0; i < n; ++i) d += q(i, k) * v[i];
        for (std::size_t i = 0; i < n; ++i) v[i] -= d * q(i, k);
      }
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    for (std::size_t i = 0; i < n; ++i) q(i, j) = v[i] / norm;
  }
  return q;
}

inline Vector unit(Vector v) {
  double n = 0.0;
  for (double x : v) n += x * x;
  n = std::sqrt(n);
  if (n > 0.0)
    for (double& x : v) x /= n;
  return v;
}

struct SyntheticTask {
  xlanchor::AnchorDataset train;
  xlanchor::AnchorDataset eval;
  Matrix q;
};

// Unit-normalized pairs y = normalize(Q x + noise * tanh(M x)); every record
// has its own lemma on both sides.
inline SyntheticTask synthetic_task(std::size_t n_train, std::size_t n_eval, std::size_t dim, std::uint64_t seed,
                                    double nonlinear = 0.1) {
  Rng rng(seed);
  SyntheticTask t;
  t.q = random_orthogonal(dim, rng);
  const Matrix m = gaussian(dim, dim, rng, 1.0 / std::sqrt(static_cast<double>(dim)));
  for (auto* ds : {&t.train, &t.eval}) {
    ds->dim = dim;
    ds->lang_a = "src";
    ds->lang_b = "trg";
  }
  for (std::size_t i = 0; i < n_train + n_eval; ++i) {
    Vector x(dim);
    for (double& v : x) v = rng.normal();
    x = unit(x);
    Vector y(dim, 0.0);
    for (std::size_t r = 0; r < dim; ++r) {
      double lin = 0.0, nl = 0.0;
      for (std::size_t c = 0; c < dim; ++c) {
        lin += x[c] * t.q(c, r);
        nl += x[c] * m(c, r);
      }
      y[r] = lin + nonlinear * std::tanh(nl);
    }
    y = unit(y);
    xlanchor::AnchorRecord rec{static_cast<std::int64_t>(i), "s" + std::to_string(i), "t" + std::to_string(i), x, y};
    (i < n_train ? t.train : t.eval).records.push_back(std::move(rec));
  }
  return t;
}

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    Rng r(static_cast<std::uint64_t>(std::hash<std::string>{}(std::filesystem::current_path().string())) ^
          static_cast<std::uint64_t>(::getpid()) ^ static_cast<std::uint64_t>(++counter));
    path_ = std::filesystem::temp_directory_path() / ("xlanchor-test-" + std::to_string(r.next_u64()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  std::string file(const std::string& name) const { return (path_ / name).string(); }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

inline void spit(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

}  // namespace testsupport
