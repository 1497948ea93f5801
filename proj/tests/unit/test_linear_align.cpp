#include <doctest.h>

#include <cmath>
#include <sstream>

#include "support.hpp"
#include "xlanchor/error.hpp"
#include "xlanchor/linalg.hpp"
#include "xlanchor/linear_align.hpp"

using namespace xlanchor;
using testsupport::gaussian;

namespace {

AnchorDataset from_matrices(const Matrix& x, const Matrix& y) {
  AnchorDataset ds;
  ds.dim = x.cols();
  for (std::size_t i = 0; i < x.rows(); ++i)
    ds.records.push_back({static_cast<std::int64_t>(i), "a" + std::to_string(i), "b" + std::to_string(i),
                          Vector(x.row(i).begin(), x.row(i).end()), Vector(y.row(i).begin(), y.row(i).end())});
  return ds;
}

// exp of a small random skew-symmetric generator via its Taylor series
Matrix small_rotation(std::size_t n, double angle, Rng& rng) {
  Matrix a(n, n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double v = rng.normal();
      a(i, j) = v;
      a(j, i) = -v;
    }
  const double scale = angle / std::max(frobenius_norm(a), 1e-300);
  a = scale * a;
  Matrix out = Matrix::identity(n), term = Matrix::identity(n);
  for (int k = 1; k < 30; ++k) {
    term = (1.0 / k) * matmul(term, a);
    out = out + term;
  }
  return out;
}

}  // namespace

TEST_CASE("procrustes trivial cases") {
  Rng rng(1);
  const Matrix x = gaussian(30, 5, rng);
  CHECK(max_abs(procrustes(x, x).map_a - Matrix::identity(5)) < 1e-12);
  const Matrix rot{{0, 1}, {-1, 0}};
  const auto m = procrustes(Matrix::identity(2), rot);
  CHECK(max_abs(m.map_a - rot) < 1e-14);
  CHECK(max_abs(m.reverse - transpose(rot)) < 1e-14);
  CHECK_THROWS_AS(procrustes(x, Matrix(30, 4)), Error);
}

TEST_CASE("procrustes recovers a random rotation and is optimal") {
  Rng rng(2);
  const Matrix q = testsupport::random_orthogonal(64, rng);
  const Matrix x = gaussian(1000, 64, rng);
  const Matrix y = matmul(x, q);
  const auto m = procrustes(x, y);
  CHECK(frobenius_norm(m.map_a - q) < 1e-6);
  CHECK(orthonormality_error(m.map_a) < 1e-8);

  // optimality against nearby orthogonal matrices on noisy data
  const Matrix xn = gaussian(200, 8, rng);
  const Matrix yn = matmul(xn, testsupport::random_orthogonal(8, rng)) + gaussian(200, 8, rng, 0.3);
  const Matrix w = procrustes(xn, yn).map_a;
  const double best = frobenius_norm(matmul(xn, w) - yn);
  for (int i = 0; i < 100; ++i) {
    const Matrix w2 = matmul(w, small_rotation(8, rng.uniform(0.001, 0.1), rng));
    CHECK(best <= frobenius_norm(matmul(xn, w2) - yn));
  }
}

TEST_CASE("least squares map") {
  Rng rng(3);
  const Matrix x = gaussian(40, 6, rng);
  CHECK(max_abs(least_squares_map(x, 2.0 * x).map_a - 2.0 * Matrix::identity(6)) < 1e-12);
  const Matrix y6 = gaussian(6, 6, rng);
  CHECK(max_abs(least_squares_map(Matrix::identity(6), y6).map_a - y6) < 1e-12);

  const double sigma = 0.01;
  const Matrix x2 = gaussian(200, 16, rng);
  const Matrix y2 = matmul(x2, testsupport::random_orthogonal(16, rng)) + gaussian(200, 16, rng, sigma);
  const auto m = least_squares_map(x2, y2);
  const double res = frobenius_norm(matmul(x2, m.map_a) - y2);
  CHECK(res < sigma * std::sqrt(200.0 * 16.0) * 1.1);
  for (int i = 0; i < 20; ++i) {
    const Matrix w2 = m.map_a + gaussian(16, 16, rng, 1e-3);
    CHECK(res <= frobenius_norm(matmul(x2, w2) - y2));
  }
  const Matrix deficient = matmul(gaussian(30, 2, rng), gaussian(2, 4, rng));
  CHECK(least_squares_map(deficient, gaussian(30, 4, rng)).rank_deficient);
}

TEST_CASE("option presets") {
  CHECK(VecmapOptions::preset("ELMoVM").bits() == "11111");
  CHECK(VecmapOptions::preset("orth").bits() == "00101");
  CHECK(VecmapOptions::preset("nonorm").bits() == "00100");
  CHECK(VecmapOptions::preset("evalnorm").bits() == "00110");
  CHECK(VecmapOptions::preset("def").bits() == "00111");
  CHECK(VecmapOptions::from_bits("10101") == VecmapOptions{true, false, true, false, true});
  CHECK_THROWS_AS(VecmapOptions::preset("et"), Error);
  CHECK_THROWS_AS(VecmapOptions::from_bits("1012"), Error);
  CHECK(parse_linear_mode("lsq") == LinearMode::least_squares);
  CHECK_THROWS_AS(parse_linear_mode("cca"), Error);
}

TEST_CASE("fit_vecmap behaviour per preset") {
  Rng rng(4);
  const Matrix x = gaussian(50, 6, rng);
  const Matrix y = matmul(x, testsupport::random_orthogonal(6, rng));
  const auto ds = from_matrices(x, y);

  const auto plain = procrustes(x, y);
  const auto nonorm = fit_vecmap(ds, VecmapOptions::preset("nonorm"), LinearMode::orthogonal);
  CHECK(nonorm.map_a == plain.map_a);
  CHECK(nonorm.reverse == plain.reverse);

  for (const char* p : {"ELMoVM", "orth", "nonorm", "evalnorm", "def"}) {
    const auto ident = fit_vecmap(from_matrices(x, x), VecmapOptions::preset(p), LinearMode::orthogonal);
    CHECK(max_abs(ident.forward() - Matrix::identity(6)) < 1e-8);
  }

  const auto elmo = fit_vecmap(ds, VecmapOptions::preset("ELMoVM"), LinearMode::orthogonal);
  const Matrix probe = gaussian(5, 6, rng);
  CHECK_FALSE(apply_linear(elmo, probe, MapSide::target_train) == probe);
  const auto orth = fit_vecmap(ds, VecmapOptions::preset("orth"), LinearMode::orthogonal);
  CHECK(apply_linear(orth, probe, MapSide::target_train) == probe);
  CHECK(max_abs(apply_linear(orth, probe, MapSide::source_eval) - matmul(probe, orth.map_a)) == 0.0);
  CHECK(apply_linear(nonorm, probe, MapSide::target_train) == probe);
  CHECK_THROWS_AS(fit_vecmap(AnchorDataset{}, VecmapOptions{}, LinearMode::orthogonal), Error);
  CHECK_THROWS_AS(apply_linear(orth, Matrix(1, 5), MapSide::source_eval), Error);
}

TEST_CASE("rotation model generalizes to held-out rows") {
  Rng rng(5);
  const Matrix q = testsupport::random_orthogonal(10, rng);
  const Matrix x = gaussian(300, 10, rng);
  const auto m = fit_vecmap(from_matrices(x, matmul(x, q)), VecmapOptions::preset("nonorm"), LinearMode::orthogonal);
  const Matrix held = gaussian(50, 10, rng);
  const Matrix mapped = apply_linear(m, held, MapSide::source_eval);
  const Matrix target = matmul(held, q);
  double mean_cos = 0.0;
  for (std::size_t i = 0; i < 50; ++i)
    mean_cos += dot(mapped.row(i), target.row(i)) / (norm2(mapped.row(i)) * norm2(target.row(i)));
  CHECK(mean_cos / 50 > 0.999);
}

TEST_CASE("normalization sequence") {
  Matrix m{{3, 4}, {0, 2}};
  const Vector mean = unit_mean(m);
  CHECK(mean[0] == doctest::Approx(0.3));
  CHECK(mean[1] == doctest::Approx(0.9));
  normalize_with_mean(m, mean);
  for (std::size_t i = 0; i < 2; ++i) CHECK(norm2(m.row(i)) == doctest::Approx(1.0));
}

TEST_CASE("linear model file round trip is exact") {
  Rng rng(6);
  const Matrix x = gaussian(40, 5, rng);
  const Matrix y = gaussian(40, 5, rng);
  for (auto mode : {LinearMode::orthogonal, LinearMode::least_squares})
    for (const char* p : {"ELMoVM", "orth", "nonorm", "evalnorm", "def"}) {
      const auto m = fit_vecmap(from_matrices(x, y), VecmapOptions::preset(p), mode);
      std::stringstream buf;
      write_linear_model(buf, m);
      const auto back = read_linear_model(buf);
      CHECK(back == m);
    }
  std::istringstream bad("XLMAP-LINEAR 2 3 orthogonal 00100\n");
  CHECK_THROWS_AS(read_linear_model(bad), Error);
  std::istringstream junk("hello\n");
  CHECK_THROWS_AS(read_linear_model(junk), Error);
}

TEST_CASE("map_linear directions") {
  Rng rng(7);
  const Matrix q = testsupport::random_orthogonal(4, rng);
  const Matrix x = gaussian(20, 4, rng);
  const auto m = procrustes(x, matmul(x, q));
  const Matrix probe = gaussian(3, 4, rng);
  const Matrix there = map_linear(m, probe, Direction::a_to_b);
  CHECK(max_abs(map_linear(m, there, Direction::b_to_a) - probe) < 1e-12);
  auto id = procrustes(x, x);
  CHECK(max_abs(map_linear(id, probe, Direction::a_to_b) - probe) < 1e-12);
}
