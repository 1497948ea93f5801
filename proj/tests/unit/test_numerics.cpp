#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "support.hpp"
#include "xlanchor/error.hpp"
#include "xlanchor/linalg.hpp"
#include "xlanchor/nn.hpp"

using namespace xlanchor;
using testsupport::gaussian;

namespace {

Matrix usv(const Svd& d) {
  Matrix us = d.u;
  for (std::size_t i = 0; i < us.rows(); ++i)
    for (std::size_t j = 0; j < us.cols(); ++j) us(i, j) *= d.s[j];
  return testsupport::naive_matmul(us, d.vt);
}

double rel_diff(const Matrix& a, const Matrix& b) { return frobenius_norm(a - b) / std::max(frobenius_norm(b), 1e-300); }

ParamSpans spans(std::vector<Matrix*> ms) {
  ParamSpans p;
  for (auto* m : ms) p.emplace_back(m->data(), m->size());
  return p;
}

}  // namespace

TEST_CASE("matrix products agree with naive loops") {
  Rng rng(1);
  const Matrix a = gaussian(7, 5, rng);
  const Matrix b = gaussian(5, 9, rng);
  const Matrix c = gaussian(7, 9, rng);
  CHECK(rel_diff(matmul(a, b), testsupport::naive_matmul(a, b)) < 1e-14);
  CHECK(rel_diff(matmul_tn(a, c), testsupport::naive_matmul(transpose(a), c)) < 1e-14);
  CHECK(rel_diff(matmul_nt(a, transpose(b)), testsupport::naive_matmul(a, b)) < 1e-14);
  CHECK_THROWS_AS(matmul(a, a), Error);
}

TEST_CASE("matrix helpers") {
  const Matrix a{{1, 2}, {3, 4}};
  const Matrix b{{5}, {6}};
  const Matrix h = hconcat(a, b);
  CHECK(h == Matrix{{1, 2, 5}, {3, 4, 6}});
  CHECK(column_block(h, 1, 2) == Matrix{{2, 5}, {4, 6}});
  CHECK(vconcat(a, a).rows() == 4);
  const std::vector<std::size_t> idx{1, 1, 0};
  CHECK(gather_rows(a, idx) == Matrix{{3, 4}, {3, 4}, {1, 2}});
  CHECK(transpose(a) == Matrix{{1, 3}, {2, 4}});
  CHECK(max_abs(a - Matrix{{1, 2}, {3, 5}}) == 1.0);
  Matrix bad = a;
  bad(0, 0) = std::nan("");
  CHECK_FALSE(all_finite(bad));
  CHECK_THROWS_AS(hconcat(a, Matrix(3, 1)), Error);
}

TEST_CASE("rng is deterministic and in range") {
  Rng a(42), b(42), c(43);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  CHECK(Rng(42).next_u64() != c.next_u64());
  Rng r(5);
  std::set<std::uint64_t> seen;
  for (int i = 0; i < 10000; ++i) {
    const double u = r.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    const auto k = r.below(7);
    CHECK(k < 7);
    seen.insert(k);
  }
  CHECK(seen.size() == 7);
  Rng p1(9), p2(9);
  const auto perm = permutation(100, p1);
  CHECK(perm == permutation(100, p2));
  auto sorted = perm;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < 100; ++i) CHECK(sorted[i] == i);
  CHECK(Rng(3).fork(1).next_u64() != Rng(3).fork(2).next_u64());
}

TEST_CASE("svd of identity and diagonal") {
  const auto id = svd(Matrix::identity(3));
  CHECK(id.s == Vector{1, 1, 1});
  CHECK(max_abs(usv(id) - Matrix::identity(3)) < 1e-15);
  const auto d = svd(Matrix{{3, 0, 0}, {0, 1, 0}, {0, 0, 2}});
  CHECK(d.s[0] == doctest::Approx(3).epsilon(1e-15));
  CHECK(d.s[1] == doctest::Approx(2).epsilon(1e-15));
  CHECK(d.s[2] == doctest::Approx(1).epsilon(1e-15));
}

TEST_CASE("svd certification on tall, wide, square and rank-deficient inputs") {
  Rng rng(7);
  std::vector<Matrix> cases{gaussian(20, 8, rng), gaussian(8, 20, rng), gaussian(33, 33, rng), Matrix(4, 3, 0.0),
                            Matrix{{1, 2, 3}, {2, 4, 6}, {1, 1, 1}, {0, 0, 0}}};
  // rank-2 product
  cases.push_back(matmul(gaussian(12, 2, rng), gaussian(2, 9, rng)));
  for (const auto& m : cases) {
    const auto d = svd(m);
    const std::size_t k = std::min(m.rows(), m.cols());
    REQUIRE(d.s.size() == k);
    CHECK(d.u.rows() == m.rows());
    CHECK(d.vt.cols() == m.cols());
    if (frobenius_norm(m) > 0) CHECK(reconstruction_error(m, d) < 1e-12);
    CHECK(rel_diff(usv(d), m) < 1e-12 + (frobenius_norm(m) == 0 ? 1.0 : 0.0));
    CHECK(orthonormality_error(d.u) < 1e-12);
    CHECK(orthonormality_error(transpose(d.vt)) < 1e-12);
    for (std::size_t i = 0; i < k; ++i) {
      CHECK(d.s[i] >= 0.0);
      if (i) CHECK(d.s[i] <= d.s[i - 1]);
    }
  }
}

TEST_CASE("svd reports non-convergence with the sweep count") {
  Rng rng(3);
  const Matrix m = gaussian(30, 30, rng);
  try {
    (void)svd(m, 1);
    FAIL("expected a numerical error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::numerical);
    CHECK(std::string(e.what()).find("1") != std::string::npos);
  }
}

TEST_CASE("pseudo-inverse satisfies the Moore-Penrose conditions") {
  Rng rng(11);
  for (const Matrix& a : {gaussian(10, 4, rng), gaussian(4, 10, rng), matmul(gaussian(8, 2, rng), gaussian(2, 5, rng))}) {
    const auto p = pseudo_inverse(a);
    const Matrix& x = p.pinv;
    CHECK(max_abs(testsupport::naive_matmul(testsupport::naive_matmul(a, x), a) - a) < 1e-10);
    CHECK(max_abs(testsupport::naive_matmul(testsupport::naive_matmul(x, a), x) - x) < 1e-10);
    const Matrix ax = matmul(a, x), xa = matmul(x, a);
    CHECK(max_abs(ax - transpose(ax)) < 1e-10);
    CHECK(max_abs(xa - transpose(xa)) < 1e-10);
  }
  const auto def = pseudo_inverse(matmul(gaussian(8, 2, rng), gaussian(2, 5, rng)));
  CHECK(def.rank == 2);
  CHECK(def.rank_deficient);
}

TEST_CASE("dense forward examples") {
  DenseLayer id{Matrix::identity(3), Vector(3, 0.0), {Activation::identity}};
  const Matrix x{{1, -2, 3}};
  CHECK(dense_forward(id, x) == x);
  DenseLayer leaky{Matrix{{1}}, Vector{0}, {Activation::leaky_relu, 0.2}};
  CHECK(dense_forward(leaky, Matrix{{-1}})(0, 0) == doctest::Approx(-0.2));
  DenseLayer th{Matrix{{50}}, Vector{0}, {Activation::tanh}};
  for (double v : {-1e6, -30.0, -1.0, 0.0, 1.0, 30.0, 1e6}) {
    const double y = dense_forward(th, Matrix{{v}})(0, 0);
    CHECK(y > -1.0);
    CHECK(y < 1.0);
  }
  DenseLayer sg{Matrix{{1}}, Vector{0}, {Activation::sigmoid}};
  for (double v : {-1e4, -40.0, 0.0, 40.0, 1e4}) {
    const double y = dense_forward(sg, Matrix{{v}})(0, 0);
    CHECK(y > 0.0);
    CHECK(y < 1.0);
  }
  CHECK_THROWS_AS(dense_forward(id, Matrix(1, 2)), Error);
}

TEST_CASE("dense backward examples") {
  Rng rng(2);
  auto layer = DenseLayer::uniform_init(3, 2, {Activation::tanh}, rng);
  const Matrix x = gaussian(4, 3, rng);
  const auto z = dense_backward(layer, x, Matrix(4, 2, 0.0));
  CHECK(max_abs(z.input) == 0.0);
  CHECK(max_abs(z.weight) == 0.0);
  CHECK(*std::max_element(z.bias.begin(), z.bias.end()) == 0.0);

  DenseLayer scalar{Matrix{{0.7}}, Vector{0.1}, {Activation::identity}};
  const auto g = dense_backward(scalar, Matrix{{2.5}}, Matrix{{1.0}});
  CHECK(g.weight(0, 0) == 2.5);
  CHECK(g.bias[0] == 1.0);
  CHECK(g.input(0, 0) == doctest::Approx(0.7));
}

TEST_CASE("dense layers match finite differences for every activation") {
  for (Activation act : {Activation::identity, Activation::relu, Activation::leaky_relu, Activation::tanh,
                         Activation::sigmoid}) {
    Rng rng(100 + static_cast<int>(act));
    auto layer = DenseLayer::uniform_init(4, 3, {act, 0.2}, rng);
    Matrix x = gaussian(5, 4, rng);
    const Matrix w = gaussian(5, 3, rng);  // loss = sum(w .* out)
    const auto loss = [&] {
      const Matrix out = dense_forward(layer, x);
      double s = 0.0;
      for (std::size_t i = 0; i < out.size(); ++i) s += out.data()[i] * w.data()[i];
      return s;
    };
    const auto g = dense_backward(layer, x, w);
    Matrix gb(1, 3, g.bias);
    ParamSpans params{{layer.weight.data(), layer.weight.size()}, {layer.bias.data(), layer.bias.size()},
                      {x.data(), x.size()}};
    GradSpans grads{{g.weight.data(), g.weight.size()}, {gb.data(), gb.size()}, {g.input.data(), g.input.size()}};
    const auto rep = grad_check(loss, params, grads);
    CAPTURE(static_cast<int>(act));
    CHECK(rep.passed);
    CHECK(rep.max_rel_error < 1e-4);
  }
}

TEST_CASE("grad_check on an identity layer is essentially exact") {
  DenseLayer id{Matrix::identity(3), Vector(3, 0.0), {Activation::identity}};
  Matrix x{{0.3, -0.2, 0.9}};
  const Matrix w{{1.0, 2.0, 3.0}};
  const auto loss = [&] {
    const Matrix out = dense_forward(id, x);
    return out(0, 0) * w(0, 0) + out(0, 1) * w(0, 1) + out(0, 2) * w(0, 2);
  };
  const auto g = dense_backward(id, x, w);
  const auto rep = grad_check(loss, spans({&x}), {{g.input.data(), g.input.size()}});
  CHECK(rep.max_rel_error < 1e-9);
}

TEST_CASE("batch norm forward properties") {
  BatchNormLayer bn(3);
  Rng rng(4);
  Matrix x = gaussian(6, 3, rng, 3.0);
  for (std::size_t i = 0; i < 6; ++i) x(i, 1) = 2.5;  // constant column
  const Matrix y = batchnorm_forward(bn, x, true);
  for (std::size_t c = 0; c < 3; ++c) {
    double mean = 0.0, var = 0.0;
    for (std::size_t i = 0; i < 6; ++i) mean += y(i, c);
    mean /= 6;
    for (std::size_t i = 0; i < 6; ++i) var += (y(i, c) - mean) * (y(i, c) - mean);
    var /= 6;
    CHECK(std::abs(mean) < 1e-9);
    if (c == 1) {
      for (std::size_t i = 0; i < 6; ++i) CHECK(y(i, 1) == 0.0);
    } else {
      CHECK(var == doctest::Approx(1.0).epsilon(1e-4));
    }
  }
  // running stats moved toward the batch statistics
  CHECK(bn.running_mean[1] == doctest::Approx(0.25));
  CHECK(bn.running_var[1] == doctest::Approx(0.9));
  const BatchNormLayer before = bn;
  (void)batchnorm_infer(bn, x);
  CHECK(bn.running_mean == before.running_mean);
  CHECK_THROWS_AS(batchnorm_forward(bn, Matrix(1, 3), true), Error);
  CHECK_NOTHROW(batchnorm_forward(bn, Matrix(1, 3), false));
}

TEST_CASE("batch norm backward matches finite differences") {
  Rng rng(8);
  BatchNormLayer bn(4);
  for (double& g : bn.gamma) g = rng.uniform(0.5, 1.5);
  for (double& b : bn.beta) b = rng.normal();
  Matrix x = gaussian(7, 4, rng);
  const Matrix w = gaussian(7, 4, rng);
  const auto loss = [&] {
    BatchNormLayer copy = bn;
    const Matrix y = batchnorm_forward(copy, x, true);
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += y.data()[i] * w.data()[i];
    return s;
  };
  BatchNormLayer work = bn;
  BatchNormCache cache;
  (void)batchnorm_forward(work, x, true, &cache);
  const auto g = batchnorm_backward(bn, cache, w);
  ParamSpans params{{x.data(), x.size()}, {bn.gamma.data(), bn.gamma.size()}, {bn.beta.data(), bn.beta.size()}};
  GradSpans grads{{g.input.data(), g.input.size()}, {g.gamma.data(), g.gamma.size()}, {g.beta.data(), g.beta.size()}};
  const auto rep = grad_check(loss, params, grads);
  CHECK(rep.passed);
  CHECK(rep.max_rel_error < 1e-4);
}

TEST_CASE("binary cross-entropy examples and gradient") {
  const Matrix half(3, 1, 0.5);
  CHECK(bce_loss(half, Matrix{{1}, {0}, {1}}).value == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(bce_loss(Matrix{{1 - 1e-7}}, Matrix{{1}}).value == doctest::Approx(1e-7).epsilon(1e-6));
  CHECK(bce_loss(Matrix{{1.0}}, Matrix{{0}}).value == doctest::Approx(-std::log(1e-7)).epsilon(1e-6));
  const double expect = 0.5 * (-std::log(0.9) - std::log(0.8));
  CHECK(bce_loss(Matrix{{0.9}, {0.2}}, Matrix{{1}, {0}}).value == doctest::Approx(expect).epsilon(1e-15));

  Matrix p{{0.3}, {0.8}, {0.55}, {0.1}};
  const Matrix t{{1}, {0}, {1}, {0}};
  const auto r = bce_loss(p, t);
  const auto rep = grad_check([&] { return bce_loss(p, t).value; }, spans({&p}), {{r.grad.data(), r.grad.size()}});
  CHECK(rep.max_rel_error < 1e-6);
}

TEST_CASE("mean squared error") {
  Matrix p{{1, 2}, {3, 4}};
  const Matrix t{{1, 2}, {3, 4}};
  CHECK(mse_loss(p, t).value == 0.0);
  p(1, 1) = 6;
  const auto r = mse_loss(p, t);
  CHECK(r.value == doctest::Approx(1.0));
  CHECK(r.grad(1, 1) == doctest::Approx(1.0));
  const auto rep = grad_check([&] { return mse_loss(p, t).value; }, spans({&p}), {{r.grad.data(), r.grad.size()}});
  CHECK(rep.max_rel_error < 1e-6);
}

TEST_CASE("adam examples") {
  {
    AdamState s;
    Vector w{1.0, -2.0};
    const Vector g{0.0, 0.0};
    adam_step(s, {{w.data(), w.size()}}, {{g.data(), g.size()}});
    CHECK(w == Vector{1.0, -2.0});
  }
  {
    AdamState s;
    s.lr = 0.1;
    Vector w{1.0};
    const Vector g{2.0 * w[0]};
    adam_step(s, {{w.data(), 1}}, {{g.data(), 1}});
    const double expect = 1.0 - 0.1 * (2.0 / (std::sqrt(4.0) + 1e-8));
    CHECK(w[0] == doctest::Approx(expect).epsilon(1e-14));
  }
  {
    AdamState s;
    s.lr = 0.1;
    Vector w{0.0};
    for (int i = 0; i < 200; ++i) {
      const Vector g{2.0 * (w[0] - 3.0)};
      adam_step(s, {{w.data(), 1}}, {{g.data(), 1}});
    }
    CHECK(std::abs(w[0] - 3.0) < 0.05);
    CHECK(s.step == 200);
  }
  AdamState d;
  d.lr = 2e-5;
  d.lr_decay = 1e-5;
  CHECK(d.effective_lr(1000) == doctest::Approx(2e-5 / 1.01));
  AdamState bad;
  Vector w(2), g(3);
  CHECK_THROWS_AS(adam_step(bad, {{w.data(), 2}}, {{g.data(), 3}}), Error);
}

TEST_CASE("grad_check flags a wrong gradient") {
  Vector w{1.0, 2.0};
  const Vector wrong{2.0, 5.0};  // d/dw of w0^2 + w1^2 is (2, 4)
  const auto rep = grad_check([&] { return w[0] * w[0] + w[1] * w[1]; }, {{w.data(), 2}}, {{wrong.data(), 2}});
  CHECK_FALSE(rep.passed);
  CHECK(rep.worst_index == 1);
  CHECK(w == Vector{1.0, 2.0});
}
