#include "xlanchor/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "xlanchor/error.hpp"

namespace xlanchor {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

// Rows of `cols` are the columns being orthogonalized; rows of `vcols` are
// the columns of V. Both are rotated in lockstep.
int jacobi_sweeps(Matrix& cols, Matrix& vcols, int max_sweeps) {
  const std::size_t n = cols.rows();
  const std::size_t len = cols.cols();
  const double tol = kEps * static_cast<double>(std::max<std::size_t>(len, 1));
  for (int sweep = 1; sweep <= max_sweeps; ++sweep) {
    bool rotated = false;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        double* a = cols.row(p).data();
        double* b = cols.row(q).data();
        double alpha = 0.0, beta = 0.0, gamma = 0.0;
        for (std::size_t i = 0; i < len; ++i) {
          alpha += a[i] * a[i];
          beta += b[i] * b[i];
          gamma += a[i] * b[i];
        }
        if (gamma == 0.0 || alpha == 0.0 || beta == 0.0) continue;
        if (std::abs(gamma) <= tol * std::sqrt(alpha * beta)) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::hypot(1.0, zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (std::size_t i = 0; i < len; ++i) {
          const double x = a[i], y = b[i];
          a[i] = c * x - s * y;
          b[i] = s * x + c * y;
        }
        double* va = vcols.row(p).data();
        double* vb = vcols.row(q).data();
        for (std::size_t i = 0; i < vcols.cols(); ++i) {
          const double x = va[i], y = vb[i];
          va[i] = c * x - s * y;
          vb[i] = s * x + c * y;
        }
      }
    }
    if (!rotated) return sweep;
  }
  throw_error(ErrorKind::numerical,
              "svd: one-sided Jacobi did not converge after " + std::to_string(max_sweeps) + " sweeps");
}

// Fills row j of `basis` (unit vectors as rows) with a unit vector orthogonal
// to rows [0, j) using modified Gram-Schmidt over standard basis candidates.
void complete_basis(Matrix& basis, std::size_t j) {
  const std::size_t len = basis.cols();
  for (std::size_t e = 0; e < len; ++e) {
    Vector v(len, 0.0);
    v[e] = 1.0;
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t k = 0; k < j; ++k) {
        const double proj = dot(v, basis.row(k));
        for (std::size_t i = 0; i < len; ++i) v[i] -= proj * basis(k, i);
      }
    }
    const double nv = norm2(v);
    if (nv > 0.5) {
      for (std::size_t i = 0; i < len; ++i) basis(j, i) = v[i] / nv;
      return;
    }
  }
  throw_error(ErrorKind::numerical, "svd: failed to complete orthonormal basis");
}

Svd svd_tall(const Matrix& m, int max_sweeps) {
  const std::size_t r = m.rows(), c = m.cols();
  Matrix cols = transpose(m);  // c x r
  Matrix vcols = Matrix::identity(c);
  Svd out;
  out.sweeps = jacobi_sweeps(cols, vcols, max_sweeps);

  Vector sigma(c);
  for (std::size_t j = 0; j < c; ++j) sigma[j] = norm2(cols.row(j));
  std::vector<std::size_t> order(c);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return sigma[a] > sigma[b]; });

  const double smax = c ? sigma[order[0]] : 0.0;
  const double cutoff = smax * kEps * static_cast<double>(std::max(r, c));
  Matrix ucols(c, r);
  out.s.resize(c);
  out.vt = Matrix(c, c);
  for (std::size_t j = 0; j < c; ++j) {
    const std::size_t src = order[j];
    out.s[j] = sigma[src];
    std::copy(vcols.row(src).begin(), vcols.row(src).end(), out.vt.row(j).begin());
    if (sigma[src] > cutoff && sigma[src] > 0.0) {
      for (std::size_t i = 0; i < r; ++i) ucols(j, i) = cols(src, i) / sigma[src];
    } else {
      complete_basis(ucols, j);
    }
  }
  out.u = transpose(ucols);
  return out;
}

}  // namespace

Svd svd(const Matrix& m, int max_sweeps) {
  require(m.rows() >= 1 && m.cols() >= 1, ErrorKind::shape, "svd: empty matrix");
  require(all_finite(m), ErrorKind::validation, "svd: non-finite entry");
  if (m.rows() >= m.cols()) return svd_tall(m, max_sweeps);
  Svd t = svd_tall(transpose(m), max_sweeps);
  Svd out;
  out.u = transpose(t.vt);
  out.s = std::move(t.s);
  out.vt = transpose(t.u);
  out.sweeps = t.sweeps;
  return out;
}

PseudoInverse pseudo_inverse(const Matrix& m) {
  const Svd d = svd(m);
  const double smax = d.s.empty() ? 0.0 : d.s.front();
  const double cutoff = smax * kEps * static_cast<double>(std::max(m.rows(), m.cols()));
  PseudoInverse out;
  // pinv = V * diag(1/s) * U^T, restricted to s > cutoff.
  Matrix vs = transpose(d.vt);  // c x k
  for (std::size_t j = 0; j < d.s.size(); ++j) {
    const bool keep = d.s[j] > cutoff && d.s[j] > 0.0;
    if (keep) ++out.rank;
    const double inv = keep ? 1.0 / d.s[j] : 0.0;
    for (std::size_t i = 0; i < vs.rows(); ++i) vs(i, j) *= inv;
  }
  out.pinv = matmul_nt(vs, d.u);
  out.rank_deficient = out.rank < std::min(m.rows(), m.cols());
  return out;
}

double reconstruction_error(const Matrix& m, const Svd& d) {
  Matrix us = d.u;
  for (std::size_t i = 0; i < us.rows(); ++i)
    for (std::size_t j = 0; j < us.cols(); ++j) us(i, j) *= d.s[j];
  const double denom = frobenius_norm(m);
  const double err = frobenius_norm(matmul(us, d.vt) - m);
  return denom > 0.0 ? err / denom : err;
}

double orthonormality_error(const Matrix& q) {
  Matrix g = matmul_tn(q, q);
  for (std::size_t i = 0; i < g.rows(); ++i) g(i, i) -= 1.0;
  return max_abs(g);
}

}  // namespace xlanchor
