#pragma once

#include <cstddef>

#include "xlanchor/matrix.hpp"

namespace xlanchor {

// Thin SVD: m (r x c) = u * diag(s) * vt, k = min(r, c).
// u is r x k, s has k non-negative non-increasing entries, vt is k x c.
struct Svd {
  Matrix u;
  Vector s;
  Matrix vt;
  int sweeps = 0;
};

inline constexpr int kSvdMaxSweeps = 80;

// One-sided (Hestenes) Jacobi. Throws ErrorKind::numerical with the sweep
// count if off-diagonal mass has not vanished after kSvdMaxSweeps sweeps.
Svd svd(const Matrix& m, int max_sweeps = kSvdMaxSweeps);

// Moore-Penrose pseudo-inverse via svd. Singular values at or below
// max(r, c) * s_max * eps are treated as zero.
struct PseudoInverse {
  Matrix pinv;
  std::size_t rank = 0;
  bool rank_deficient = false;
};
PseudoInverse pseudo_inverse(const Matrix& m);

// Residuals used to certify a decomposition.
double reconstruction_error(const Matrix& m, const Svd& d);  // relative Frobenius
double orthonormality_error(const Matrix& q);                // max |Q^T Q - I|

}  // namespace xlanchor
