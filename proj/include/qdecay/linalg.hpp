#pragma once

// Small dense linear algebra used by the rate-matrix solver and the fitter.
// Sizes are 3x3 or (number of fit parameters)^2, so plain Gaussian
// elimination and Jacobi sweeps are adequate.

#include <array>
#include <cmath>
#include <cstddef>
#include <vector>

#include "qdecay/errors.hpp"

namespace qdecay {

using Vec3 = std::array<double, 3>;
using Mat3 = std::array<std::array<double, 3>, 3>;

namespace linalg {

inline Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2],
          a[0] * b[1] - a[1] * b[0]};
}

inline double norm(const Vec3& v) {
  return std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
}

/// Solve A x = b by Gaussian elimination with partial pivoting.
inline Vec3 solve3(Mat3 a, Vec3 b) {
  constexpr int n = 3;
  std::array<int, n> perm{0, 1, 2};
  for (int col = 0; col < n; ++col) {
    int piv = col;
    for (int r = col + 1; r < n; ++r)
      if (std::fabs(a[r][col]) > std::fabs(a[piv][col])) piv = r;
    if (piv != col) {
      std::swap(a[piv], a[col]);
      std::swap(b[piv], b[col]);
      std::swap(perm[piv], perm[col]);
    }
    if (a[col][col] == 0.0) throw numeric_error("solve3: singular matrix");
    for (int r = col + 1; r < n; ++r) {
      const double f = a[r][col] / a[col][col];
      for (int c = col; c < n; ++c) a[r][c] -= f * a[col][c];
      b[r] -= f * b[col];
    }
  }
  Vec3 x{};
  for (int r = n - 1; r >= 0; --r) {
    double s = b[r];
    for (int c = r + 1; c < n; ++c) s -= a[r][c] * x[c];
    x[r] = s / a[r][r];
  }
  return x;
}

/// Unit null vector of a rank-2 3x3 matrix, taken as the largest cross
/// product of row pairs. Throws when the null space is not one-dimensional.
inline Vec3 null_vector3(const Mat3& m) {
  const Vec3 c01 = cross(m[0], m[1]);
  const Vec3 c02 = cross(m[0], m[2]);
  const Vec3 c12 = cross(m[1], m[2]);
  Vec3 best = c01;
  double bn = norm(c01);
  if (norm(c02) > bn) { best = c02; bn = norm(c02); }
  if (norm(c12) > bn) { best = c12; bn = norm(c12); }
  double scale = 0.0;
  for (const auto& row : m)
    for (double v : row) scale = std::max(scale, std::fabs(v));
  if (bn <= 1e-13 * scale * scale)
    throw numeric_error("null_vector3: null space is not one-dimensional");
  return {best[0] / bn, best[1] / bn, best[2] / bn};
}

// Dense helpers for the fitter (parameter counts stay below ten).

using MatX = std::vector<std::vector<double>>;

/// Solve A x = b (dense, partial pivoting). Throws numeric_error on a pivot
/// collapse relative to the largest element of A.
inline std::vector<double> solve_dense(MatX a, std::vector<double> b) {
  const std::size_t n = a.size();
  double scale = 0.0;
  for (const auto& row : a)
    for (double v : row) scale = std::max(scale, std::fabs(v));
  if (scale == 0.0) throw numeric_error("solve_dense: zero matrix");
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::fabs(a[r][col]) > std::fabs(a[piv][col])) piv = r;
    if (piv != col) {
      std::swap(a[piv], a[col]);
      std::swap(b[piv], b[col]);
    }
    if (std::fabs(a[col][col]) <= 1e-300 * scale)
      throw numeric_error("solve_dense: singular matrix");
    for (std::size_t r = col + 1; r < n; ++r) {
      const double f = a[r][col] / a[col][col];
      for (std::size_t c = col; c < n; ++c) a[r][c] -= f * a[col][c];
      b[r] -= f * b[col];
    }
  }
  std::vector<double> x(n);
  for (std::size_t ri = n; ri-- > 0;) {
    double s = b[ri];
    for (std::size_t c = ri + 1; c < n; ++c) s -= a[ri][c] * x[c];
    x[ri] = s / a[ri][ri];
  }
  return x;
}

struct SymEigen {
  std::vector<double> values;  // ascending
  MatX vectors;                // vectors[i] is the eigenvector of values[i]
};

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi sweeps.
inline SymEigen jacobi_eigen(MatX a) {
  const std::size_t n = a.size();
  MatX v(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) v[i][i] = 1.0;
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += a[p][q] * a[p][q];
    if (off < 1e-300) break;
    double diag = 0.0;
    for (std::size_t p = 0; p < n; ++p) diag += a[p][p] * a[p][p];
    if (off <= 1e-30 * (diag + off)) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        if (a[p][q] == 0.0) continue;
        const double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a[k][p], akq = a[k][q];
          a[k][p] = c * akp - s * akq;
          a[k][q] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a[p][k], aqk = a[q][k];
          a[p][k] = c * apk - s * aqk;
          a[q][k] = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v[k][p], vkq = v[k][q];
          v[k][p] = c * vkp - s * vkq;
          v[k][q] = s * vkp + c * vkq;
        }
      }
    }
  }
  SymEigen out;
  out.values.resize(n);
  out.vectors.assign(n, std::vector<double>(n));
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (a[order[j]][order[j]] < a[order[i]][order[i]])
        std::swap(order[i], order[j]);
  for (std::size_t i = 0; i < n; ++i) {
    out.values[i] = a[order[i]][order[i]];
    for (std::size_t k = 0; k < n; ++k) out.vectors[i][k] = v[k][order[i]];
  }
  return out;
}

}  // namespace linalg
}  // namespace qdecay
