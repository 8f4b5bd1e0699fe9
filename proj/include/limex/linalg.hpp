#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "limex/error.hpp"

namespace limex {

/// Dense row-major matrix of doubles. Just enough linear algebra for
/// (d+1)-sized surrogate systems; nothing here is tuned for large d.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> a;

  Matrix() = default;
  Matrix(int r, int c, double fill = 0.0)
      : rows(r), cols(c), a(static_cast<std::size_t>(r) * c, fill) {}

  double& operator()(int i, int j) { return a[static_cast<std::size_t>(i) * cols + j]; }
  double operator()(int i, int j) const { return a[static_cast<std::size_t>(i) * cols + j]; }

  static Matrix identity(int n) {
    Matrix m(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }
};

inline Matrix matmul(const Matrix& x, const Matrix& y) {
  if (x.cols != y.rows) throw InvalidInput("matmul: inner dimensions differ");
  Matrix out(x.rows, y.cols);
  for (int i = 0; i < x.rows; ++i)
    for (int k = 0; k < x.cols; ++k) {
      const double v = x(i, k);
      if (v == 0.0) continue;
      for (int j = 0; j < y.cols; ++j) out(i, j) += v * y(k, j);
    }
  return out;
}

inline std::vector<double> matvec(const Matrix& m, const std::vector<double>& v) {
  if (m.cols != static_cast<int>(v.size()))
    throw InvalidInput("matvec: dimension mismatch");
  std::vector<double> out(m.rows, 0.0);
  for (int i = 0; i < m.rows; ++i) {
    double s = 0.0;
    for (int j = 0; j < m.cols; ++j) s += m(i, j) * v[j];
    out[i] = s;
  }
  return out;
}

inline double max_abs(const Matrix& m) {
  double r = 0.0;
  for (double v : m.a) r = std::max(r, std::abs(v));
  return r;
}

/// Solves A x = b for symmetric positive definite A by an in-place LDL^T
/// factorization (no pivoting). A pivot below 1e-12 times the largest pivot
/// seen so far aborts with the offending column, which for surrogate systems
/// identifies a superpixel whose design column is (numerically) redundant.
inline std::vector<double> solve_spd(Matrix A, std::vector<double> b) {
  const int n = A.rows;
  if (A.cols != n || static_cast<int>(b.size()) != n)
    throw InvalidInput("solve_spd: dimension mismatch");
  std::vector<double> diag(n, 0.0);
  double max_pivot = 0.0;
  for (int k = 0; k < n; ++k) {
    double pivot = A(k, k);
    for (int j = 0; j < k; ++j) pivot -= A(k, j) * A(k, j) * diag[j];
    max_pivot = std::max(max_pivot, std::abs(pivot));
    if (!(pivot > 1e-12 * max_pivot))
      throw SingularSystem(
          "singular normal equations: pivot " + std::to_string(pivot) +
              " at column " + std::to_string(k) +
              (k == 0 ? " (intercept)" : " (superpixel " + std::to_string(k) + ")"),
          k);
    diag[k] = pivot;
    for (int i = k + 1; i < n; ++i) {
      double v = A(i, k);
      for (int j = 0; j < k; ++j) v -= A(i, j) * A(k, j) * diag[j];
      A(i, k) = v / pivot;
    }
  }
  // forward substitution L y = b
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < i; ++j) b[i] -= A(i, j) * b[j];
  // scale by D^{-1}
  for (int i = 0; i < n; ++i) b[i] /= diag[i];
  // back substitution L^T x = y
  for (int i = n - 1; i >= 0; --i)
    for (int j = i + 1; j < n; ++j) b[i] -= A(j, i) * b[j];
  return b;
}

/// Spectral norm of a symmetric matrix by power iteration from a fixed
/// deterministic start vector.
inline double operator_norm_symmetric(const Matrix& m, int iterations = 200) {
  const int n = m.rows;
  std::vector<double> v(n);
  for (int i = 0; i < n; ++i) v[i] = 1.0 / std::sqrt(static_cast<double>(n) + i);
  double lambda = 0.0;
  for (int it = 0; it < iterations; ++it) {
    std::vector<double> w = matvec(m, v);
    double norm = 0.0;
    for (double x : w) norm += x * x;
    norm = std::sqrt(norm);
    if (norm == 0.0) return 0.0;
    for (double& x : w) x /= norm;
    lambda = norm;
    v = std::move(w);
  }
  return lambda;
}

}  // namespace limex
