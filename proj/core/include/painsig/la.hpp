#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace painsig {

// Dense row-major matrix. Small helper shared by the statistical models;
// everything here is plain O(n^3)-or-better textbook numerics.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> v;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), v(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return v[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return v[r * cols + c]; }

  std::span<double> row(std::size_t r) { return {v.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const {
    return {v.data() + r * cols, cols};
  }

  bool empty() const { return rows == 0 || cols == 0; }
};

// C = A * B
Matrix matmul(const Matrix& a, const Matrix& b);
// C = A * B^T
Matrix matmul_nt(const Matrix& a, const Matrix& b);
// C = A^T * B
Matrix matmul_tn(const Matrix& a, const Matrix& b);

// Solves A x = b by Gaussian elimination with partial pivoting. A is copied.
// Raises SingularCovariance if a pivot is (numerically) zero.
std::vector<double> solve(Matrix a, std::vector<double> b);

// In-place Cholesky factorisation A = L L^T, lower triangle kept, upper
// zeroed. Returns false if A is not positive definite.
bool cholesky(Matrix& a);

// Solves L L^T x = b given the lower-triangular factor.
std::vector<double> cholesky_solve(const Matrix& l, std::span<const double> b);

// log(det(A)) = 2 * sum(log(diag(L))) given the lower-triangular factor.
double cholesky_logdet(const Matrix& l);

// Explicit inverse via Gauss-Jordan, for small matrices.
Matrix invert(Matrix a);

}  // namespace painsig
