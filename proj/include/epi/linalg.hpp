#pragma once
#include <cmath>
#include <cstddef>
#include <vector>

#include "epi/errors.hpp"

namespace epi {

// Minimal dense row-major matrix; covariance grids and patch generators are
// small (<= a few thousand rows), so no external linear-algebra dependency.
struct Matrix {
  std::size_t rows = 0, cols = 0;
  std::vector<double> a;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), a(r * c, fill) {}

  double& operator()(std::size_t i, std::size_t j) { return a[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return a[i * cols + j]; }
};

Matrix matmul(const Matrix& x, const Matrix& y);

// exp(A) by scaling-and-squaring with a truncated Taylor series.
Matrix matrix_exponential(const Matrix& a);

// Cholesky factor L (lower) of a symmetric PSD matrix, allowing a diagonal
// jitter up to maxJitter.  Throws NumericalError (reporting the most negative
// pivot seen) if the matrix is indefinite beyond the jitter budget.
// On success returns L and reports the jitter actually used.
Matrix cholesky_psd(Matrix a, double maxJitter, double* jitterUsed = nullptr);

// Smallest eigenvalue of a symmetric matrix (cyclic Jacobi).
double min_eigenvalue_symmetric(Matrix a);

}  // namespace epi
