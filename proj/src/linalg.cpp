#include "epi/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace epi {

Matrix matmul(const Matrix& x, const Matrix& y) {
  if (x.cols != y.rows) throw ValidationError("matmul: shape mismatch");
  Matrix z(x.rows, y.cols, 0.0);
  for (std::size_t i = 0; i < x.rows; ++i)
    for (std::size_t k = 0; k < x.cols; ++k) {
      double v = x(i, k);
      if (v == 0.0) continue;
      for (std::size_t j = 0; j < y.cols; ++j) z(i, j) += v * y(k, j);
    }
  return z;
}

Matrix matrix_exponential(const Matrix& a) {
  if (a.rows != a.cols) throw ValidationError("matrix_exponential: square matrix required");
  const std::size_t n = a.rows;
  double norm = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < n; ++j) row += std::abs(a(i, j));
    norm = std::max(norm, row);
  }
  int squarings = 0;
  double scale = 1.0;
  while (norm * scale > 0.5) {
    scale *= 0.5;
    ++squarings;
  }
  Matrix as(n, n);
  for (std::size_t i = 0; i < n * n; ++i) as.a[i] = a.a[i] * scale;
  // Taylor series to machine precision on the scaled matrix
  Matrix result(n, n, 0.0), term(n, n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    result(i, i) = 1.0;
    term(i, i) = 1.0;
  }
  for (int k = 1; k <= 30; ++k) {
    term = matmul(term, as);
    double inv = 1.0 / static_cast<double>(k);
    double maxTerm = 0.0;
    for (std::size_t i = 0; i < n * n; ++i) {
      term.a[i] *= inv;
      result.a[i] += term.a[i];
      maxTerm = std::max(maxTerm, std::abs(term.a[i]));
    }
    if (maxTerm < 1e-18) break;
  }
  for (int s = 0; s < squarings; ++s) result = matmul(result, result);
  return result;
}

Matrix cholesky_psd(Matrix a, double maxJitter, double* jitterUsed) {
  if (a.rows != a.cols) throw ValidationError("cholesky: square matrix required");
  const std::size_t n = a.rows;
  const Matrix original = a;
  double jitter = 0.0;
  for (int attempt = 0; attempt < 4; ++attempt) {
    a = original;
    if (jitter > 0.0)
      for (std::size_t i = 0; i < n; ++i) a(i, i) += jitter;
    Matrix l(n, n, 0.0);
    bool ok = true;
    double worstPivot = 0.0;
    for (std::size_t j = 0; j < n && ok; ++j) {
      double d = a(j, j);
      for (std::size_t k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
      if (d < -1e-8 * std::max(1.0, std::abs(original(j, j)))) {
        ok = false;
        worstPivot = d;
        break;
      }
      d = std::max(d, 0.0);
      double lj = std::sqrt(d);
      l(j, j) = lj;
      for (std::size_t i = j + 1; i < n; ++i) {
        double s = a(i, j);
        for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
        l(i, j) = lj > 0.0 ? s / lj : 0.0;
      }
    }
    if (ok) {
      if (jitterUsed) *jitterUsed = jitter;
      return l;
    }
    (void)worstPivot;
    jitter = jitter == 0.0 ? maxJitter * 1e-2 : jitter * 10.0;
    if (jitter > maxJitter * (1.0 + 1e-12)) break;
  }
  double minEig = min_eigenvalue_symmetric(original);
  std::ostringstream os;
  os << "cholesky: matrix indefinite beyond jitter budget (min eigenvalue " << minEig << ")";
  throw NumericalError(os.str());
}

double min_eigenvalue_symmetric(Matrix a) {
  if (a.rows != a.cols) throw ValidationError("min_eigenvalue: square matrix required");
  const std::size_t n = a.rows;
  if (n == 0) return 0.0;
  // cyclic Jacobi sweeps
  for (int sweep = 0; sweep < 60; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (off < 1e-22) break;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) {
        double apq = a(p, q);
        if (std::abs(apq) < 1e-300) continue;
        double theta = 0.5 * (a(q, q) - a(p, p)) / apq;
        double t = (theta >= 0.0 ? 1.0 : -1.0) /
                   (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        double c = 1.0 / std::sqrt(t * t + 1.0);
        double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
      }
  }
  double mn = a(0, 0);
  for (std::size_t i = 1; i < n; ++i) mn = std::min(mn, a(i, i));
  return mn;
}

}  // namespace epi
