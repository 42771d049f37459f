#pragma once
// Internal numerical helpers shared by the Volterra-type solvers.
#include <cmath>
#include <sstream>
#include <vector>

#include "epi/errors.hpp"
#include "epi/laws.hpp"
#include "epi/mesh.hpp"

namespace epi::detail {

// One-sided kernel samples on the mesh: right[k] is the limit from above at
// lag k*h, left[k] the limit from below.  They differ only at atoms of the
// law, which are aligned with mesh nodes by construction.
struct KernelSamples {
  std::vector<double> right, left;
};

inline KernelSamples survival_kernel(const DurationLaw& law, const TimeMesh& mesh) {
  KernelSamples k;
  const std::size_t n = mesh.size();
  k.right.resize(n);
  k.left.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    k.right[i] = law.survival(mesh.time(i));
    k.left[i] = law.survival_left(mesh.time(i));
  }
  return k;
}

// Trapezoid convolution sum_{j<n} over [t_j, t_{j+1}] of K(t_n - s) u(s) ds,
// with one-sided kernel values at the interval ends (lag decreases in s).
inline double convolve_at(const KernelSamples& k, const Curve& u, std::size_t n, double h) {
  double acc = 0.0;
  for (std::size_t j = 0; j < n; ++j)
    acc += 0.5 * h * (k.left[n - j] * u[j] + k.right[n - j - 1] * u[j + 1]);
  return acc;
}

// Same convolution with the current-node term h/2 * K(0+) * u(t_n) removed,
// so implicit steps can recompute only that term inside the fixed point.
inline double convolve_history(const KernelSamples& k, const Curve& u, std::size_t n,
                               double h) {
  double acc = 0.0;
  for (std::size_t j = 0; j + 1 < n; ++j)
    acc += 0.5 * h * (k.left[n - j] * u[j] + k.right[n - j - 1] * u[j + 1]);
  acc += 0.5 * h * k.left[1] * u[n - 1];
  return acc;
}

// Damped fixed-point iteration on a small state vector; tolerance and
// iteration cap shared by every implicit Volterra-type step.
template <typename Fn>
void damped_fixed_point(std::vector<double>& x, Fn&& update, const char* what) {
  const double tol = 1e-10;
  const int maxIter = 100;
  const double damping = 0.5;
  std::vector<double> next(x.size());
  for (int it = 0; it < maxIter; ++it) {
    update(x, next);
    double diff = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      double xn = x[i] + damping * (next[i] - x[i]);
      diff = std::max(diff, std::abs(xn - x[i]));
      x[i] = xn;
    }
    if (diff < tol) return;
  }
  std::ostringstream os;
  os << what << ": implicit step did not converge within 100 iterations";
  throw NumericalError(os.str());
}

}  // namespace epi::detail
