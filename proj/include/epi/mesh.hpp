#pragma once
#include <cmath>
#include <cstddef>
#include <vector>

#include "epi/errors.hpp"

namespace epi {

// Uniform time grid on [0, horizon] with step h; horizon/h must be integral.
struct TimeMesh {
  double horizon = 0.0;
  double step = 0.0;

  TimeMesh() = default;
  TimeMesh(double horizon_, double step_) : horizon(horizon_), step(step_) {
    if (step <= 0.0 || horizon <= 0.0 || step > horizon)
      throw ValidationError("TimeMesh: need 0 < step <= horizon");
    double ratio = horizon / step;
    if (std::abs(ratio - std::round(ratio)) > 1e-9 * std::max(1.0, ratio))
      throw ValidationError("TimeMesh: horizon/step must be an integer");
  }

  std::size_t size() const { return static_cast<std::size_t>(std::llround(horizon / step)) + 1; }
  double time(std::size_t i) const { return static_cast<double>(i) * step; }

  std::vector<double> times() const {
    std::vector<double> t(size());
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = time(i);
    return t;
  }
};

using Curve = std::vector<double>;  // values on a TimeMesh, size == mesh.size()

// Trapezoid integral of a curve over the whole mesh.
inline double trapezoid(const Curve& y, double h) {
  if (y.empty()) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i + 1 < y.size(); ++i) s += 0.5 * (y[i] + y[i + 1]);
  return s * h;
}

// Running trapezoid antiderivative: out[n] = integral over [0, t_n].
inline Curve cumulative_trapezoid(const Curve& y, double h) {
  Curve out(y.size(), 0.0);
  for (std::size_t i = 1; i < y.size(); ++i)
    out[i] = out[i - 1] + 0.5 * h * (y[i - 1] + y[i]);
  return out;
}

inline double sup_norm_diff(const Curve& a, const Curve& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size() && i < b.size(); ++i)
    m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace epi
