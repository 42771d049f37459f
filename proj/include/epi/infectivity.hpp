#pragma once
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "epi/laws.hpp"
#include "epi/mesh.hpp"

namespace epi {

// One sampled infectivity (or susceptibility) trajectory, stored as a finite
// knot list so it is serializable and cheap to evaluate.
// Convention: value is 0 before the first knot, interpolated between knots,
// and equal to the last knot's value after the last knot.
struct KnotCurve {
  enum class Interp { Linear, StepRight };  // StepRight: value of last knot with t_k <= t

  Interp interp = Interp::Linear;
  std::vector<std::pair<double, double>> knots;  // (time, value), strictly increasing times

  double value(double t) const;
  // sup{t : value(t) > 0}; +inf when the curve stays positive forever.
  double active_end() const;
  double max_value() const;

  static KnotCurve zero();
  static KnotCurve constantUntil(double level, double end);  // level on [0, end), 0 after
};

// Generator of i.i.d. random infectivity trajectories lambda(.) in [0, lambda*].
class InfectivityLaw {
 public:
  // lambda(t) = lambda * 1_{t < eta}, eta ~ period.
  static InfectivityLaw classical(double lambda, DurationLaw period);
  // Piecewise-linear outbreak profile: zero on [0,zeta], linear rise on
  // [zeta, zeta + eta/5] to the peak, linear decay to 0 at zeta + eta.
  // zeta = 2 + 2 X1; reported (prob pReported): peak 1,  eta = 3 + X2;
  // unreported: peak alpha, eta = 8 + 4 X2;  X1, X2 ~ Beta(2,2) independent.
  static InfectivityLaw covidProfile(double alpha, double pReported);
  static InfectivityLaw zero();

  KnotCurve sample(std::mt19937_64& rng) const;
  double lambda_star() const;
  // Hard upper bound on eta (sup of the period's support); +inf if unbounded.
  double period_bound() const;
  // Closed-form mean curve when one exists (classical: lambda * F^c).
  std::optional<Curve> analytic_mean(const TimeMesh& mesh) const;
  // The duration law of eta when expressible in closed form (classical case).
  std::optional<DurationLaw> period_law() const;

  std::string describe() const;

 private:
  struct Impl;
  std::shared_ptr<const Impl> impl_;
};

// Monte Carlo average of `samples` trajectories on the mesh; deterministic
// given the seed.  Results are memoized per (law, mesh, samples, seed).
Curve mean_curve(const InfectivityLaw& law, const TimeMesh& mesh, std::size_t samples,
                 std::uint64_t seed);

// R0 = integral of the mean curve, with the tail truncated where both the mean
// curve and the period survival drop below 1e-12 (horizon capped at 1e4).
double basic_reproduction_number(const InfectivityLaw& law, std::size_t samples,
                                 std::uint64_t seed);

// Truncation horizon implementing the rule above for a given law.
double truncation_horizon(const InfectivityLaw& law);

}  // namespace epi
