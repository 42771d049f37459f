#pragma once
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "epi/errors.hpp"
#include "epi/mesh.hpp"

namespace epi {

// Law of a nonnegative random duration (infectious/exposed period, onset
// delay, remaining period of an initially infected individual, ...).
class DurationLaw {
 public:
  enum class Kind { Exponential, Deterministic, Gamma, Uniform, BetaShifted, Empirical };

  static DurationLaw exponential(double rate);
  static DurationLaw deterministic(double d);
  static DurationLaw gammaLaw(double shape, double scale);
  static DurationLaw uniformLaw(double a, double b);
  // base + span * X with X ~ Beta(2,2); sampling by inverse CDF of the cubic.
  static DurationLaw betaShifted(double base, double span);
  // atoms (value, probability); probabilities must sum to 1.
  static DurationLaw empirical(std::vector<std::pair<double, double>> table);

  Kind kind() const { return kind_; }

  double cdf(double t) const;            // right-continuous F(t) = P(eta <= t)
  double survival(double t) const;       // F^c(t) = 1 - F(t)
  double survival_left(double t) const;  // P(eta >= t): left limit of F^c
  bool has_density() const;
  double density(double t) const;        // only when has_density()
  double hazard(double t) const;         // f / F^c, only when has_density()
  double mean() const;
  double quantile(double u) const;       // generalized inverse of F, u in [0,1)
  double sample(std::mt19937_64& rng) const;
  // Remaining duration given the individual is already `age` old:
  // P(T > t) = F^c(age + t) / F^c(age).
  double sample_remaining(std::mt19937_64& rng, double age) const;
  // Upper end of the support; +inf for unbounded laws.
  double support_upper() const;
  bool has_atoms() const;

  // Short canonical description, used for config digests and cache keys.
  std::string describe() const;

  // Parameter access (kind-dependent; used by solvers needing closed forms).
  double param(int i) const { return p_[i]; }
  const std::vector<std::pair<double, double>>& table() const { return table_; }

 private:
  DurationLaw(Kind k, double p0, double p1) : kind_(k), p_{p0, p1} {}
  explicit DurationLaw(std::vector<std::pair<double, double>> t);

  Kind kind_;
  double p_[2] = {0.0, 0.0};
  std::vector<std::pair<double, double>> table_;
};

// Beta(2,2) CDF 3x^2 - 2x^3 on [0,1] and its inverse.
double beta22_cdf(double x);
double beta22_quantile(double u);

// Regularized lower incomplete gamma P(a, x).
double gamma_p(double a, double x);

// Joint law of two durations as a finite table of atoms (u, v, p).
// Used for correlated exposed/infectious periods.
struct BivariateTable {
  struct Atom {
    double u, v, p;
  };
  std::vector<Atom> atoms;

  void validate() const;
  std::pair<double, double> sample(std::mt19937_64& rng) const;
};

}  // namespace epi
