#pragma once
#include <functional>
#include <optional>

#include "epi/laws.hpp"
#include "epi/mesh.hpp"
#include "epi/volterra.hpp"

namespace epi {

// Infection-age density field i(t, x) on a diagonal-aligned (t, x) grid with
// common step mesh.step: characteristics pass exactly through nodes, so grid
// values are reconstructed from the boundary trace and the initial density by
// the exact transport formulas (no interpolation, evaluated on demand).
struct AgeDensityField {
  TimeMesh mesh;          // time axis; the age axis shares its step
  Curve initial;          // i(0, x) on [0, xbar], node-sampled
  Curve boundary;         // i(t, 0), rate of new infections
  Curve susceptible;      // S(t)
  Curve mass;             // I(t) = integral of i(t, x) over age
  Curve survival;         // F^c sampled on the age grid (length ageCount())
  std::optional<double> clampTime;  // first time S was clamped at zero, if any

  std::size_t ageCount() const { return survival.size(); }
  double age(std::size_t j) const { return static_cast<double>(j) * mesh.step; }

  // i(t_k, x_j) by the characteristic formulas.
  double value(std::size_t k, std::size_t j) const;
  // full age slice at time index k
  Curve slice(std::size_t k) const;
};

struct AgeDensityProblem {
  std::function<double(double)> lambdaBar;  // mean infectivity kernel
  DurationLaw F = DurationLaw::exponential(1.0);  // absolutely continuous
  AgeProfile initialDensity;  // i(0, x); step must equal the mesh step
  double S0 = 0.0;            // initial susceptible fraction (ignored by the
                              // fixed-population variant)
};

// One-dimensional epidemic: susceptibles are only depleted, S' = -i(t,0).
AgeDensityField solve_age_density(const AgeDensityProblem& p, const TimeMesh& mesh);

// Recovery returns individuals to the susceptible pool; S(t) is determined by
// 1 - I(t) instead of the depletion integral.
AgeDensityField solve_sis_age_density(const AgeDensityProblem& p, const TimeMesh& mesh);

struct EndemicEquilibrium {
  double Istar = 0.0;  // endemic infected fraction, max(0, 1 - 1/R0)
  Curve density;       // i*(x) = Istar * mu * F^c(x) on the age mesh
};

// Endemic equilibrium of the recovery-to-susceptible model with reproduction
// number r0 and infectious-period law F; mu is the inverse mean of F.
EndemicEquilibrium sis_endemic_equilibrium(double r0, const DurationLaw& F,
                                           const TimeMesh& ageMesh);

}  // namespace epi
