#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "epi/age_pde.hpp"
#include "epi/volterra.hpp"

using namespace epi;

namespace {

AgeProfile exp_profile(double mass, double xbar, double h) {
  // exponential shape with a smooth taper to zero at the edge, so the field
  // carries no discontinuity along the characteristic leaving x = xbar
  AgeProfile prof;
  prof.step = h;
  std::size_t nx = static_cast<std::size_t>(std::llround(xbar / h)) + 1;
  prof.density.resize(nx);
  for (std::size_t j = 0; j < nx; ++j) {
    double y = static_cast<double>(j) * h;
    double taper = 1.0 - (y / xbar) * (y / xbar);
    prof.density[j] = std::exp(-y) * taper * taper;
  }
  double scale = mass / trapezoid(prof.density, h);
  for (double& v : prof.density) v *= scale;
  return prof;
}

}  // namespace

TEST_CASE("age pde: zero initial density gives the zero field") {
  AgeDensityProblem p;
  p.lambdaBar = [](double t) { return 1.5 * std::exp(-t); };
  p.F = DurationLaw::exponential(1.0);
  p.initialDensity.step = 0.01;
  p.initialDensity.density.assign(101, 0.0);
  p.S0 = 1.0;
  auto field = solve_age_density(p, TimeMesh(2.0, 0.01));
  for (double v : field.boundary) CHECK(v == 0.0);
  for (double v : field.mass) CHECK(v == 0.0);
  CHECK(field.value(150, 30) == 0.0);
}

TEST_CASE("age pde: mismatched age step is rejected") {
  AgeDensityProblem p;
  p.lambdaBar = [](double) { return 1.0; };
  p.initialDensity.step = 0.02;
  p.initialDensity.density.assign(10, 0.1);
  CHECK_THROWS_AS(solve_age_density(p, TimeMesh(1.0, 0.01)), ValidationError);
}

TEST_CASE("age pde: exponential survival factors the grid values exactly") {
  double h = 0.01;
  AgeDensityProblem p;
  p.lambdaBar = [](double t) { return 1.5 * std::exp(-t); };
  p.F = DurationLaw::exponential(1.0);
  p.initialDensity = exp_profile(0.05, 2.0, h);
  p.S0 = 0.95;
  auto field = solve_age_density(p, TimeMesh(3.0, h));
  for (std::size_t k : {50u, 120u, 299u})
    for (std::size_t j = 0; j < k; ++j) {
      double x = field.age(j);
      CHECK(field.value(k, j) ==
            doctest::Approx(std::exp(-x) * field.boundary[k - j]).epsilon(1e-13));
    }
}

TEST_CASE("age pde: transport residual away from the diagonal shrinks with the mesh") {
  auto residual = [](double h) {
    AgeDensityProblem p;
    DurationLaw F = DurationLaw::gammaLaw(2.0, 1.0);
    p.F = F;
    p.lambdaBar = [F](double t) { return 1.5 * F.survival(t); };
    p.initialDensity = exp_profile(0.05, 2.0, h);
    p.S0 = 0.95;
    TimeMesh mesh(3.0, h);
    auto field = solve_age_density(p, mesh);
    double worst = 0.0;
    for (std::size_t k = 2; k + 2 < mesh.size(); k += 3)
      for (std::size_t j = 2; j + 2 < field.ageCount(); j += 3) {
        long long offDiag = static_cast<long long>(j) - static_cast<long long>(k);
        if (std::llabs(offDiag) <= 2) continue;
        double dt = (field.value(k + 1, j) - field.value(k - 1, j)) / (2.0 * h);
        double dx = (field.value(k, j + 1) - field.value(k, j - 1)) / (2.0 * h);
        double res = dt + dx + F.hazard(field.age(j)) * field.value(k, j);
        worst = std::max(worst, std::abs(res));
      }
    return worst;
  };
  double r1 = residual(0.02), r2 = residual(0.01);
  CHECK(r1 < 5.0 * 0.02);
  CHECK(r2 < 0.7 * r1);
}

TEST_CASE("age pde: mass agrees with the infectivity volterra solver") {
  const double h = 1e-2;
  TimeMesh mesh(8.0, h);
  DurationLaw F = DurationLaw::exponential(1.0);
  AgeDensityProblem p;
  p.F = F;
  p.lambdaBar = [F](double t) { return 1.5 * F.survival(t); };
  p.initialDensity = exp_profile(0.05, 3.0, h);
  p.S0 = 0.95;
  auto field = solve_age_density(p, mesh);

  ViVolterraProblem q;
  q.F = F;
  q.S0 = 0.95;
  q.I0 = field.mass[0];
  q.lambdaBar.resize(mesh.size());
  q.initialForce.resize(mesh.size());
  q.initialInfected.resize(mesh.size());
  const auto& d = p.initialDensity.density;
  for (std::size_t k = 0; k < mesh.size(); ++k) {
    double t = mesh.time(k);
    q.lambdaBar[k] = p.lambdaBar(t);
    Curve fA(d.size()), fM(d.size());
    for (std::size_t j = 0; j < d.size(); ++j) {
      double y = field.age(j);
      fA[j] = p.lambdaBar(y + t) * d[j];
      fM[j] = F.survival(y + t) / F.survival(y) * d[j];
    }
    q.initialForce[k] = trapezoid(fA, h);
    q.initialInfected[k] = trapezoid(fM, h);
  }
  auto sol = solve_vi_volterra(q, mesh);
  CHECK(sup_norm_diff(field.mass, sol.I) < 1e-3);
  CHECK(sup_norm_diff(field.susceptible, sol.S) < 1e-3);
}

TEST_CASE("age pde: mass balance between inflow and recovery outflow") {
  const double h = 0.01;
  TimeMesh mesh(5.0, h);
  DurationLaw F = DurationLaw::exponential(1.0);  // unit hazard
  AgeDensityProblem p;
  p.F = F;
  p.lambdaBar = [F](double t) { return 2.0 * F.survival(t); };
  p.initialDensity = exp_profile(0.05, 3.0, h);
  p.S0 = 0.95;
  auto field = solve_age_density(p, mesh);
  double worst = 0.0;
  for (std::size_t k = 1; k + 1 < mesh.size(); ++k) {
    double dI = (field.mass[k + 1] - field.mass[k - 1]) / (2.0 * h);
    worst = std::max(worst, std::abs(dI - (field.boundary[k] - field.mass[k])));
  }
  CHECK(worst < 1e-3);
}

TEST_CASE("age pde: boundary trace and susceptibles stay nonnegative under strong forcing") {
  const double h = 0.01;
  AgeDensityProblem p;
  p.F = DurationLaw::exponential(0.2);
  p.lambdaBar = [](double t) { return 50.0 * std::exp(-0.2 * t); };
  p.initialDensity = exp_profile(0.5, 3.0, h);
  p.S0 = 0.5;
  auto field = solve_age_density(p, TimeMesh(4.0, h));
  for (std::size_t k = 0; k < field.boundary.size(); ++k) {
    CHECK(field.boundary[k] >= 0.0);
    CHECK(field.susceptible[k] >= 0.0);
  }
  // everything susceptible got infected
  CHECK(field.susceptible.back() < 1e-6);
}

TEST_CASE("sis age pde: subcritical regime dies out") {
  const double h = 0.02;
  DurationLaw F = DurationLaw::exponential(1.0);
  AgeDensityProblem p;
  p.F = F;
  p.lambdaBar = [F](double t) { return 0.8 * F.survival(t); };
  p.initialDensity = exp_profile(0.2, 4.0, h);
  auto field = solve_sis_age_density(p, TimeMesh(40.0, h));
  CHECK(field.mass.back() < 1e-3);
}

TEST_CASE("sis age pde: supercritical regime reaches the endemic level 1 - 1/R0") {
  const double h = 0.01;
  DurationLaw F = DurationLaw::exponential(1.0);
  AgeDensityProblem p;
  p.F = F;
  p.lambdaBar = [F](double t) { return 2.0 * F.survival(t); };  // R0 = 2
  p.initialDensity = exp_profile(0.05, 4.0, h);
  TimeMesh mesh(40.0, h);
  auto field = solve_sis_age_density(p, mesh);
  CHECK(std::abs(field.mass.back() - 0.5) < 1e-3);
  // equilibrium density shape: i(T, x)/i(T, 0) -> F^c(x), and the absolute
  // level matches Istar * mu * F^c(x)
  std::size_t last = mesh.size() - 1;
  for (std::size_t j = 0; j < 300; ++j) {
    double x = field.age(j);
    CHECK(std::abs(field.value(last, j) / field.boundary[last] - F.survival(x)) < 1e-2);
    CHECK(std::abs(field.value(last, j) - 0.5 * std::exp(-x)) < 1e-2);
  }
}

TEST_CASE("sis age pde: long-run level matches the equilibrium formula across laws") {
  std::mt19937_64 rng(711);
  std::uniform_real_distribution<double> r0d(1.5, 3.5), gd(0.8, 1.5);
  for (int rep = 0; rep < 5; ++rep) {
    double r0 = r0d(rng), gamma = gd(rng);
    DurationLaw F = DurationLaw::exponential(gamma);
    AgeDensityProblem p;
    p.F = F;
    p.lambdaBar = [F, r0, gamma](double t) { return r0 * gamma * F.survival(t); };
    const double h = 0.02;
    p.initialDensity = exp_profile(0.1, 4.0, h);
    auto field = solve_sis_age_density(p, TimeMesh(60.0, h));
    auto eq = sis_endemic_equilibrium(r0, F, TimeMesh(4.0, h));
    CHECK(std::abs(field.mass.back() - eq.Istar) < 2e-3);
  }
}

TEST_CASE("endemic equilibrium formula") {
  DurationLaw F = DurationLaw::exponential(1.0);
  TimeMesh ages(5.0, 0.1);
  auto crit = sis_endemic_equilibrium(1.0, F, ages);
  CHECK(crit.Istar == 0.0);
  auto eq = sis_endemic_equilibrium(2.0, F, ages);
  CHECK(eq.Istar == doctest::Approx(0.5));
  for (std::size_t j = 0; j < ages.size(); ++j)
    CHECK(eq.density[j] == doctest::Approx(0.5 * std::exp(-ages.time(j))).epsilon(1e-12));
  CHECK_THROWS_AS(sis_endemic_equilibrium(0.0, F, ages), ValidationError);
}
