#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "epi/infectivity.hpp"
#include "epi/laws.hpp"
#include "epi/rng.hpp"
#include "epi/susceptibility.hpp"

using namespace epi;

namespace {

std::vector<DurationLaw> builtin_laws() {
  return {DurationLaw::exponential(0.7),
          DurationLaw::deterministic(2.5),
          DurationLaw::gammaLaw(2.0, 1.5),
          DurationLaw::uniformLaw(1.0, 4.0),
          DurationLaw::betaShifted(2.0, 2.0),
          DurationLaw::empirical({{1.0, 0.25}, {2.0, 0.5}, {4.0, 0.25}})};
}

// Two-sample Kolmogorov-Smirnov statistic.
double ks_statistic(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double d = 0.0;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] <= b[j])
      ++i;
    else
      ++j;
    double fa = static_cast<double>(i) / a.size();
    double fb = static_cast<double>(j) / b.size();
    d = std::max(d, std::abs(fa - fb));
  }
  return d;
}

}  // namespace

TEST_CASE("duration laws: cdf monotone, survival complement, quantile inverse") {
  for (const auto& law : builtin_laws()) {
    double prev = 0.0;
    for (double t = 0.0; t <= 12.0; t += 0.05) {
      double f = law.cdf(t);
      CHECK(f >= prev - 1e-12);
      CHECK(f == doctest::Approx(1.0 - law.survival(t)).epsilon(1e-12));
      prev = f;
    }
    CHECK(law.cdf(-1.0) == 0.0);
    CHECK(law.survival(1e6) == doctest::Approx(0.0).epsilon(1e-9));
    if (!law.has_atoms()) {
      for (double u : {0.05, 0.3, 0.5, 0.9, 0.99}) {
        double q = law.quantile(u);
        CHECK(law.cdf(q) == doctest::Approx(u).epsilon(1e-8));
      }
    }
  }
}

TEST_CASE("duration laws: sample mean within 3 standard errors of analytic mean") {
  const std::size_t n = 100000;
  StreamFamily streams(20240811);
  std::size_t lawIdx = 0;
  for (const auto& law : builtin_laws()) {
    auto rng = streams.stream("law-mean", lawIdx++);
    double sum = 0.0, sumSq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double x = law.sample(rng);
      sum += x;
      sumSq += x * x;
    }
    double mean = sum / n;
    double var = std::max(0.0, sumSq / n - mean * mean);
    double se = std::sqrt(var / n);
    CHECK(std::abs(mean - law.mean()) <= 3.0 * se + 1e-12);
  }
}

TEST_CASE("exponential hazard is constant, gamma(1) reduces to exponential") {
  auto law = DurationLaw::exponential(0.7);
  for (double t : {0.0, 0.5, 3.0, 10.0}) CHECK(law.hazard(t) == doctest::Approx(0.7));
  auto g1 = DurationLaw::gammaLaw(1.0, 2.0);
  auto e = DurationLaw::exponential(0.5);
  for (double t : {0.1, 1.0, 4.0}) CHECK(g1.cdf(t) == doctest::Approx(e.cdf(t)).epsilon(1e-10));
}

TEST_CASE("beta(2,2) quantile inverts the cubic cdf") {
  for (double u = 0.001; u < 1.0; u += 0.013) {
    double x = beta22_quantile(u);
    CHECK(beta22_cdf(x) == doctest::Approx(u).epsilon(1e-10));
  }
}

TEST_CASE("remaining-duration sampling follows the conditional law") {
  StreamFamily streams(555);
  // deterministic: remaining is exactly d - age
  auto det = DurationLaw::deterministic(3.0);
  auto rng = streams.stream("rem-det");
  CHECK(det.sample_remaining(rng, 1.25) == doctest::Approx(1.75));
  // uniform(1,4) at age 2: remaining ~ uniform(0,2); check mean & ks vs direct
  auto uni = DurationLaw::uniformLaw(1.0, 4.0);
  auto r2 = streams.stream("rem-uni");
  const std::size_t n = 20000;
  std::vector<double> rem(n), ref(n);
  for (std::size_t i = 0; i < n; ++i) {
    rem[i] = uni.sample_remaining(r2, 2.0);
    ref[i] = 2.0 * uniform01(r2);
  }
  double d = ks_statistic(rem, ref);
  double crit = 1.9495 * std::sqrt(2.0 / n);  // alpha = 1e-3
  CHECK(d < crit);
}

TEST_CASE("classical infectivity: mean curve matches lambda * survival") {
  auto law = InfectivityLaw::classical(1.0, DurationLaw::exponential(0.5));
  TimeMesh mesh(8.0, 0.25);
  // analytic value at t=2 is exp(-1)
  auto analytic = law.analytic_mean(mesh);
  REQUIRE(analytic.has_value());
  CHECK((*analytic)[8] == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
  // Monte Carlo estimate within 3 s.e. pointwise (Bernoulli variance)
  const std::size_t samples = 100000;
  Curve mc = mean_curve(law, mesh, samples, 99);
  for (std::size_t i = 0; i < mc.size(); ++i) {
    double p = law.period_law()->survival(mesh.time(i));
    double se = std::sqrt(std::max(p * (1.0 - p), 1e-12) / samples);
    CHECK(std::abs(mc[i] - (*analytic)[i]) <= 3.5 * se + 1e-9);
  }
}

TEST_CASE("mean_curve is deterministic given seed and rejects zero samples") {
  auto law = InfectivityLaw::covidProfile(0.5, 0.8);
  TimeMesh mesh(16.0, 0.5);
  Curve a = mean_curve(law, mesh, 2000, 7);
  Curve b = mean_curve(law, mesh, 2000, 7);
  CHECK(a == b);
  CHECK_THROWS_AS(mean_curve(law, mesh, 0, 7), ValidationError);
}

TEST_CASE("covid profile trajectories: shape invariants") {
  auto law = InfectivityLaw::covidProfile(0.4, 0.6);
  StreamFamily streams(31337);
  for (std::size_t k = 0; k < 2000; ++k) {
    auto rng = streams.stream("covid", k);
    KnotCurve c = law.sample(rng);
    REQUIRE(c.knots.size() == 3);
    CHECK(c.interp == KnotCurve::Interp::Linear);
    double zeta = c.knots[0].first;
    double end = c.knots[2].first;
    double eta = end - zeta;
    double peak = c.knots[1].second;
    CHECK(zeta >= 2.0);
    CHECK(zeta <= 4.0);
    CHECK((peak == doctest::Approx(1.0) || peak == doctest::Approx(0.4)));
    if (peak == doctest::Approx(1.0)) {
      CHECK(eta >= 3.0);
      CHECK(eta <= 4.0);
    } else {
      CHECK(eta >= 8.0);
      CHECK(eta <= 12.0);
    }
    CHECK(c.knots[1].first == doctest::Approx(zeta + eta / 5.0));
    // vanishes outside [zeta, zeta+eta], bounded by lambda*
    CHECK(c.value(zeta - 0.01) == 0.0);
    CHECK(c.value(end + 0.01) == 0.0);
    CHECK(c.active_end() == doctest::Approx(end));
    for (double t = 0.0; t < 18.0; t += 0.1) {
      CHECK(c.value(t) >= 0.0);
      CHECK(c.value(t) <= law.lambda_star() + 1e-12);
    }
  }
}

TEST_CASE("covid profile mean curve at t=4 matches an independent oracle") {
  // Oracle: independent construction -- Beta(2,2) sampled as the median of
  // three uniforms, trajectory value computed from scratch.
  const double alpha = 0.5, pRep = 0.8, t = 4.0;
  std::mt19937_64 rng(424242);
  const std::size_t n = 1000000;
  double sum = 0.0, sumSq = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double u = uniform01(rng);
    double a1 = uniform01(rng), b1 = uniform01(rng), c1 = uniform01(rng);
    double a2 = uniform01(rng), b2 = uniform01(rng), c2 = uniform01(rng);
    double x1 = std::max(std::min(a1, b1), std::min(std::max(a1, b1), c1));
    double x2 = std::max(std::min(a2, b2), std::min(std::max(a2, b2), c2));
    bool rep = u < pRep;
    double zeta = 2.0 + 2.0 * x1;
    double eta = rep ? 3.0 + x2 : 8.0 + 4.0 * x2;
    double peak = rep ? 1.0 : alpha;
    double v = 0.0;
    if (t > zeta && t < zeta + eta) {
      double rise = eta / 5.0;
      v = (t <= zeta + rise) ? peak * (t - zeta) / rise
                             : peak * (zeta + eta - t) / (eta - rise);
    }
    sum += v;
    sumSq += v * v;
  }
  double oracleMean = sum / n;
  double oracleSe = std::sqrt((sumSq / n - oracleMean * oracleMean) / n);

  auto law = InfectivityLaw::covidProfile(alpha, pRep);
  TimeMesh mesh(16.0, 0.5);
  Curve mc = mean_curve(law, mesh, 200000, 1234);
  double value = mc[8];  // t = 4
  double implSe = oracleSe * std::sqrt(static_cast<double>(n) / 200000.0);
  CHECK(std::abs(value - oracleMean) <= 3.0 * (oracleSe + implSe));
}

TEST_CASE("derived period law of the classical constructor matches its input (KS)") {
  auto period = DurationLaw::gammaLaw(2.0, 1.0);
  auto law = InfectivityLaw::classical(1.5, period);
  StreamFamily streams(777);
  const std::size_t n = 10000;
  std::vector<double> derived(n), direct(n);
  auto rd = streams.stream("ks-direct");
  for (std::size_t i = 0; i < n; ++i) {
    auto rng = streams.stream("ks-derived", i);
    derived[i] = law.sample(rng).active_end();
    direct[i] = period.sample(rd);
  }
  double d = ks_statistic(derived, direct);
  double crit = 1.9495 * std::sqrt(2.0 / n);  // alpha = 1e-3
  CHECK(d < crit);
}

TEST_CASE("basic reproduction number") {
  // constant law: R0 = lambda * E[eta]
  auto law = InfectivityLaw::classical(2.0, DurationLaw::exponential(1.0));
  CHECK(basic_reproduction_number(law, 1000, 1) == doctest::Approx(2.0).epsilon(1e-10));
  CHECK(basic_reproduction_number(InfectivityLaw::zero(), 1000, 1) == 0.0);
  // covid profile: closed-form triangle area E[peak*eta/2]
  double alpha = 0.5, p = 0.8;
  double expected = p * 3.5 / 2.0 + (1.0 - p) * alpha * 10.0 / 2.0;
  auto covid = InfectivityLaw::covidProfile(alpha, p);
  double r0 = basic_reproduction_number(covid, 200000, 5);
  CHECK(r0 == doctest::Approx(expected).epsilon(0.01));
}

TEST_CASE("susceptibility: pairing and waning profiles") {
  // zero law blocks everything
  auto zero = SusceptibilityLaw::pureSIR();
  StreamFamily streams(9);
  auto rng = streams.stream("sus");
  CHECK(zero.sample_paired(rng, 1.0).knots.empty());

  // step waning: susceptible again w days after recovery
  KnotCurve g{KnotCurve::Interp::StepRight, {{0.0, 0.0}, {2.0, 1.0}}};
  auto law = SusceptibilityLaw::deterministicWaning(g);
  KnotCurve gam = law.sample_paired(rng, 3.0);
  CHECK(gam.value(2.0) == 0.0);   // still infectious
  CHECK(gam.value(4.0) == 0.0);   // recovered, not yet waned
  CHECK(gam.value(5.5) == 1.0);   // fully susceptible again
  // ordering invariant: gamma vanishes before eta
  for (double t = 0.0; t < 3.0; t += 0.01) CHECK(gam.value(t) == 0.0);

  // g == 0 gives a zero mean curve
  KnotCurve gz{KnotCurve::Interp::StepRight, {{0.0, 0.0}}};
  auto zlaw = SusceptibilityLaw::deterministicWaning(gz);
  auto inf = InfectivityLaw::classical(1.0, DurationLaw::exponential(1.0));
  TimeMesh mesh(5.0, 0.5);
  Curve mc = mean_curve(zlaw, inf, mesh, 500, 3);
  for (double v : mc) CHECK(v == 0.0);
}

TEST_CASE("bivariate table validates and samples") {
  BivariateTable t{{{1.0, 2.0, 0.5}, {2.0, 1.0, 0.5}}};
  t.validate();
  StreamFamily streams(4);
  auto rng = streams.stream("biv");
  for (int i = 0; i < 100; ++i) {
    auto [u, v] = t.sample(rng);
    CHECK(((u == 1.0 && v == 2.0) || (u == 2.0 && v == 1.0)));
  }
  BivariateTable bad{{{1.0, 1.0, 0.7}}};
  CHECK_THROWS_AS(bad.validate(), ValidationError);
}
