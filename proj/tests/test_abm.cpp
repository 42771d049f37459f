#include <cmath>
#include <map>
#include <vector>

#include "doctest.h"
#include "epi/abm.hpp"
#include "epi/volterra.hpp"

using namespace epi;

namespace {

ModelSpec markov_sir(std::size_t n, double lambda, double gamma, std::size_t i0) {
  ModelSpec sp;
  sp.family = AbmFamily::MarkovSir;
  sp.N = n;
  sp.lambda = lambda;
  sp.gamma = gamma;
  sp.S0 = n - i0;
  sp.I0 = i0;
  return sp;
}

std::vector<std::uint64_t> seed_range(std::uint64_t base, std::size_t count) {
  std::vector<std::uint64_t> s(count);
  for (std::size_t i = 0; i < count; ++i) s[i] = base + i;
  return s;
}

}  // namespace

TEST_CASE("abm: no transmission leaves susceptibles untouched") {
  ModelSpec sp = markov_sir(200, 0.0, 1.0, 20);
  TimeMesh mesh(20.0, 0.5);
  auto tr = simulate(sp, 20.0, 42, mesh);
  for (std::size_t k = 0; k < mesh.size(); ++k) {
    CHECK(tr.A[k] == 0);
    CHECK(tr.S[k] == 180);
  }
  for (std::size_t k = 1; k < mesh.size(); ++k) CHECK(tr.I[k] <= tr.I[k - 1]);
  CHECK(tr.I.back() == 0);  // mean lifetime 1, horizon 20
}

TEST_CASE("abm: runs are a deterministic function of spec and seed") {
  ModelSpec sp = markov_sir(300, 1.5, 1.0, 15);
  sp.recordEvents = true;
  TimeMesh mesh(5.0, 0.1);
  auto a = simulate(sp, 5.0, 987, mesh);
  auto b = simulate(sp, 5.0, 987, mesh);
  CHECK(a.S == b.S);
  CHECK(a.I == b.I);
  CHECK(a.A == b.A);
  CHECK(a.events.size() == b.events.size());
  auto c = simulate(sp, 5.0, 988, mesh);
  CHECK(a.A.back() != c.A.back());  // different seed, different realization
}

TEST_CASE("abm: conservation and balance identities") {
  TimeMesh mesh(8.0, 0.25);
  for (auto famKind : {AbmFamily::MarkovSir, AbmFamily::MarkovSis, AbmFamily::MarkovSirs,
                       AbmFamily::NonMarkovSir, AbmFamily::NonMarkovSeir}) {
    ModelSpec sp;
    sp.family = famKind;
    sp.N = 400;
    sp.lambda = 1.8;
    sp.gamma = 1.0;
    sp.rho = 0.5;
    sp.F = DurationLaw::gammaLaw(2.0, 0.5);
    sp.G = DurationLaw::exponential(2.0);
    sp.S0 = 360;
    sp.I0 = 40;
    auto tr = simulate(sp, 8.0, 1234, mesh);
    bool sirType = famKind == AbmFamily::MarkovSir || famKind == AbmFamily::NonMarkovSir ||
                   famKind == AbmFamily::NonMarkovSeir;
    for (std::size_t k = 0; k < mesh.size(); ++k) {
      CHECK(tr.S[k] + tr.E[k] + tr.I[k] + tr.R[k] == 400);
      CHECK(tr.S[k] >= 0);
      CHECK(tr.I[k] >= 0);
      if (k > 0) CHECK(tr.A[k] >= tr.A[k - 1]);
      if (sirType) CHECK(tr.S[k] == tr.S[0] - tr.A[k]);
      CHECK(tr.force[k] <= sp.lambda * 400 + 1e-9);
    }
  }
}

TEST_CASE("abm: exponential-period engine matches the Markov engine in distribution") {
  const std::size_t n = 500;
  TimeMesh mesh(10.0, 1.0);
  ModelSpec mk = markov_sir(n, 1.5, 1.0, 25);
  ModelSpec nm = mk;
  nm.family = AbmFamily::NonMarkovSir;
  nm.F = DurationLaw::exponential(1.0);
  auto seeds = seed_range(5000, 200);
  auto a = replicate(mk, 10.0, seeds, mesh);
  auto b = replicate(nm, 10.0, seed_range(9000, 200), mesh);
  for (std::size_t k : {1u, 5u, 10u}) {
    double se = std::sqrt(a.varI[k] / 200.0 + b.varI[k] / 200.0);
    CHECK(std::abs(a.meanI[k] - b.meanI[k]) < 3.0 * se + 1e-9);
  }
}

TEST_CASE("abm: law of large numbers against the mean-field ODE") {
  ModelSpec sp = markov_sir(10000, 1.5, 1.0, 500);
  TimeMesh mesh(5.0, 1.0);
  auto tr = simulate(sp, 5.0, 31337, mesh);
  MarkovParams p;
  p.family = MarkovFamily::SIR;
  p.lambda = 1.5;
  p.gamma = 1.0;
  p.S0 = 0.95;
  p.I0 = 0.05;
  auto ode = solve_ode(p, TimeMesh(5.0, 0.001));
  double odeI5 = ode.I.back();
  CHECK(std::abs(static_cast<double>(tr.I.back()) / 10000.0 - odeI5) < 0.02);
}

TEST_CASE("abm: small-population jump chain matches the exact CTMC") {
  // N=3, S=2, I=1, lambda=3, gamma=1: from (2,1) the next event is an
  // infection with probability (3*2*1/3)/(3*2*1/3 + 1) = 2/3; from (1,2)
  // with probability (3*1*2/3)/(2 + 2) = 1/2.
  ModelSpec sp = markov_sir(3, 3.0, 1.0, 1);
  sp.recordEvents = true;
  TimeMesh mesh(50.0, 50.0);
  int first = 0, total1 = 0, second = 0, total2 = 0;
  const int runs = 40000;
  for (int r = 0; r < runs; ++r) {
    auto tr = simulate(sp, 50.0, 100000 + r, mesh);
    if (tr.events.empty()) continue;
    ++total1;
    if (tr.events[0].kind == 'i') {
      ++first;
      if (tr.events.size() > 1) {
        ++total2;
        if (tr.events[1].kind == 'i') ++second;
      }
    }
  }
  double p1 = static_cast<double>(first) / total1;
  double se1 = std::sqrt((2.0 / 3.0) * (1.0 / 3.0) / total1);
  CHECK(std::abs(p1 - 2.0 / 3.0) < 3.0 * se1);
  double p2 = static_cast<double>(second) / total2;
  double se2 = std::sqrt(0.25 / total2);
  CHECK(std::abs(p2 - 0.5) < 3.0 * se2);
}

TEST_CASE("abm: raising the infection rate never lowers attack size under the shared candidate stream") {
  TimeMesh mesh(8.0, 8.0);
  for (std::uint64_t seed : {11u, 22u, 33u, 44u, 55u}) {
    ModelSpec lo = markov_sir(300, 1.2, 1.0, 15);
    lo.dominatingRateCap = 2.0;
    ModelSpec hi = lo;
    hi.lambda = 1.5;
    auto a = simulate(lo, 8.0, seed, mesh);
    auto b = simulate(hi, 8.0, seed, mesh);
    CHECK(b.A.back() >= a.A.back());
  }
}

TEST_CASE("abm: replicate statistics") {
  ModelSpec sp = markov_sir(200, 1.5, 1.0, 10);
  TimeMesh mesh(4.0, 0.5);
  SUBCASE("single seed reproduces the run with zero variance") {
    auto st = replicate(sp, 4.0, {77}, mesh);
    auto tr = simulate(sp, 4.0, 77, mesh);
    for (std::size_t k = 0; k < mesh.size(); ++k) {
      CHECK(st.meanI[k] == static_cast<double>(tr.I[k]));
      CHECK(st.varI[k] == 0.0);
    }
  }
  SUBCASE("identical seed lists give bit-identical statistics") {
    auto seeds = seed_range(40, 50);
    auto a = replicate(sp, 4.0, seeds, mesh);
    auto b = replicate(sp, 4.0, seeds, mesh);
    CHECK(a.meanI == b.meanI);
    CHECK(a.varI == b.varI);
  }
  SUBCASE("duplicate seeds are rejected") {
    CHECK_THROWS_AS(replicate(sp, 4.0, {1, 2, 1}, mesh), ValidationError);
  }
}

TEST_CASE("abm: classical varying-infectivity force equals lambda times infected") {
  ModelSpec sp;
  sp.family = AbmFamily::VaryingInfectivity;
  sp.N = 400;
  sp.infectivity = InfectivityLaw::classical(1.5, DurationLaw::exponential(1.0));
  sp.S0 = 380;
  sp.I0 = 20;
  TimeMesh mesh(6.0, 0.1);
  auto tr = simulate(sp, 6.0, 2024, mesh);
  for (std::size_t k = 0; k < mesh.size(); ++k)
    CHECK(tr.force[k] == doctest::Approx(1.5 * static_cast<double>(tr.I[k])).epsilon(1e-9));
}

TEST_CASE("abm: classical varying-infectivity matches the Markov engine in distribution") {
  const std::size_t n = 500;
  TimeMesh mesh(8.0, 1.0);
  ModelSpec vi;
  vi.family = AbmFamily::VaryingInfectivity;
  vi.N = n;
  vi.infectivity = InfectivityLaw::classical(1.5, DurationLaw::exponential(1.0));
  vi.S0 = 475;
  vi.I0 = 25;
  ModelSpec mk = markov_sir(n, 1.5, 1.0, 25);
  auto a = replicate(vi, 8.0, seed_range(300, 150), mesh);
  auto b = replicate(mk, 8.0, seed_range(700, 150), mesh);
  for (std::size_t k : {2u, 5u, 8u}) {
    double se = std::sqrt(a.varI[k] / 150.0 + b.varI[k] / 150.0);
    CHECK(std::abs(a.meanI[k] - b.meanI[k]) < 3.0 * se + 1e-9);
  }
}

TEST_CASE("abm: zero post-infection susceptibility forbids reinfection") {
  ModelSpec sp;
  sp.family = AbmFamily::VaryingSusceptibility;
  sp.N = 300;
  sp.infectivity = InfectivityLaw::classical(2.0, DurationLaw::exponential(1.0));
  sp.susceptibility = SusceptibilityLaw::pureSIR();
  sp.I0 = 30;
  sp.recordEvents = true;
  TimeMesh mesh(10.0, 1.0);
  auto tr = simulate(sp, 10.0, 5150, mesh);
  std::map<std::uint64_t, int> perIndividual;
  for (const auto& ev : tr.events)
    if (ev.kind == 'i') ++perIndividual[ev.id];
  for (const auto& [id, count] : perIndividual) CHECK(count == 1);
  CHECK(tr.A.back() > 0);
}

TEST_CASE("abm: waning susceptibility allows reinfection") {
  ModelSpec sp;
  sp.family = AbmFamily::VaryingSusceptibility;
  sp.N = 300;
  sp.infectivity = InfectivityLaw::classical(3.0, DurationLaw::exponential(1.0));
  KnotCurve g;
  g.interp = KnotCurve::Interp::Linear;
  g.knots = {{0.0, 0.0}, {1.0, 1.0}};  // susceptibility back to 1 within a unit
  sp.susceptibility = SusceptibilityLaw::deterministicWaning(g);
  sp.I0 = 30;
  sp.recordEvents = true;
  TimeMesh mesh(25.0, 1.0);
  auto tr = simulate(sp, 25.0, 808, mesh);
  std::map<std::uint64_t, int> perIndividual;
  for (const auto& ev : tr.events)
    if (ev.kind == 'i') ++perIndividual[ev.id];
  int maxCount = 0;
  for (const auto& [id, count] : perIndividual) maxCount = std::max(maxCount, count);
  CHECK(maxCount >= 2);
}

TEST_CASE("abm: demography keeps the population near its scale") {
  ModelSpec sp;
  sp.family = AbmFamily::MarkovSirDemography;
  sp.N = 300;
  sp.lambda = 1.5;
  sp.gamma = 1.0;
  sp.mu = 0.4;
  sp.S0 = 280;
  sp.I0 = 20;
  TimeMesh mesh(10.0, 0.5);
  auto tr = simulate(sp, 10.0, 99, mesh);
  for (std::size_t k = 0; k < mesh.size(); ++k) {
    long long pop = tr.S[k] + tr.I[k] + tr.R[k];
    CHECK(pop > 150);
    CHECK(pop < 600);
  }
}

TEST_CASE("abm: age-profile initial condition is equivalent for memoryless periods") {
  const std::size_t n = 500;
  TimeMesh mesh(6.0, 1.0);
  ModelSpec withLaw;
  withLaw.family = AbmFamily::NonMarkovSir;
  withLaw.N = n;
  withLaw.lambda = 1.5;
  withLaw.F = DurationLaw::exponential(1.0);
  withLaw.F0 = DurationLaw::exponential(1.0);
  withLaw.S0 = 475;
  withLaw.I0 = 25;
  ModelSpec withAges = withLaw;
  withAges.F0.reset();
  AgeProfile prof;
  prof.step = 0.05;
  prof.density.assign(41, 1.0);  // uniform ages on [0,2]; irrelevant for exp
  withAges.ageProfile = prof;
  auto a = replicate(withLaw, 6.0, seed_range(1200, 150), mesh);
  auto b = replicate(withAges, 6.0, seed_range(1600, 150), mesh);
  for (std::size_t k : {2u, 4u, 6u}) {
    double se = std::sqrt(a.varI[k] / 150.0 + b.varI[k] / 150.0);
    CHECK(std::abs(a.meanI[k] - b.meanI[k]) < 3.0 * se + 1e-9);
  }
}

TEST_CASE("abm multipatch: conservation and agreement with the deterministic limit") {
  PatchNetwork net;
  net.L = 2;
  net.lambda = {2.0, 1.0};
  net.kappa = Matrix(2, 2, 0.3);
  net.kappa(0, 0) = 1.0;
  net.kappa(1, 1) = 1.0;
  net.gammaExponent = 1.0;
  net.nuS = Matrix(2, 2, 0.0);
  net.nuI = Matrix(2, 2, 0.0);
  net.nuR = Matrix(2, 2, 0.0);
  net.nuS(0, 1) = 0.1;
  net.nuS(1, 0) = 0.2;
  net.nuI(0, 1) = 0.15;
  net.nuI(1, 0) = 0.1;
  net.nuR(0, 1) = 0.05;
  net.nuR(1, 0) = 0.1;

  ModelSpec sp;
  sp.family = AbmFamily::Multipatch;
  sp.N = 2000;
  sp.net = net;
  sp.F = DurationLaw::exponential(1.0);
  sp.F0 = DurationLaw::exponential(2.0);
  sp.S0p = {1100, 760};
  sp.I0p = {80, 60};
  sp.R0p = {0, 0};
  TimeMesh mesh(3.0, 0.5);
  auto seeds = seed_range(2600, 10);
  auto st = replicate(sp, 3.0, seeds, mesh);
  // per-run conservation
  auto tr = simulate(sp, 3.0, seeds[0], mesh);
  for (std::size_t k = 0; k < mesh.size(); ++k)
    CHECK(tr.S[k] + tr.I[k] + tr.R[k] == 2000);

  MultipatchProblem p;
  p.net = net;
  p.F = DurationLaw::exponential(1.0);
  p.F0 = DurationLaw::exponential(2.0);
  p.S0 = {0.55, 0.38};
  p.I0 = {0.04, 0.03};
  p.R0 = {0.0, 0.0};
  auto lim = solve_multipatch_volterra(p, TimeMesh(3.0, 0.005));
  for (std::size_t k = 0; k < mesh.size(); ++k) {
    std::size_t fine = static_cast<std::size_t>(std::llround(mesh.time(k) / 0.005));
    CHECK(std::abs(st.meanI[k] / 2000.0 - lim.I[fine]) < 0.02);
  }
}

TEST_CASE("abm: extinction times") {
  ModelSpec sp;
  sp.family = AbmFamily::MarkovSis;
  sp.N = 100;
  sp.lambda = 0.5;
  sp.gamma = 1.0;
  sp.S0 = 90;
  sp.I0 = 10;
  SUBCASE("no infected means immediate extinction") {
    ModelSpec empty = sp;
    empty.S0 = 100;
    empty.I0 = 0;
    auto r = extinction_time(empty, 1, 100.0);
    CHECK(r.time == 0.0);
    CHECK(!r.censored);
  }
  SUBCASE("subcritical outbreaks die out quickly") {
    double total = 0.0;
    const int runs = 200;
    for (int r = 0; r < runs; ++r) {
      auto res = extinction_time(sp, 4000 + r, 500.0);
      CHECK(!res.censored);
      total += res.time;
    }
    CHECK(total / runs < 50.0);
  }
  SUBCASE("censoring is reported explicitly") {
    ModelSpec endemic = sp;
    endemic.lambda = 2.0;
    endemic.N = 200;
    endemic.S0 = 150;
    endemic.I0 = 50;
    auto res = extinction_time(endemic, 7, 20.0);
    CHECK(res.censored);
    CHECK(res.time == 20.0);
  }
  SUBCASE("supercritical persistence time grows roughly exponentially in N") {
    double logs[3];
    std::size_t sizes[3] = {15, 30, 45};
    int runs[3] = {100, 60, 30};
    for (int c = 0; c < 3; ++c) {
      ModelSpec endemic;
      endemic.family = AbmFamily::MarkovSis;
      endemic.N = sizes[c];
      endemic.lambda = 2.0;
      endemic.gamma = 1.0;
      endemic.I0 = sizes[c] / 2;
      endemic.S0 = sizes[c] - endemic.I0;
      double total = 0.0;
      for (int r = 0; r < runs[c]; ++r) {
        auto res = extinction_time(endemic, 60000 + 97 * c + r, 1e6);
        CHECK(!res.censored);
        total += res.time;
      }
      logs[c] = std::log(total / runs[c]);
    }
    CHECK(logs[1] > logs[0]);
    CHECK(logs[2] > logs[1]);
    double slope = (logs[2] - logs[0]) / 30.0;
    double vbar = std::log(2.0) - 0.5;
    CHECK(slope > vbar / 2.0);
    CHECK(slope < vbar * 2.0);
  }
  SUBCASE("only the endemic-capable family is accepted") {
    ModelSpec bad = markov_sir(100, 1.0, 1.0, 10);
    CHECK_THROWS_AS(extinction_time(bad, 1, 10.0), ValidationError);
  }
}

TEST_CASE("abm: invalid specs are rejected") {
  ModelSpec sp = markov_sir(100, 1.0, 1.0, 10);
  sp.S0 = 50;  // counts no longer sum to N
  TimeMesh mesh(1.0, 0.5);
  CHECK_THROWS_AS(simulate(sp, 1.0, 1, mesh), ValidationError);
  ModelSpec neg = markov_sir(100, -1.0, 1.0, 10);
  CHECK_THROWS_AS(simulate(neg, 1.0, 1, mesh), ValidationError);
}
