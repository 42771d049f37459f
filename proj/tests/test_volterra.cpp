#include <cmath>
#include <vector>

#include "doctest.h"
#include "epi/volterra.hpp"

using namespace epi;

namespace {

MarkovParams sir_params(double lambda, double gamma, double i0) {
  MarkovParams p;
  p.family = MarkovFamily::SIR;
  p.lambda = lambda;
  p.gamma = gamma;
  p.S0 = 1.0 - i0;
  p.I0 = i0;
  return p;
}

Curve exp_mean_curve(double lambda, double gamma, const TimeMesh& mesh) {
  Curve c(mesh.size());
  for (std::size_t i = 0; i < c.size(); ++i) c[i] = lambda * std::exp(-gamma * mesh.time(i));
  return c;
}

}  // namespace

TEST_CASE("ode: no transmission decouples to exponential decay") {
  MarkovParams p = sir_params(0.0, 1.0, 0.2);
  TimeMesh mesh(4.0, 0.01);
  auto sol = solve_ode(p, mesh);
  CHECK(sol.S[100] == doctest::Approx(0.8).epsilon(1e-12));
  CHECK(sol.I[100] == doctest::Approx(0.2 / std::exp(1.0)).epsilon(1e-9));
}

TEST_CASE("ode: SIS approaches the endemic equilibrium 1 - gamma/lambda") {
  MarkovParams p;
  p.family = MarkovFamily::SIS;
  p.lambda = 2.0;
  p.gamma = 1.0;
  p.S0 = 0.9;
  p.I0 = 0.1;
  TimeMesh mesh(30.0, 0.01);
  auto sol = solve_ode(p, mesh);
  CHECK(sol.I.back() == doctest::Approx(0.5).epsilon(1e-8));
}

TEST_CASE("ode: SIR value at t=5 stable under Richardson refinement") {
  MarkovParams p = sir_params(1.5, 1.0, 0.05);
  auto at5 = [&](double h) {
    auto sol = solve_ode(p, TimeMesh(5.0, h));
    return sol.I.back();
  };
  double c1 = at5(0.01), c2 = at5(0.005), c3 = at5(0.0025);
  double rich = (16.0 * c3 - c2) / 15.0;  // 4th-order extrapolation
  CHECK(std::abs(c1 - rich) < 1e-9);
  CHECK(std::abs(c2 - rich) < 1e-10);
}

TEST_CASE("ode: effective reproduction crosses 1 at the infection peak") {
  MarkovParams p = sir_params(2.5, 1.0, 0.01);
  TimeMesh mesh(15.0, 0.005);
  auto sol = solve_ode(p, mesh);
  std::size_t argmax = 0;
  for (std::size_t i = 0; i < sol.I.size(); ++i)
    if (sol.I[i] > sol.I[argmax]) argmax = i;
  // first index where R_eff = R0 * S drops below 1
  double r0 = p.lambda / p.gamma;
  std::size_t crossing = 0;
  while (crossing < sol.S.size() && r0 * sol.S[crossing] > 1.0) ++crossing;
  CHECK(std::llabs(static_cast<long long>(argmax) - static_cast<long long>(crossing)) <= 1);
}

TEST_CASE("ode: conservation of mass for fixed-population families") {
  for (auto fam : {MarkovFamily::SIR, MarkovFamily::SIS, MarkovFamily::SIRS, MarkovFamily::SEIR}) {
    MarkovParams p;
    p.family = fam;
    p.lambda = 1.8;
    p.gamma = 0.9;
    p.rho = 0.3;
    p.nu = 1.1;
    p.S0 = 0.85;
    p.E0 = fam == MarkovFamily::SEIR ? 0.05 : 0.0;
    p.I0 = fam == MarkovFamily::SEIR ? 0.05 : 0.1;
    p.R0 = 0.05;
    TimeMesh mesh(10.0, 0.01);
    auto sol = solve_ode(p, mesh);
    for (std::size_t i = 0; i < sol.S.size(); ++i)
      CHECK(sol.S[i] + sol.E[i] + sol.I[i] + sol.R[i] == doctest::Approx(1.0).epsilon(1e-8));
  }
}

TEST_CASE("ode: unstable step is reported, not silently returned") {
  MarkovParams p = sir_params(0.0, 1000.0, 0.5);
  CHECK_THROWS_AS(solve_ode(p, TimeMesh(0.1, 0.01)), NumericalError);
}

TEST_CASE("sir volterra: exponential periods reduce to the Markov ODE") {
  // memoryless reduction; fine mesh, 1e-4 sup-norm
  double lambda = 1.5, gamma = 1.0;
  TimeMesh mesh(10.0, 1e-3);
  SirVolterraProblem p;
  p.lambda = lambda;
  p.F = DurationLaw::exponential(gamma);
  p.F0 = DurationLaw::exponential(gamma);
  p.S0 = 0.95;
  p.I0 = 0.05;
  auto vol = solve_sir_volterra(p, mesh);
  auto ode = solve_ode(sir_params(lambda, gamma, 0.05), mesh);
  CHECK(sup_norm_diff(vol.S, ode.S) < 1e-4);
  CHECK(sup_norm_diff(vol.I, ode.I) < 1e-4);
}

TEST_CASE("sir volterra: no initial infections means no epidemic") {
  SirVolterraProblem p;
  p.lambda = 2.0;
  p.F = DurationLaw::exponential(1.0);
  p.F0 = DurationLaw::exponential(1.0);
  p.S0 = 1.0;
  p.I0 = 0.0;
  TimeMesh mesh(5.0, 0.01);
  auto sol = solve_sir_volterra(p, mesh);
  for (std::size_t i = 0; i < sol.S.size(); ++i) {
    CHECK(sol.S[i] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(sol.I[i] == doctest::Approx(0.0).epsilon(1e-12));
  }
}

TEST_CASE("sir volterra: deterministic periods satisfy the delay-equation form") {
  const double eta = 1.0, lambda = 2.0;
  const double h = 0.005;
  TimeMesh mesh(4.0, h);
  SirVolterraProblem p;
  p.lambda = lambda;
  p.F = DurationLaw::deterministic(eta);
  p.F0 = DurationLaw::uniformLaw(0.0, eta);  // stationary-excess law of the atom
  p.S0 = 0.9;
  p.I0 = 0.1;
  auto sol = solve_sir_volterra(p, mesh);
  std::size_t etaIdx = static_cast<std::size_t>(std::llround(eta / h));
  double maxResidual = 0.0;
  for (std::size_t i = 1; i + 1 < sol.I.size(); ++i) {
    if (i + 1 >= etaIdx && i <= etaIdx + 1) continue;  // kink of the delay equation
    double t = mesh.time(i);
    double dI = (sol.I[i + 1] - sol.I[i - 1]) / (2.0 * h);
    double rhs = lambda * sol.S[i] * sol.I[i];
    if (t < eta) rhs -= p.I0 / eta;
    if (t >= eta) rhs -= lambda * sol.S[i - etaIdx] * sol.I[i - etaIdx];
    maxResidual = std::max(maxResidual, std::abs(dI - rhs));
  }
  CHECK(maxResidual < 1e-3);
}

TEST_CASE("sir volterra: monotone susceptible and recovered curves") {
  SirVolterraProblem p;
  p.lambda = 2.0;
  p.F = DurationLaw::gammaLaw(2.0, 0.5);
  p.F0 = DurationLaw::exponential(1.0);
  p.S0 = 0.95;
  p.I0 = 0.05;
  TimeMesh mesh(12.0, 0.01);
  auto sol = solve_sir_volterra(p, mesh);
  for (std::size_t i = 1; i < sol.S.size(); ++i) {
    CHECK(sol.S[i] <= sol.S[i - 1] + 1e-12);
    CHECK(sol.R[i] >= sol.R[i - 1] - 1e-12);
  }
}

TEST_CASE("sir volterra: trapezoid convergence order near 2 under mesh refinement") {
  SirVolterraProblem p;
  p.lambda = 1.5;
  p.F = DurationLaw::exponential(1.0);
  p.F0 = DurationLaw::exponential(1.0);
  p.S0 = 0.95;
  p.I0 = 0.05;
  auto solveI = [&](double h) { return solve_sir_volterra(p, TimeMesh(5.0, h)).I; };
  Curve ref = solveI(0.003125);
  auto errAt = [&](double h) {
    Curve c = solveI(h);
    std::size_t stride = c.size() > ref.size() ? 1 : (ref.size() - 1) / (c.size() - 1);
    double e = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i) e = std::max(e, std::abs(c[i] - ref[i * stride]));
    return e;
  };
  double e1 = errAt(0.05), e2 = errAt(0.025);
  double order = std::log2(e1 / e2);
  CHECK(order > 1.7);
  CHECK(order < 2.3);
}

TEST_CASE("sir volterra: age-profile initial condition, memoryless case") {
  // for exponential periods the age profile is irrelevant: conditional
  // remaining survival is e^{-t} regardless of age
  SirVolterraProblem base;
  base.lambda = 1.5;
  base.F = DurationLaw::exponential(1.0);
  base.F0 = DurationLaw::exponential(1.0);
  base.S0 = 0.95;
  base.I0 = 0.05;
  TimeMesh mesh(5.0, 0.005);
  auto ref = solve_sir_volterra(base, mesh);

  SirVolterraProblem aged = base;
  aged.F0.reset();
  AgeProfile prof;
  prof.step = 0.01;
  prof.density.assign(101, 0.0);
  for (std::size_t j = 0; j <= 100; ++j) prof.density[j] = 0.05;  // uniform ages on [0,1]
  aged.ageProfile = prof;
  auto sol = solve_sir_volterra(aged, mesh);
  CHECK(sup_norm_diff(sol.I, ref.I) < 1e-8);
}

TEST_CASE("vi volterra: classical mean kernel reproduces the constant-rate model") {
  double lambda = 1.5, gamma = 1.0;
  TimeMesh mesh(6.0, 5e-4);
  ViVolterraProblem p;
  p.lambdaBar = exp_mean_curve(lambda, gamma, mesh);
  p.initialForce.resize(mesh.size());
  for (std::size_t i = 0; i < mesh.size(); ++i) p.initialForce[i] = 0.05 * p.lambdaBar[i];
  p.initialInfected.resize(mesh.size());
  for (std::size_t i = 0; i < mesh.size(); ++i)
    p.initialInfected[i] = 0.05 * std::exp(-gamma * mesh.time(i));
  p.F = DurationLaw::exponential(gamma);
  p.S0 = 0.95;
  p.I0 = 0.05;
  auto vi = solve_vi_volterra(p, mesh);

  SirVolterraProblem q;
  q.lambda = lambda;
  q.F = DurationLaw::exponential(gamma);
  q.F0 = DurationLaw::exponential(gamma);
  q.S0 = 0.95;
  q.I0 = 0.05;
  auto sir = solve_sir_volterra(q, mesh);
  CHECK(sup_norm_diff(vi.S, sir.S) < 1e-6);
  CHECK(sup_norm_diff(vi.I, sir.I) < 1e-6);
}

TEST_CASE("vi volterra: zero kernel decouples, susceptibles decay by quadrature") {
  TimeMesh mesh(4.0, 1e-3);
  ViVolterraProblem p;
  p.lambdaBar.assign(mesh.size(), 0.0);
  p.initialForce.resize(mesh.size());
  p.initialInfected.assign(mesh.size(), 0.0);
  for (std::size_t i = 0; i < mesh.size(); ++i)
    p.initialForce[i] = 0.1 * std::exp(-mesh.time(i));  // I(0) * lambda0
  p.F = DurationLaw::exponential(1.0);
  p.S0 = 0.9;
  p.I0 = 0.1;
  auto sol = solve_vi_volterra(p, mesh);
  for (std::size_t i = 0; i < mesh.size(); ++i) {
    double t = mesh.time(i);
    CHECK(sol.force[i] == doctest::Approx(0.1 * std::exp(-t)).epsilon(1e-10));
    double closed = 0.9 * std::exp(-0.1 * (1.0 - std::exp(-t)));
    CHECK(sol.S[i] == doctest::Approx(closed).epsilon(1e-5));
  }
}

TEST_CASE("seir volterra: exponential phases reduce to the Markov SEIR ODE") {
  TimeMesh mesh(8.0, 1e-3);
  SeirVolterraProblem p;
  p.lambda = 2.0;
  p.G = DurationLaw::exponential(1.2);
  p.F = DurationLaw::exponential(0.8);
  p.G0 = p.G;
  p.F0 = p.F;
  p.S0 = 0.9;
  p.E0 = 0.05;
  p.I0 = 0.05;
  auto vol = solve_seir_volterra(p, mesh);

  MarkovParams m;
  m.family = MarkovFamily::SEIR;
  m.lambda = 2.0;
  m.nu = 1.2;
  m.gamma = 0.8;
  m.S0 = 0.9;
  m.E0 = 0.05;
  m.I0 = 0.05;
  auto ode = solve_ode(m, mesh);
  CHECK(sup_norm_diff(vol.S, ode.S) < 1e-4);
  CHECK(sup_norm_diff(vol.E, ode.E) < 1e-4);
  CHECK(sup_norm_diff(vol.I, ode.I) < 1e-4);
}

TEST_CASE("seir volterra: empty exposed and infected classes stay empty") {
  TimeMesh mesh(3.0, 0.01);
  SeirVolterraProblem p;
  p.lambda = 2.0;
  p.G = DurationLaw::exponential(1.0);
  p.F = DurationLaw::exponential(1.0);
  p.S0 = 1.0;
  auto sol = solve_seir_volterra(p, mesh);
  for (std::size_t i = 0; i < mesh.size(); ++i) {
    CHECK(sol.S[i] == doctest::Approx(1.0));
    CHECK(sol.E[i] == doctest::Approx(0.0));
    CHECK(sol.I[i] == doctest::Approx(0.0));
  }
}

TEST_CASE("seir volterra: zero latency degenerates to the plain system") {
  TimeMesh mesh(6.0, 2e-3);
  SeirVolterraProblem p;
  p.lambda = 1.8;
  p.G = DurationLaw::deterministic(0.0);
  p.F = DurationLaw::uniformLaw(1.0, 2.0);
  p.F0 = DurationLaw::exponential(1.0);
  p.S0 = 0.92;
  p.I0 = 0.08;
  auto seir = solve_seir_volterra(p, mesh);

  SirVolterraProblem q;
  q.lambda = 1.8;
  q.F = DurationLaw::uniformLaw(1.0, 2.0);
  q.F0 = DurationLaw::exponential(1.0);
  q.S0 = 0.92;
  q.I0 = 0.08;
  auto sir = solve_sir_volterra(q, mesh);
  CHECK(sup_norm_diff(seir.S, sir.S) < 1e-9);
  CHECK(sup_norm_diff(seir.I, sir.I) < 1e-9);
  for (double e : seir.E) CHECK(std::abs(e) < 1e-12);
}

TEST_CASE("multipatch: single patch degenerates to the plain volterra system") {
  TimeMesh mesh(5.0, 0.01);
  PatchNetwork net;
  net.L = 1;
  net.lambda = {1.5};
  net.kappa = Matrix(1, 1, 1.0);
  net.gammaExponent = 0.0;
  net.nuS = Matrix(1, 1, 0.0);
  net.nuI = Matrix(1, 1, 0.0);
  net.nuR = Matrix(1, 1, 0.0);
  MultipatchProblem p;
  p.net = net;
  p.F = DurationLaw::exponential(1.0);
  p.F0 = DurationLaw::exponential(1.0);
  p.S0 = {0.95};
  p.I0 = {0.05};
  p.R0 = {0.0};
  auto multi = solve_multipatch_volterra(p, mesh);

  SirVolterraProblem q;
  q.lambda = 1.5;
  q.F = DurationLaw::exponential(1.0);
  q.F0 = DurationLaw::exponential(1.0);
  q.S0 = 0.95;
  q.I0 = 0.05;
  auto sir = solve_sir_volterra(q, mesh);
  CHECK(sup_norm_diff(multi.Sp[0], sir.S) < 1e-10);
  CHECK(sup_norm_diff(multi.Ip[0], sir.I) < 1e-10);
}

namespace {
PatchNetwork two_patch_net(double k12, double nu) {
  PatchNetwork net;
  net.L = 2;
  net.lambda = {1.5, 1.5};
  net.kappa = Matrix(2, 2, k12);
  net.kappa(0, 0) = 1.0;
  net.kappa(1, 1) = 1.0;
  net.gammaExponent = 0.0;
  net.nuS = Matrix(2, 2, nu);
  net.nuI = Matrix(2, 2, nu);
  net.nuR = Matrix(2, 2, nu);
  for (std::size_t i = 0; i < 2; ++i) {
    net.nuS(i, i) = 0.0;
    net.nuI(i, i) = 0.0;
    net.nuR(i, i) = 0.0;
  }
  return net;
}
}  // namespace

TEST_CASE("multipatch: no migration and local-only infection decouples the patches") {
  TimeMesh mesh(5.0, 0.01);
  MultipatchProblem p;
  p.net = two_patch_net(0.0, 0.0);
  p.F = DurationLaw::exponential(1.0);
  p.F0 = DurationLaw::exponential(1.0);
  p.S0 = {0.55, 0.38};
  p.I0 = {0.05, 0.02};
  p.R0 = {0.0, 0.0};
  auto multi = solve_multipatch_volterra(p, mesh);
  for (std::size_t i = 0; i < 2; ++i) {
    SirVolterraProblem q;
    q.lambda = 1.5;
    q.F = DurationLaw::exponential(1.0);
    q.F0 = DurationLaw::exponential(1.0);
    q.S0 = p.S0[i];
    q.I0 = p.I0[i];
    auto sir = solve_sir_volterra(q, mesh);
    CHECK(sup_norm_diff(multi.Sp[i], sir.S) < 1e-9);
    CHECK(sup_norm_diff(multi.Ip[i], sir.I) < 1e-9);
  }
}

TEST_CASE("multipatch: symmetric setup gives identical patch curves") {
  TimeMesh mesh(5.0, 0.01);
  MultipatchProblem p;
  p.net = two_patch_net(0.4, 0.2);
  p.net.gammaExponent = 0.5;
  p.F = DurationLaw::gammaLaw(2.0, 0.5);
  p.F0 = DurationLaw::exponential(1.0);
  p.S0 = {0.46, 0.46};
  p.I0 = {0.04, 0.04};
  p.R0 = {0.0, 0.0};
  auto multi = solve_multipatch_volterra(p, mesh);
  CHECK(sup_norm_diff(multi.Sp[0], multi.Sp[1]) < 1e-10);
  CHECK(sup_norm_diff(multi.Ip[0], multi.Ip[1]) < 1e-10);
  CHECK(sup_norm_diff(multi.Rp[0], multi.Rp[1]) < 1e-10);
  // total mass conserved
  for (std::size_t k = 0; k < mesh.size(); ++k)
    CHECK(multi.S[k] + multi.I[k] + multi.R[k] == doctest::Approx(1.0).epsilon(1e-7));
}

TEST_CASE("multipatch: asymmetric scenario agrees with a whole-curve Picard oracle") {
  const double T = 3.0;
  MultipatchProblem p;
  p.net = two_patch_net(0.3, 0.0);
  p.net.lambda = {2.0, 1.0};
  p.net.nuS(0, 1) = 0.1;
  p.net.nuI(0, 1) = 0.15;
  p.net.nuR(0, 1) = 0.05;
  p.net.nuS(1, 0) = 0.2;
  p.net.nuI(1, 0) = 0.1;
  p.net.nuR(1, 0) = 0.1;
  p.net.gammaExponent = 1.0;
  p.F = DurationLaw::exponential(1.0);
  p.F0 = DurationLaw::exponential(2.0);
  p.S0 = {0.55, 0.38};
  p.I0 = {0.04, 0.03};
  p.R0 = {0.0, 0.0};
  auto mine = solve_multipatch_volterra(p, TimeMesh(T, 0.02));

  // Picard oracle on a 4x finer mesh: iterate the integral equations as a
  // whole-curve map until stationary (independent of the time-stepping code).
  TimeMesh fine(T, 0.005);
  const std::size_t n = fine.size();
  const double h = fine.step;
  auto ploc = migration_location_laws(p.net, fine);
  std::vector<Curve> S(2, Curve(n, 0.0)), I(2, Curve(n, 0.0)), R(2, Curve(n, 0.0));
  for (std::size_t i = 0; i < 2; ++i) {
    S[i].assign(n, p.S0[i]);
    I[i].assign(n, p.I0[i]);
    R[i].assign(n, p.R0[i]);
  }
  // precompute D(l,i,t) = int p F0' and K(l,i,x) = int p F'
  auto cumStieltjes = [&](const DurationLaw& law) {
    std::vector<std::vector<Curve>> out(2, std::vector<Curve>(2, Curve(n, 0.0)));
    for (std::size_t l = 0; l < 2; ++l)
      for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t k = 1; k < n; ++k)
          out[l][i][k] = out[l][i][k - 1] +
                         0.5 * h *
                             (ploc[k - 1](l, i) * law.density(fine.time(k - 1)) +
                              ploc[k](l, i) * law.density(fine.time(k)));
    return out;
  };
  auto D = cumStieltjes(*p.F0);
  auto K = cumStieltjes(p.F);
  for (int iter = 0; iter < 400; ++iter) {
    std::vector<Curve> ups(2, Curve(n, 0.0));
    for (std::size_t k = 0; k < n; ++k)
      for (std::size_t i = 0; i < 2; ++i) {
        double mass = S[i][k] + I[i][k] + R[i][k];
        double numer = p.net.lambda[i] * S[i][k] *
                       (p.net.kappa(i, 0) * I[0][k] + p.net.kappa(i, 1) * I[1][k]);
        ups[i][k] = (numer == 0.0 || mass <= 0.0) ? 0.0 : numer / mass;  // gamma = 1
      }
    double delta = 0.0;
    std::vector<Curve> Sn(2, Curve(n, 0.0)), In(2, Curve(n, 0.0)), Rn(2, Curve(n, 0.0));
    for (std::size_t i = 0; i < 2; ++i) {
      double cumU = 0.0, migS = 0.0, migI = 0.0, migR = 0.0;
      Sn[i][0] = p.S0[i];
      In[i][0] = p.I0[i];
      Rn[i][0] = p.R0[i];
      for (std::size_t k = 1; k < n; ++k) {
        std::size_t l = 1 - i;
        cumU += 0.5 * h * (ups[i][k - 1] + ups[i][k]);
        migS += 0.5 * h *
                ((p.net.nuS(l, i) * S[l][k - 1] - p.net.nuS(i, l) * S[i][k - 1]) +
                 (p.net.nuS(l, i) * S[l][k] - p.net.nuS(i, l) * S[i][k]));
        migI += 0.5 * h *
                ((p.net.nuI(l, i) * I[l][k - 1] - p.net.nuI(i, l) * I[i][k - 1]) +
                 (p.net.nuI(l, i) * I[l][k] - p.net.nuI(i, l) * I[i][k]));
        migR += 0.5 * h *
                ((p.net.nuR(l, i) * R[l][k - 1] - p.net.nuR(i, l) * R[i][k - 1]) +
                 (p.net.nuR(l, i) * R[l][k] - p.net.nuR(i, l) * R[i][k]));
        double recovInit = 0.0, recovNew = 0.0;
        for (std::size_t m = 0; m < 2; ++m) {
          recovInit += p.I0[m] * D[m][i][k];
          double conv = 0.0;
          for (std::size_t j = 0; j < k; ++j)
            conv += 0.5 * h *
                    (K[m][i][k - j] * ups[m][j] + K[m][i][k - j - 1] * ups[m][j + 1]);
          recovNew += conv;
        }
        Sn[i][k] = p.S0[i] - cumU + migS;
        In[i][k] = p.I0[i] - recovInit + cumU - recovNew + migI;
        Rn[i][k] = p.R0[i] + recovInit + recovNew + migR;
      }
    }
    for (std::size_t i = 0; i < 2; ++i) {
      delta = std::max(delta, sup_norm_diff(S[i], Sn[i]));
      delta = std::max(delta, sup_norm_diff(I[i], In[i]));
      S[i] = Sn[i];
      I[i] = In[i];
      R[i] = Rn[i];
    }
    if (delta < 1e-12) break;
  }
  for (std::size_t i = 0; i < 2; ++i) {
    double worst = 0.0;
    for (std::size_t k = 0; k < mine.mesh.size(); ++k)
      worst = std::max(worst, std::abs(mine.Ip[i][k] - I[i][4 * k]));
    CHECK(worst < 2e-3);
  }
}
