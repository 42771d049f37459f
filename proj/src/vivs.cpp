#include "epi/vivs.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "epi/errors.hpp"
#include "epi/linalg.hpp"
#include "epi/rng.hpp"

namespace epi {

namespace {

// One weighted representative of a susceptibility trajectory: either a Monte
// Carlo draw (weight 1/M) or a quadrature node of the period density.
struct Member {
  Curve g;             // susceptibility tabulated on the mesh offsets
  double eta = 0.0;    // end of the paired infectious period
  double weight = 0.0;
};

Curve tabulate(const KnotCurve& c, const TimeMesh& mesh, double shift) {
  Curve out(mesh.size(), 0.0);
  for (std::size_t i = 0; i < out.size(); ++i) {
    double t = mesh.time(i) + shift;
    out[i] = t < 0.0 ? 0.0 : c.value(t);
  }
  return out;
}

double last_knot_time(const KnotCurve& c) {
  return c.knots.empty() ? 0.0 : c.knots.back().first;
}

struct Panel {
  std::vector<Member> reinfection;  // trajectories after a (re)infection
  std::vector<Member> initial;      // time-0 mixture (weights include fractions)
  Curve lambdaBar;                  // mean infectivity kernel
  Curve force0;                     // I(0) * mean initial infectivity
  Curve FcPanel;                    // survival of the reinfection period
  Curve F0cPanel;                   // I(0) * survival of the initial period
};

Panel build_mc_panel(const VivsProblem& p, const TimeMesh& mesh) {
  const std::size_t n = mesh.size();
  const std::size_t M = p.mcSamples;
  Panel panel;
  StreamFamily fam(p.seed);

  panel.lambdaBar.assign(n, 0.0);
  panel.FcPanel.assign(n, 0.0);
  auto analytic = p.infectivity.analytic_mean(mesh);
  for (std::size_t m = 0; m < M; ++m) {
    auto rng = fam.stream("panel", m);
    KnotCurve lam = p.infectivity.sample(rng);
    double eta = lam.active_end();
    KnotCurve gam = p.susceptibility.sample_paired(rng, eta);
    Member mem;
    mem.g = tabulate(gam, mesh, 0.0);
    mem.eta = eta;
    mem.weight = 1.0 / static_cast<double>(M);
    for (std::size_t i = 0; i < n; ++i) {
      if (!analytic) panel.lambdaBar[i] += mem.weight * lam.value(mesh.time(i));
      if (mesh.time(i) < eta) panel.FcPanel[i] += mem.weight;
    }
    panel.reinfection.push_back(std::move(mem));
  }
  if (analytic) panel.lambdaBar = *analytic;

  // initial mixture, stratified: one naive member, M infected, M recovered
  if (p.S0 > 0.0) {
    Member naive;
    naive.g.assign(n, 1.0);
    naive.eta = 0.0;
    naive.weight = p.S0;
    panel.initial.push_back(std::move(naive));
  }
  panel.force0.assign(n, 0.0);
  panel.F0cPanel.assign(n, 0.0);
  if (p.I0 > 0.0) {
    const InfectivityLaw& law0 = p.infectivity0 ? *p.infectivity0 : p.infectivity;
    auto analytic0 = law0.analytic_mean(mesh);
    for (std::size_t m = 0; m < M; ++m) {
      auto rng = fam.stream("panel0", m);
      KnotCurve lam0 = law0.sample(rng);
      double eta0 = lam0.active_end();
      KnotCurve gam0 = p.susceptibility.sample_paired(rng, eta0);
      Member mem;
      mem.g = tabulate(gam0, mesh, 0.0);
      mem.eta = eta0;
      mem.weight = p.I0 / static_cast<double>(M);
      for (std::size_t i = 0; i < n; ++i) {
        if (!analytic0) panel.force0[i] += mem.weight * lam0.value(mesh.time(i));
        if (mesh.time(i) < eta0) panel.F0cPanel[i] += mem.weight;
      }
      panel.initial.push_back(std::move(mem));
    }
    if (analytic0)
      for (std::size_t i = 0; i < n; ++i) panel.force0[i] = p.I0 * (*analytic0)[i];
  }
  if (p.R0 > 0.0) {
    KnotCurve profile = p.susceptibility.profile();
    for (std::size_t m = 0; m < M; ++m) {
      auto rng = fam.stream("panelR", m);
      double xi = p.recoveredAge->sample(rng);
      Member mem;
      mem.g = tabulate(profile, mesh, xi);
      mem.eta = 0.0;  // already recovered: counted susceptible from the start
      mem.weight = p.R0 / static_cast<double>(M);
      panel.initial.push_back(std::move(mem));
    }
  }
  return panel;
}

Panel build_quadrature_panel(const VivsProblem& p, const TimeMesh& mesh) {
  const std::size_t n = mesh.size();
  const double h = mesh.step;
  Panel panel;

  auto periodOf = [](const InfectivityLaw& law, const char* which) {
    auto period = law.period_law();
    if (!period || !period->has_density())
      throw ValidationError(std::string("vivs quadrature: the ") + which +
                            " infectivity law needs a period law with a density");
    return *period;
  };
  DurationLaw F = periodOf(p.infectivity, "reinfection");
  auto analytic = p.infectivity.analytic_mean(mesh);
  if (!analytic)
    throw ValidationError("vivs quadrature: the infectivity law needs a closed-form mean");
  panel.lambdaBar = *analytic;
  panel.FcPanel.resize(n);
  for (std::size_t k = 0; k < n; ++k) panel.FcPanel[k] = F.survival(mesh.time(k));

  KnotCurve profile = p.susceptibility.profile();
  auto densityMembers = [&](const DurationLaw& law, double fraction,
                            std::vector<Member>& out, bool shiftForward) {
    // nodes u_j on the mesh; beyond the horizon the profile no longer enters
    // the window (backward shift) or is handled by the tail member (forward)
    for (std::size_t j = 0; j < n; ++j) {
      double u = mesh.time(j);
      double w = (j == 0 || j + 1 == n) ? 0.5 : 1.0;
      double f = law.density(u);
      if (f <= 0.0) continue;
      Member mem;
      mem.g = tabulate(profile, mesh, shiftForward ? u : -u);
      mem.eta = shiftForward ? 0.0 : u;
      mem.weight = fraction * w * h * f;
      out.push_back(std::move(mem));
    }
  };

  densityMembers(F, 1.0, panel.reinfection, false);

  panel.force0.assign(n, 0.0);
  panel.F0cPanel.assign(n, 0.0);
  if (p.S0 > 0.0) {
    Member naive;
    naive.g.assign(n, 1.0);
    naive.weight = p.S0;
    panel.initial.push_back(std::move(naive));
  }
  if (p.I0 > 0.0) {
    const InfectivityLaw& law0 = p.infectivity0 ? *p.infectivity0 : p.infectivity;
    DurationLaw F0 = periodOf(law0, "initial");
    auto analytic0 = law0.analytic_mean(mesh);
    if (!analytic0)
      throw ValidationError("vivs quadrature: the initial infectivity law needs a closed-form mean");
    for (std::size_t i = 0; i < n; ++i) {
      panel.force0[i] = p.I0 * (*analytic0)[i];
      panel.F0cPanel[i] = p.I0 * F0.survival(mesh.time(i));
    }
    densityMembers(F0, p.I0, panel.initial, false);
  }
  if (p.R0 > 0.0) {
    if (!p.recoveredAge->has_density())
      throw ValidationError("vivs quadrature: the recovered-age law needs a density");
    densityMembers(*p.recoveredAge, p.R0, panel.initial, true);
    // recovery ages past the grid: the profile is flat beyond its last knot,
    // so the whole tail acts as one member at the terminal grid age
    double gridEnd = mesh.horizon;
    if (gridEnd >= last_knot_time(profile)) {
      double tail = p.recoveredAge->survival(gridEnd);
      if (tail > 0.0) {
        Member mem;
        mem.g = tabulate(profile, mesh, gridEnd);
        mem.weight = p.R0 * tail;
        panel.initial.push_back(std::move(mem));
      }
    }
  }
  return panel;
}

// W(i,j) = sum_m w_m kern_m(i-j) exp(-int_{t_j}^{t_i} g_m(r - t_j) y(r) dr),
// with kern either the susceptibility itself (fixed-point map) or the
// recovered indicator (proportion curves).
enum class KernelKind { Susceptibility, RecoveredIndicator };

void accumulate_kernel(const std::vector<Member>& members, const Curve& y, double h,
                       KernelKind kind, const TimeMesh& mesh, Matrix& W) {
  const std::size_t n = y.size();
  std::fill(W.a.begin(), W.a.end(), 0.0);
  for (const Member& mem : members) {
    const Curve& g = mem.g;
    for (std::size_t j = 0; j < n; ++j) {
      double c = 0.0;
      for (std::size_t i = j; i < n; ++i) {
        if (i > j) c += 0.5 * h * (g[i - 1 - j] * y[i - 1] + g[i - j] * y[i]);
        if (c > 40.0) break;  // c is nondecreasing in i; exp(-c) is negligible
        double kern = kind == KernelKind::Susceptibility
                          ? g[i - j]
                          : (mesh.time(i - j) >= mem.eta ? 1.0 : 0.0);
        if (kern != 0.0) W(i, j) += mem.weight * kern * std::exp(-c);
      }
    }
  }
}

// term(i) = sum_m w_m kern_m(i) exp(-int_0^{t_i} g_m(r) y(r) dr)
Curve accumulate_initial(const std::vector<Member>& members, const Curve& y, double h,
                         KernelKind kind, const TimeMesh& mesh) {
  const std::size_t n = y.size();
  Curve term(n, 0.0);
  for (const Member& mem : members) {
    const Curve& g = mem.g;
    double c = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (i > 0) c += 0.5 * h * (g[i - 1] * y[i - 1] + g[i] * y[i]);
      double kern = kind == KernelKind::Susceptibility
                        ? g[i]
                        : (mesh.time(i) >= mem.eta ? 1.0 : 0.0);
      if (kern != 0.0) term[i] += mem.weight * kern * std::exp(-c);
    }
  }
  return term;
}

// trapezoid of kernel(i-j) * q(j) over j in [0, i]
double convolve_q(const Matrix& W, const Curve& q, std::size_t i, double h) {
  if (i == 0) return 0.0;
  double acc = 0.5 * (W(i, 0) * q[0] + W(i, i) * q[i]);
  for (std::size_t j = 1; j < i; ++j) acc += W(i, j) * q[j];
  return acc * h;
}

double convolve_curve(const Curve& kern, const Curve& q, std::size_t i, double h) {
  if (i == 0) return 0.0;
  double acc = 0.5 * (kern[i] * q[0] + kern[0] * q[i]);
  for (std::size_t j = 1; j < i; ++j) acc += kern[i - j] * q[j];
  return acc * h;
}

}  // namespace

VivsSolution solve_vivs_fixed_point(const VivsProblem& p, const TimeMesh& mesh) {
  const std::size_t n = mesh.size();
  const double h = mesh.step;
  if (p.S0 < 0.0 || p.I0 < 0.0 || p.R0 < 0.0 ||
      std::abs(p.S0 + p.I0 + p.R0 - 1.0) > 1e-12)
    throw ValidationError("vivs: initial mixture must be nonnegative and sum to 1");
  if (!p.quadrature && p.mcSamples == 0)
    throw ValidationError("vivs: need at least one trajectory sample");
  if (p.R0 > 0.0 && !p.recoveredAge)
    throw ValidationError("vivs: recovered fraction needs a recovered-age law");
  if (p.initialForceIterate && p.initialForceIterate->size() != n)
    throw ValidationError("vivs: initial force iterate must live on the mesh");

  Panel panel = p.quadrature ? build_quadrature_panel(p, mesh) : build_mc_panel(p, mesh);

  Curve y = p.initialForceIterate ? *p.initialForceIterate : Curve(n, 0.0);
  Curve x(n, 1.0);
  Curve q(n, 0.0);
  Matrix W(n, n);

  const double tol = 1e-8;
  const std::size_t maxIter = 200;
  VivsSolution out;
  out.mesh = mesh;
  double residual = 0.0;
  std::size_t iter = 0;
  for (; iter < maxIter; ++iter) {
    for (std::size_t k = 0; k < n; ++k) q[k] = x[k] * y[k];
    accumulate_kernel(panel.reinfection, y, h, KernelKind::Susceptibility, mesh, W);
    Curve term0 = accumulate_initial(panel.initial, y, h, KernelKind::Susceptibility, mesh);
    Curve xNew(n), yNew(n);
    for (std::size_t i = 0; i < n; ++i) {
      xNew[i] = term0[i] + convolve_q(W, q, i, h);
      yNew[i] = panel.force0[i] + convolve_curve(panel.lambdaBar, q, i, h);
    }
    residual = std::max(sup_norm_diff(xNew, x), sup_norm_diff(yNew, y));
    x.swap(xNew);
    y.swap(yNew);
    if (residual < tol) break;
  }
  if (residual >= tol)
    throw NumericalError("vivs: Picard iteration did not converge within 200 sweeps");
  for (double v : x)
    if (v < -1e-6 || v > 1.0 + 1e-6)
      throw NumericalError("vivs: mean susceptibility left [0, 1]");

  out.susceptibility = x;
  out.force = y;
  out.iterations = iter + 1;
  out.residual = residual;

  for (std::size_t k = 0; k < n; ++k) q[k] = x[k] * y[k];
  accumulate_kernel(panel.reinfection, y, h, KernelKind::RecoveredIndicator, mesh, W);
  Curve term0S = accumulate_initial(panel.initial, y, h, KernelKind::RecoveredIndicator, mesh);
  out.S.assign(n, 0.0);
  out.I.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    out.S[i] = term0S[i] + convolve_q(W, q, i, h);
    out.I[i] = panel.F0cPanel[i] + convolve_curve(panel.FcPanel, q, i, h);
  }
  return out;
}

}  // namespace epi
