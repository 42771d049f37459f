#include "epi/analytics.hpp"

#include <cmath>
#include <functional>
#include <limits>

#include "epi/errors.hpp"

namespace epi {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double simpson_rec(const std::function<double(double)>& f, double a, double b, double fa,
                   double fm, double fb, double whole, double tol, int depth) {
  double m = 0.5 * (a + b);
  double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  double flm = f(lm), frm = f(rm);
  double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  if (depth <= 0 || std::abs(left + right - whole) < 15.0 * tol)
    return left + right + (left + right - whole) / 15.0;
  return simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double tol) {
  if (b <= a) return 0.0;
  double m = 0.5 * (a + b);
  double fa = f(a), fm = f(m), fb = f(b);
  double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return simpson_rec(f, a, b, fa, fm, fb, whole, tol, 16);
}

// Composite Simpson with a fixed cell width; used for tabulated (piecewise
// linear) kernels where adaptive refinement would chase every table kink.
double composite_simpson(const std::function<double(double)>& f, double a, double b, double cell) {
  if (b <= a) return 0.0;
  std::size_t cells = static_cast<std::size_t>(std::ceil((b - a) / cell));
  double h = (b - a) / static_cast<double>(cells);
  double acc = 0.0;
  for (std::size_t c = 0; c < cells; ++c) {
    double x0 = a + h * static_cast<double>(c), x1 = x0 + h;
    acc += h / 6.0 * (f(x0) + 4.0 * f(0.5 * (x0 + x1)) + f(x1));
  }
  return acc;
}

// Integral of f over [0, inf) for an eventually decaying integrand; +inf when
// the tail fails to decay (used as the divergence signal during bracketing).
// A positive cellHint switches to fixed-cell composite quadrature.
double integrate_decaying(const std::function<double(double)>& f, double upper,
                          double cellHint = 0.0) {
  if (std::isfinite(upper)) {
    if (cellHint > 0.0) return composite_simpson(f, 0.0, upper, cellHint);
    double acc = 0.0;
    double chunk = std::max(upper / 8.0, 1e-6);
    for (double a = 0.0; a < upper; a += chunk)
      acc += adaptive_simpson(f, a, std::min(a + chunk, upper), 1e-10);
    return acc;
  }
  double U = 1.0;
  while (std::abs(f(U)) > 1e-15) {
    if (U > 1e4 && std::abs(f(U)) > std::abs(f(0.5 * U))) return kInf;  // growing tail
    U *= 2.0;
    if (U > 1e6) return kInf;
  }
  double acc = 0.0;
  for (double a = 0.0; a < U; a *= 2.0) {
    double b = a == 0.0 ? 1.0 : 2.0 * a;
    b = std::min(b, U);
    acc += adaptive_simpson(f, a, b, 1e-10);
    if (a == 0.0) a = 0.5;  // advance 0 -> 1 on the doubling ladder
  }
  return acc;
}

// Laplace transform of a survival function, int_0^inf F^c(t) e^{-rho t} dt.
double survival_laplace(const DurationLaw& F, double rho) {
  switch (F.kind()) {
    case DurationLaw::Kind::Exponential: {
      double g = F.param(0);
      if (rho <= -g) return kInf;
      return 1.0 / (g + rho);
    }
    case DurationLaw::Kind::Deterministic: {
      double d = F.param(0);
      if (rho == 0.0) return d;
      return (1.0 - std::exp(-rho * d)) / rho;
    }
    default: {
      double upper = F.support_upper();
      auto f = [&](double t) { return F.survival(t) * std::exp(-rho * t); };
      return integrate_decaying(f, upper);
    }
  }
}

// Mean infectivity as a callable; laws without a closed form are tabulated by
// Monte Carlo over their bounded activity window.
struct MeanKernel {
  double lambda = 0.0;                       // classical scale, 0 otherwise
  std::optional<DurationLaw> period;         // classical period law
  Curve table;                               // sampled mean otherwise
  TimeMesh tableMesh;
  double bound = 0.0;

  double operator()(double t) const {
    if (period) return t < 0.0 ? 0.0 : lambda * period->survival(t);
    if (t < 0.0 || t >= bound) return 0.0;
    double x = t / tableMesh.step;
    std::size_t j = static_cast<std::size_t>(x);
    if (j + 1 >= table.size()) return table.back();
    double w = x - static_cast<double>(j);
    return (1.0 - w) * table[j] + w * table[j + 1];
  }
};

MeanKernel mean_kernel(const InfectivityLaw& law, std::size_t mcSamples, std::uint64_t seed) {
  MeanKernel k;
  if (auto period = law.period_law()) {
    k.lambda = law.lambda_star();
    k.period = *period;
    return k;
  }
  double bound = law.period_bound();
  if (!std::isfinite(bound))
    throw ValidationError("analytics: need a closed-form mean or a bounded activity window");
  if (bound <= 0.0) {  // identically zero law
    k.bound = 0.0;
    k.tableMesh = TimeMesh(1.0, 1.0);
    k.table.assign(2, 0.0);
    return k;
  }
  std::size_t cells = 4096;
  double h = bound / static_cast<double>(cells);
  k.tableMesh = TimeMesh(bound, h);
  k.table = mean_curve(law, k.tableMesh, mcSamples, seed);
  k.bound = bound;
  return k;
}

double discounted_integral(const MeanKernel& k, double rho) {
  if (k.period) {
    switch (k.period->kind()) {
      case DurationLaw::Kind::Exponential: {
        double g = k.period->param(0);
        if (rho <= -g) return kInf;
        return k.lambda / (g + rho);
      }
      case DurationLaw::Kind::Deterministic: {
        double d = k.period->param(0);
        if (rho == 0.0) return k.lambda * d;
        return k.lambda * (1.0 - std::exp(-rho * d)) / rho;
      }
      default: {
        double upper = k.period->support_upper();
        auto f = [&](double t) { return k.lambda * k.period->survival(t) * std::exp(-rho * t); };
        return integrate_decaying(f, upper);
      }
    }
  }
  auto f = [&](double t) { return k(t) * std::exp(-rho * t); };
  return integrate_decaying(f, k.bound, k.tableMesh.step);
}

}  // namespace

double discounted_kernel_integral(const InfectivityLaw& law, double rho, std::size_t mcSamples,
                                  std::uint64_t seed) {
  return discounted_integral(mean_kernel(law, mcSamples, seed), rho);
}

double growth_rate(const InfectivityLaw& law, std::size_t mcSamples, std::uint64_t seed) {
  MeanKernel k = mean_kernel(law, mcSamples, seed);
  double r0 = discounted_integral(k, 0.0);
  if (!std::isfinite(r0) || r0 <= 0.0)
    throw ValidationError("growth rate: the mean infectivity must have a positive finite integral");
  if (std::abs(r0 - 1.0) < 1e-12) return 0.0;

  auto G = [&](double rho) { return discounted_integral(k, rho) - 1.0; };  // decreasing
  double lo = -10.0, hi = 10.0;
  while (G(hi) > 0.0) {
    hi *= 2.0;
    if (hi > 1e3) throw NumericalError("growth rate: bracket expansion failed above");
  }
  while (G(lo) < 0.0) {
    lo *= 2.0;
    if (lo < -1e3) throw NumericalError("growth rate: bracket expansion failed below");
  }
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    double g = G(mid);
    if (std::abs(g) < 1e-10 && hi - lo < 1e-9) return mid;
    if (g > 0.0)
      lo = mid;
    else
      hi = mid;
    if (hi - lo < 1e-13) break;
  }
  return 0.5 * (lo + hi);
}

double r0_from_rho(const InfectivityLaw& law, double rho, std::size_t mcSamples,
                   std::uint64_t seed) {
  MeanKernel k = mean_kernel(law, mcSamples, seed);
  double r0 = discounted_integral(k, 0.0);
  double denom = discounted_integral(k, rho);
  if (!std::isfinite(denom) || denom <= 0.0)
    throw ValidationError("r0 from growth rate: the discounted kernel integral must be finite");
  return r0 / denom;
}

EarlyPhaseProfile early_phase_profile(const InfectivityLaw& law, const DurationLaw& F, double rho,
                                      const TimeMesh& mesh, std::size_t mcSamples,
                                      std::uint64_t seed) {
  if (rho == 0.0) throw ValidationError("early phase profile: needs a nonzero growth rate");
  MeanKernel k = mean_kernel(law, mcSamples, seed);
  double denom = survival_laplace(F, rho);
  if (!std::isfinite(denom) || denom <= 0.0)
    throw ValidationError("early phase profile: the discounted period survival must be finite");

  EarlyPhaseProfile out;
  out.rho = rho;
  out.lambdaRho.resize(mesh.size());
  out.FRhoC.resize(mesh.size());
  for (std::size_t idx = 0; idx < mesh.size(); ++idx) {
    double t = mesh.time(idx);
    auto fl = [&](double s) { return k(t + s) * std::exp(-rho * s); };
    auto fs = [&](double s) { return F.survival(t + s) * std::exp(-rho * s); };
    double upperL = k.period ? k.period->support_upper() : k.bound;
    if (std::isfinite(upperL)) upperL = std::max(upperL - t, 0.0);
    double upperS = F.support_upper();
    if (std::isfinite(upperS)) upperS = std::max(upperS - t, 0.0);
    double cellL = k.period ? 0.0 : k.tableMesh.step;
    out.lambdaRho[idx] = integrate_decaying(fl, upperL, cellL) / denom;
    out.FRhoC[idx] = integrate_decaying(fs, upperS) / denom;
  }
  out.i = rho * denom;
  out.r = 1.0 - out.i;
  return out;
}

MarkovEquilibrium markov_equilibria(MarkovFamily family, const MarkovParams& params) {
  if (params.lambda <= 0.0 || params.gamma <= 0.0)
    throw ValidationError("markov equilibria: need positive infection and recovery rates");
  switch (family) {
    case MarkovFamily::SIS: {
      double r0 = params.lambda / params.gamma;
      if (r0 <= 1.0) return {1.0, 0.0};
      return {params.gamma / params.lambda, 1.0 - params.gamma / params.lambda};
    }
    case MarkovFamily::SIRS: {
      double r0 = params.lambda / params.gamma;
      if (r0 <= 1.0) return {1.0, 0.0};
      if (params.rho <= 0.0)
        throw ValidationError("markov equilibria: the SIRS family needs a positive immunity-loss rate");
      return {params.gamma / params.lambda,
              (1.0 - 1.0 / r0) * params.rho / (params.gamma + params.rho)};
    }
    case MarkovFamily::SIRDemography: {
      if (params.mu <= 0.0)
        throw ValidationError("markov equilibria: the demography family needs a positive birth rate");
      double r0 = params.lambda / (params.gamma + params.mu);
      if (r0 <= 1.0) return {1.0, 0.0};
      return {(params.gamma + params.mu) / params.lambda,
              (1.0 - 1.0 / r0) * params.mu / (params.gamma + params.mu)};
    }
    default:
      throw ValidationError("markov equilibria: only the SIS, SIRS and demography families have one");
  }
}

double critical_population_size(double r0, double gamma, double mu) {
  if (r0 <= 0.0 || gamma < 0.0 || mu <= 0.0)
    throw ValidationError("critical population size: need r0 > 0 and mu > 0");
  if (std::abs(r0 - 1.0) < 1e-12)
    throw ValidationError("critical population size: undefined at r0 = 1");
  double eps = mu / (gamma + mu);
  double margin = 1.0 - 1.0 / r0;
  return 9.0 / (eps * eps * margin * margin * r0);
}

double sis_quasipotential(double r0) {
  if (r0 <= 0.0) throw ValidationError("sis quasipotential: need r0 > 0");
  return std::log(r0) - 1.0 + 1.0 / r0;
}

}  // namespace epi
