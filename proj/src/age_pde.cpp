#include "epi/age_pde.hpp"

#include <cmath>

#include "epi/errors.hpp"
#include "volterra_detail.hpp"

namespace epi {

double AgeDensityField::value(std::size_t k, std::size_t j) const {
  if (j >= survival.size()) return 0.0;
  if (j >= k) {
    std::size_t back = j - k;
    if (back >= initial.size()) return 0.0;
    double fcBack = survival[back];
    if (fcBack <= 0.0) return 0.0;
    return survival[j] / fcBack * initial[back];
  }
  return survival[j] * boundary[k - j];
}

Curve AgeDensityField::slice(std::size_t k) const {
  Curve out(ageCount());
  for (std::size_t j = 0; j < out.size(); ++j) out[j] = value(k, j);
  return out;
}

namespace {

struct Prepared {
  Curve init;    // i(0, x) node samples
  Curve fc;      // F^c on the extended age grid
  Curve lam;     // mean kernel on the time mesh
  Curve A;       // force exerted by the initially infected, per time node
  Curve M0;      // still-infected mass of the initially infected, per time node
  detail::KernelSamples lamK, fcK;
};

Prepared prepare(const AgeDensityProblem& p, const TimeMesh& mesh) {
  if (p.initialDensity.density.empty())
    throw ValidationError("age density: initial density must have at least one node");
  if (std::abs(p.initialDensity.step - mesh.step) > 1e-12 * std::max(1.0, mesh.step))
    throw ValidationError(
        "age density: the initial-density step must equal the mesh step so "
        "characteristics pass through grid nodes");
  if (!p.lambdaBar) throw ValidationError("age density: mean infectivity kernel is required");

  Prepared out;
  const std::size_t n = mesh.size();
  const double h = mesh.step;
  const std::size_t nx = p.initialDensity.density.size();
  out.init = p.initialDensity.density;
  out.fc.resize(nx + n - 1);
  for (std::size_t j = 0; j < out.fc.size(); ++j)
    out.fc[j] = p.F.survival(static_cast<double>(j) * h);
  out.lam.resize(n);
  for (std::size_t k = 0; k < n; ++k) out.lam[k] = p.lambdaBar(mesh.time(k));
  out.lamK.right = out.lam;
  out.lamK.left = out.lam;
  out.fcK = detail::survival_kernel(p.F, mesh);

  out.A.assign(n, 0.0);
  out.M0.assign(n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    double t = mesh.time(k);
    Curve fA(nx), fM(nx);
    for (std::size_t j = 0; j < nx; ++j) {
      double y = static_cast<double>(j) * h;
      fA[j] = p.lambdaBar(y + t) * out.init[j];
      fM[j] = out.fc[j] > 0.0 ? out.fc[j + k] / out.fc[j] * out.init[j] : 0.0;
    }
    out.A[k] = trapezoid(fA, h);
    out.M0[k] = trapezoid(fM, h);
  }
  return out;
}

enum class SusceptibleRule { Depletion, Renewal };

AgeDensityField solve_impl(const AgeDensityProblem& p, const TimeMesh& mesh,
                           SusceptibleRule rule) {
  Prepared pr = prepare(p, mesh);
  const std::size_t n = mesh.size();
  const double h = mesh.step;

  AgeDensityField field;
  field.mesh = mesh;
  field.initial = pr.init;
  field.survival = pr.fc;
  field.boundary.assign(n, 0.0);
  field.susceptible.assign(n, 0.0);
  field.mass.assign(n, 0.0);

  auto& b = field.boundary;
  double s0 = rule == SusceptibleRule::Depletion ? p.S0 : 1.0 - pr.M0[0];
  b[0] = std::max(s0, 0.0) * pr.A[0];
  field.susceptible[0] = std::max(s0, 0.0);
  field.mass[0] = pr.M0[0];

  double cumB = 0.0;  // trapezoid integral of the boundary trace up to k-1
  for (std::size_t k = 1; k < n; ++k) {
    double forceHist = detail::convolve_history(pr.lamK, b, k, h);
    double massHist = detail::convolve_history(pr.fcK, b, k, h);
    auto susceptibleAt = [&](double bk) {
      if (rule == SusceptibleRule::Depletion)
        return p.S0 - (cumB + 0.5 * h * (b[k - 1] + bk));
      return 1.0 - pr.M0[k] - (massHist + 0.5 * h * pr.fcK.right[0] * bk);
    };
    std::vector<double> x{b[k - 1]};
    detail::damped_fixed_point(
        x,
        [&](const std::vector<double>& cur, std::vector<double>& next) {
          double s = std::max(susceptibleAt(cur[0]), 0.0);
          next[0] = s * (pr.A[k] + forceHist + 0.5 * h * pr.lamK.right[0] * cur[0]);
        },
        "age density boundary");
    b[k] = x[0];
    double s = susceptibleAt(b[k]);
    if (s < 0.0 && !field.clampTime) field.clampTime = mesh.time(k);
    field.susceptible[k] = std::max(s, 0.0);
    field.mass[k] = pr.M0[k] + massHist + 0.5 * h * pr.fcK.right[0] * b[k];
    cumB += 0.5 * h * (b[k - 1] + b[k]);
  }
  return field;
}

}  // namespace

AgeDensityField solve_age_density(const AgeDensityProblem& p, const TimeMesh& mesh) {
  return solve_impl(p, mesh, SusceptibleRule::Depletion);
}

AgeDensityField solve_sis_age_density(const AgeDensityProblem& p, const TimeMesh& mesh) {
  return solve_impl(p, mesh, SusceptibleRule::Renewal);
}

EndemicEquilibrium sis_endemic_equilibrium(double r0, const DurationLaw& F,
                                           const TimeMesh& ageMesh) {
  if (r0 <= 0.0) throw ValidationError("endemic equilibrium: reproduction number must be > 0");
  EndemicEquilibrium eq;
  eq.Istar = std::max(0.0, 1.0 - 1.0 / r0);
  double mu = 1.0 / F.mean();
  eq.density.resize(ageMesh.size());
  for (std::size_t j = 0; j < eq.density.size(); ++j)
    eq.density[j] = eq.Istar * mu * F.survival(ageMesh.time(j));
  return eq;
}

}  // namespace epi
