#include "epi/volterra.hpp"

#include <array>
#include <cmath>
#include <sstream>

#include "volterra_detail.hpp"

namespace epi {

using detail::KernelSamples;
using detail::convolve_at;
using detail::convolve_history;
using detail::damped_fixed_point;
using detail::survival_kernel;

namespace {

double contact(const std::function<double(double)>& c, double t) {
  return c ? c(t) : 1.0;
}

}  // namespace

LimitSolution solve_ode(const MarkovParams& p, const TimeMesh& mesh) {
  using State = std::array<double, 4>;  // S, E, I, R
  auto deriv = [&p](double t, const State& y) {
    double c = contact(p.contactFactor, t);
    double S = y[0], E = y[1], I = y[2], R = y[3];
    State d{0, 0, 0, 0};
    switch (p.family) {
      case MarkovFamily::SIR:
        d[0] = -c * p.lambda * S * I;
        d[2] = c * p.lambda * S * I - p.gamma * I;
        d[3] = p.gamma * I;
        break;
      case MarkovFamily::SIS:
        d[0] = -c * p.lambda * S * I + p.gamma * I;
        d[2] = c * p.lambda * S * I - p.gamma * I;
        break;
      case MarkovFamily::SIRS:
        d[0] = -c * p.lambda * S * I + p.rho * R;
        d[2] = c * p.lambda * S * I - p.gamma * I;
        d[3] = p.gamma * I - p.rho * R;
        break;
      case MarkovFamily::SIRDemography:
        d[0] = p.mu - c * p.lambda * S * I - p.mu * S;
        d[2] = c * p.lambda * S * I - (p.gamma + p.mu) * I;
        d[3] = p.gamma * I - p.mu * R;
        break;
      case MarkovFamily::SEIR:
        d[0] = -c * p.lambda * S * I;
        d[1] = c * p.lambda * S * I - p.nu * E;
        d[2] = p.nu * E - p.gamma * I;
        d[3] = p.gamma * I;
        break;
    }
    return d;
  };

  const std::size_t n = mesh.size();
  const double h = mesh.step;
  LimitSolution sol;
  sol.mesh = mesh;
  sol.S.resize(n);
  sol.E.resize(n);
  sol.I.resize(n);
  sol.R.resize(n);
  State y{p.S0, p.E0, p.I0, p.R0};
  for (std::size_t i = 0; i < n; ++i) {
    sol.S[i] = y[0];
    sol.E[i] = y[1];
    sol.I[i] = y[2];
    sol.R[i] = y[3];
    for (double v : y)
      if (v < -1e-8)
        throw NumericalError("solve_ode: negative state excursion; reduce the mesh step");
    if (i + 1 == n) break;
    double t = mesh.time(i);
    State k1 = deriv(t, y);
    State y2, y3, y4;
    for (int j = 0; j < 4; ++j) y2[j] = y[j] + 0.5 * h * k1[j];
    State k2 = deriv(t + 0.5 * h, y2);
    for (int j = 0; j < 4; ++j) y3[j] = y[j] + 0.5 * h * k2[j];
    State k3 = deriv(t + 0.5 * h, y3);
    for (int j = 0; j < 4; ++j) y4[j] = y[j] + h * k3[j];
    State k4 = deriv(t + h, y4);
    for (int j = 0; j < 4; ++j)
      y[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
  }
  return sol;
}

Curve initial_force_from_age_profile(const std::function<double(double)>& lambdaBarFn,
                                     const AgeProfile& prof, const TimeMesh& mesh) {
  Curve out(mesh.size(), 0.0);
  if (prof.density.empty()) return out;
  for (std::size_t nIdx = 0; nIdx < out.size(); ++nIdx) {
    double t = mesh.time(nIdx);
    Curve integrand(prof.density.size());
    for (std::size_t j = 0; j < prof.density.size(); ++j) {
      double y = prof.step * static_cast<double>(j);
      integrand[j] = lambdaBarFn(y + t) * prof.density[j];
    }
    out[nIdx] = trapezoid(integrand, prof.step);
  }
  return out;
}

Curve initial_mass_from_age_profile(const DurationLaw& F, const AgeProfile& prof,
                                    const TimeMesh& mesh) {
  Curve out(mesh.size(), 0.0);
  if (prof.density.empty()) return out;
  for (std::size_t nIdx = 0; nIdx < out.size(); ++nIdx) {
    double t = mesh.time(nIdx);
    Curve integrand(prof.density.size());
    for (std::size_t j = 0; j < prof.density.size(); ++j) {
      double y = prof.step * static_cast<double>(j);
      double denom = F.survival(y);
      integrand[j] = denom > 0.0 ? F.survival(t + y) / denom * prof.density[j] : 0.0;
    }
    out[nIdx] = trapezoid(integrand, prof.step);
  }
  return out;
}

LimitSolution solve_sir_volterra(const SirVolterraProblem& p, const TimeMesh& mesh) {
  if (p.lambda < 0.0) throw ValidationError("solve_sir_volterra: lambda must be >= 0");
  if (!p.F0 && !p.ageProfile && p.I0 > 0.0)
    throw ValidationError("solve_sir_volterra: initial infections need F0 or an age profile");

  const std::size_t n = mesh.size();
  const double h = mesh.step;
  KernelSamples Fc = survival_kernel(p.F, mesh);

  // initial-infected mass curve
  Curve initMass(n, 0.0);
  if (p.ageProfile) {
    initMass = initial_mass_from_age_profile(p.F, *p.ageProfile, mesh);
  } else if (p.F0) {
    for (std::size_t i = 0; i < n; ++i) initMass[i] = p.I0 * p.F0->survival(mesh.time(i));
  }

  LimitSolution sol;
  sol.mesh = mesh;
  sol.S.assign(n, 0.0);
  sol.I.assign(n, 0.0);
  sol.R.assign(n, 0.0);
  Curve upsilon(n, 0.0);  // infection rate lambda * c * S * I
  const double total = p.S0 + p.I0 + p.R0;

  sol.S[0] = p.S0;
  sol.I[0] = p.I0;
  sol.R[0] = p.R0;
  upsilon[0] = p.lambda * contact(p.contactFactor, 0.0) * p.S0 * p.I0;
  Curve cumUp(n, 0.0);  // trapezoid integral of upsilon over [0, t_j] for j <= current

  for (std::size_t i = 1; i < n; ++i) {
    double t = mesh.time(i);
    double c = contact(p.contactFactor, t);
    double hist = convolve_history(Fc, upsilon, i, h);
    std::vector<double> x{sol.S[i - 1], sol.I[i - 1]};
    damped_fixed_point(
        x,
        [&](const std::vector<double>& cur, std::vector<double>& next) {
          double uN = p.lambda * c * cur[0] * cur[1];
          next[0] = p.S0 - (cumUp[i - 1] + 0.5 * h * (upsilon[i - 1] + uN));
          next[1] = initMass[i] + hist + 0.5 * h * Fc.right[0] * uN;
        },
        "solve_sir_volterra");
    sol.S[i] = x[0];
    sol.I[i] = x[1];
    upsilon[i] = p.lambda * c * x[0] * x[1];
    cumUp[i] = cumUp[i - 1] + 0.5 * h * (upsilon[i - 1] + upsilon[i]);
    sol.R[i] = total - sol.S[i] - sol.I[i];
  }
  // aggregate force of infection of the constant-infectivity model
  sol.force.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) sol.force[i] = p.lambda * sol.I[i];
  return sol;
}

LimitSolution solve_vi_volterra(const ViVolterraProblem& p, const TimeMesh& mesh) {
  const std::size_t n = mesh.size();
  const double h = mesh.step;
  if (p.lambdaBar.size() != n || p.initialForce.size() != n || p.initialInfected.size() != n)
    throw ValidationError("solve_vi_volterra: curves must be sampled on the solver mesh");
  KernelSamples Fc = survival_kernel(p.F, mesh);
  KernelSamples lam;  // mean-infectivity kernel (continuous for built-in laws)
  lam.right = p.lambdaBar;
  lam.left = p.lambdaBar;

  LimitSolution sol;
  sol.mesh = mesh;
  sol.S.assign(n, 0.0);
  sol.I.assign(n, 0.0);
  sol.R.assign(n, 0.0);
  sol.force.assign(n, 0.0);
  Curve upsilon(n, 0.0);  // Upsilon = c * Seff * Ffrak
  Curve cumUp(n, 0.0);
  const double total = p.S0 + p.I0 + p.R0;

  sol.S[0] = p.S0;
  sol.I[0] = p.I0;
  sol.R[0] = p.R0;
  sol.force[0] = p.initialForce[0];
  double seff0 = p.linearized ? 1.0 : p.S0;
  upsilon[0] = contact(p.contactFactor, 0.0) * seff0 * sol.force[0];

  for (std::size_t i = 1; i < n; ++i) {
    double t = mesh.time(i);
    double c = contact(p.contactFactor, t);
    double hist = convolve_history(lam, upsilon, i, h);
    std::vector<double> x{sol.S[i - 1], sol.force[i - 1]};
    damped_fixed_point(
        x,
        [&](const std::vector<double>& cur, std::vector<double>& next) {
          double seff = p.linearized ? 1.0 : cur[0];
          double uN = c * seff * cur[1];
          next[0] = p.S0 - (cumUp[i - 1] + 0.5 * h * (upsilon[i - 1] + uN));
          next[1] = p.initialForce[i] + hist + 0.5 * h * lam.right[0] * uN;
        },
        "solve_vi_volterra");
    sol.S[i] = x[0];
    sol.force[i] = x[1];
    double seff = p.linearized ? 1.0 : sol.S[i];
    upsilon[i] = c * seff * sol.force[i];
    cumUp[i] = cumUp[i - 1] + 0.5 * h * (upsilon[i - 1] + upsilon[i]);
    sol.I[i] = p.initialInfected[i] + convolve_at(Fc, upsilon, i, h);
    sol.R[i] = total - sol.S[i] - sol.I[i];
  }
  sol.I[0] = p.initialInfected[0];
  sol.R[0] = total - sol.S[0] - sol.I[0];
  return sol;
}

namespace {

// P(xi <= x < xi + eta) with xi ~ delay law and eta ~ F, sampled one-sidedly
// on the mesh.  Handles the independent case (delay law x F) and a joint
// atom table.
struct PhaseKernels {
  KernelSamples psi;  // in exposed-then-infectious state at lag x
};

PhaseKernels phase_kernel(const DurationLaw& delay, const DurationLaw& F,
                          const std::optional<BivariateTable>& joint, const TimeMesh& mesh) {
  const std::size_t n = mesh.size();
  const double h = mesh.step;
  PhaseKernels out;
  out.psi.right.assign(n, 0.0);
  out.psi.left.assign(n, 0.0);
  if (joint) {
    for (std::size_t k = 0; k < n; ++k) {
      double x = mesh.time(k);
      double r = 0.0, l = 0.0;
      for (const auto& a : joint->atoms) {
        if (a.u <= x && x < a.u + a.v) r += a.p;
        if (a.u < x && x <= a.u + a.v) l += a.p;
      }
      out.psi.right[k] = r;
      out.psi.left[k] = l;
    }
    return out;
  }
  if (delay.has_density()) {
    // Psi(x) = int_0^x F^c(x-u) g(u) du; continuous even when F has atoms
    Curve g(n);
    for (std::size_t k = 0; k < n; ++k) g[k] = delay.density(mesh.time(k));
    for (std::size_t k = 1; k < n; ++k) {
      double acc = 0.0;
      for (std::size_t j = 0; j < k; ++j) {
        double fl = F.survival_left(mesh.time(k - j));
        double fr = F.survival(mesh.time(k - j - 1));
        acc += 0.5 * h * (fl * g[j] + fr * g[j + 1]);
      }
      out.psi.right[k] = acc;
      out.psi.left[k] = acc;
    }
    return out;
  }
  // atomic delay law (deterministic or empirical)
  std::vector<std::pair<double, double>> atoms;
  if (delay.kind() == DurationLaw::Kind::Deterministic)
    atoms = {{delay.param(0), 1.0}};
  else
    atoms = delay.table();
  for (std::size_t k = 0; k < n; ++k) {
    double x = mesh.time(k);
    double r = 0.0, l = 0.0;
    for (auto& [u, prob] : atoms) {
      if (u <= x) r += prob * F.survival(x - u);
      if (u < x) l += prob * F.survival_left(x - u);
    }
    out.psi.right[k] = r;
    out.psi.left[k] = l;
  }
  return out;
}

}  // namespace

LimitSolution solve_seir_volterra(const SeirVolterraProblem& p, const TimeMesh& mesh) {
  if (p.joint) p.joint->validate();
  if (p.E0 > 0.0 && !p.G0)
    throw ValidationError("solve_seir_volterra: initially exposed need a remaining law G0");
  if (p.I0 > 0.0 && !p.F0)
    throw ValidationError("solve_seir_volterra: initially infected need a remaining law F0");

  const std::size_t n = mesh.size();
  const double h = mesh.step;
  KernelSamples Gc = survival_kernel(p.G, mesh);
  PhaseKernels fresh = phase_kernel(p.G, p.F, p.joint, mesh);
  // initially exposed: remaining exposed period G0, then a fresh infectious
  // period; joint correlation is not modeled for the initial cohort
  PhaseKernels init = p.G0 ? phase_kernel(*p.G0, p.F, std::nullopt, mesh) : PhaseKernels{};

  LimitSolution sol;
  sol.mesh = mesh;
  sol.S.assign(n, 0.0);
  sol.E.assign(n, 0.0);
  sol.I.assign(n, 0.0);
  sol.R.assign(n, 0.0);
  Curve upsilon(n, 0.0), cumUp(n, 0.0);
  const double total = p.S0 + p.E0 + p.I0 + p.R0;

  sol.S[0] = p.S0;
  sol.E[0] = p.E0;
  sol.I[0] = p.I0;
  sol.R[0] = p.R0;
  upsilon[0] = p.lambda * contact(p.contactFactor, 0.0) * p.S0 * p.I0;

  for (std::size_t i = 1; i < n; ++i) {
    double t = mesh.time(i);
    double c = contact(p.contactFactor, t);
    double hist = convolve_history(fresh.psi, upsilon, i, h);
    double initTerm = (p.G0 ? p.E0 * init.psi.right[i] : 0.0) +
                      (p.F0 ? p.I0 * p.F0->survival(t) : 0.0);
    std::vector<double> x{sol.S[i - 1], sol.I[i - 1]};
    damped_fixed_point(
        x,
        [&](const std::vector<double>& cur, std::vector<double>& next) {
          double uN = p.lambda * c * cur[0] * cur[1];
          next[0] = p.S0 - (cumUp[i - 1] + 0.5 * h * (upsilon[i - 1] + uN));
          next[1] = initTerm + hist + 0.5 * h * fresh.psi.right[0] * uN;
        },
        "solve_seir_volterra");
    sol.S[i] = x[0];
    sol.I[i] = x[1];
    upsilon[i] = p.lambda * c * x[0] * x[1];
    cumUp[i] = cumUp[i - 1] + 0.5 * h * (upsilon[i - 1] + upsilon[i]);
    double e0Term = p.G0 ? p.E0 * p.G0->survival(t) : 0.0;
    sol.E[i] = e0Term + convolve_at(Gc, upsilon, i, h);
    sol.R[i] = total - sol.S[i] - sol.E[i] - sol.I[i];
  }
  sol.force.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) sol.force[i] = p.lambda * sol.I[i];
  return sol;
}

void PatchNetwork::validate() const {
  if (L == 0 || L > 32) throw ValidationError("patch network: 1 <= L <= 32");
  if (lambda.size() != L) throw ValidationError("patch network: lambda size mismatch");
  auto checkMat = [&](const Matrix& m, const char* name, bool probWeights) {
    if (m.rows != L || m.cols != L) {
      std::ostringstream os;
      os << "patch network: " << name << " must be " << L << "x" << L;
      throw ValidationError(os.str());
    }
    for (std::size_t i = 0; i < L; ++i)
      for (std::size_t j = 0; j < L; ++j) {
        if (i != j && m(i, j) < 0.0) {
          std::ostringstream os;
          os << "patch network: " << name << " off-diagonal entries must be >= 0";
          throw ValidationError(os.str());
        }
        if (probWeights && i == j && std::abs(m(i, j) - 1.0) > 1e-12)
          throw ValidationError("patch network: kappa diagonal must be 1");
      }
  };
  checkMat(kappa, "kappa", true);
  checkMat(nuS, "nuS", false);
  checkMat(nuI, "nuI", false);
  checkMat(nuR, "nuR", false);
  if (gammaExponent < 0.0 || gammaExponent > 1.0)
    throw ValidationError("patch network: exponent must lie in [0,1]");
  for (double l : lambda)
    if (l < 0.0) throw ValidationError("patch network: lambda must be >= 0");
}

std::vector<Matrix> migration_location_laws(const PatchNetwork& net, const TimeMesh& mesh) {
  const std::size_t L = net.L;
  Matrix gen(L, L, 0.0);
  for (std::size_t i = 0; i < L; ++i) {
    double out = 0.0;
    for (std::size_t j = 0; j < L; ++j)
      if (i != j) {
        gen(i, j) = net.nuI(i, j);
        out += net.nuI(i, j);
      }
    gen(i, i) = -out;
  }
  Matrix genStep(L, L);
  for (std::size_t i = 0; i < L * L; ++i) genStep.a[i] = gen.a[i] * mesh.step;
  Matrix eStep = matrix_exponential(genStep);
  std::vector<Matrix> p(mesh.size());
  Matrix cur(L, L, 0.0);
  for (std::size_t i = 0; i < L; ++i) cur(i, i) = 1.0;
  for (std::size_t nIdx = 0; nIdx < mesh.size(); ++nIdx) {
    p[nIdx] = cur;
    cur = matmul(cur, eStep);
  }
  return p;
}

LimitSolution solve_multipatch_volterra(const MultipatchProblem& p, const TimeMesh& mesh) {
  p.net.validate();
  const std::size_t L = p.net.L;
  if (p.S0.size() != L || p.I0.size() != L || p.R0.size() != L)
    throw ValidationError("solve_multipatch_volterra: initial fractions must have L entries");
  double anyI0 = 0.0;
  for (double v : p.I0) anyI0 += v;
  if (anyI0 > 0.0 && !p.F0)
    throw ValidationError("solve_multipatch_volterra: initial infections need F0");

  const std::size_t n = mesh.size();
  const double h = mesh.step;
  std::vector<Matrix> ploc = migration_location_laws(p.net, mesh);

  // D[l][i][k] = int_0^{t_k} p_{l,i}(s) F0(ds); K kernels from F likewise.
  auto stieltjes_vs_time = [&](const DurationLaw& law) {
    // returns per (l,i) one-sided kernels of int_0^x p_{l,i}(u) law(du)
    std::vector<std::vector<KernelSamples>> out(L, std::vector<KernelSamples>(L));
    for (std::size_t l = 0; l < L; ++l)
      for (std::size_t i = 0; i < L; ++i) {
        out[l][i].right.assign(n, 0.0);
        out[l][i].left.assign(n, 0.0);
      }
    if (law.has_density()) {
      // exact cdf increments weighted by the trapezoid-average location law:
      // when migration is absent this reproduces the cdf at the mesh nodes
      // exactly, matching the single-patch solver to machine precision
      for (std::size_t l = 0; l < L; ++l)
        for (std::size_t i = 0; i < L; ++i) {
          double acc = 0.0;
          double prevCdf = 0.0;
          for (std::size_t k = 1; k < n; ++k) {
            double curCdf = law.cdf(mesh.time(k));
            acc += 0.5 * (ploc[k - 1](l, i) + ploc[k](l, i)) * (curCdf - prevCdf);
            prevCdf = curCdf;
            out[l][i].right[k] = acc;
            out[l][i].left[k] = acc;
          }
        }
      return out;
    }
    std::vector<std::pair<double, double>> atoms;
    if (law.kind() == DurationLaw::Kind::Deterministic)
      atoms = {{law.param(0), 1.0}};
    else
      atoms = law.table();
    for (std::size_t l = 0; l < L; ++l)
      for (std::size_t i = 0; i < L; ++i)
        for (std::size_t k = 0; k < n; ++k) {
          double x = mesh.time(k);
          for (auto& [u, prob] : atoms) {
            std::size_t uIdx = static_cast<std::size_t>(std::llround(u / h));
            double pv = uIdx < n ? ploc[uIdx](l, i) : ploc[n - 1](l, i);
            if (u <= x) out[l][i].right[k] += prob * pv;
            if (u < x) out[l][i].left[k] += prob * pv;
          }
        }
    return out;
  };
  auto Dk = p.F0 ? stieltjes_vs_time(*p.F0)
                 : std::vector<std::vector<KernelSamples>>(
                       L, std::vector<KernelSamples>(L, KernelSamples{Curve(n, 0.0), Curve(n, 0.0)}));
  auto Kk = stieltjes_vs_time(p.F);

  LimitSolution sol;
  sol.mesh = mesh;
  sol.Sp.assign(L, Curve(n, 0.0));
  sol.Ip.assign(L, Curve(n, 0.0));
  sol.Rp.assign(L, Curve(n, 0.0));
  std::vector<Curve> ups(L, Curve(n, 0.0));

  auto upsilonAt = [&](std::size_t i, const std::vector<double>& S, const std::vector<double>& I,
                       const std::vector<double>& R) {
    double mass = S[i] + I[i] + R[i];
    double numer = 0.0;
    for (std::size_t j = 0; j < L; ++j) numer += p.net.kappa(i, j) * I[j];
    numer *= p.net.lambda[i] * S[i];
    if (numer == 0.0) return 0.0;
    if (mass <= 0.0) return 0.0;  // 0/0 convention
    return numer / std::pow(mass, p.net.gammaExponent);
  };

  std::vector<double> S = p.S0, I = p.I0, R = p.R0;
  for (std::size_t i = 0; i < L; ++i) {
    sol.Sp[i][0] = S[i];
    sol.Ip[i][0] = I[i];
    sol.Rp[i][0] = R[i];
    ups[i][0] = upsilonAt(i, S, I, R);
  }

  // running trapezoid integrals of plain time integrands
  std::vector<double> cumUps(L, 0.0), cumMigS(L, 0.0), cumMigI(L, 0.0), cumMigR(L, 0.0);
  auto migRate = [&](const Matrix& nu, const std::vector<double>& z, std::size_t i) {
    double acc = 0.0;
    for (std::size_t l = 0; l < L; ++l)
      if (l != i) acc += nu(l, i) * z[l] - nu(i, l) * z[i];
    return acc;
  };
  std::vector<double> prevMigS(L), prevMigI(L), prevMigR(L), prevUps(L);
  for (std::size_t i = 0; i < L; ++i) {
    prevMigS[i] = migRate(p.net.nuS, S, i);
    prevMigI[i] = migRate(p.net.nuI, I, i);
    prevMigR[i] = migRate(p.net.nuR, R, i);
    prevUps[i] = ups[i][0];
  }

  Matrix convHist(L, L);  // [l][i]: history part of the F-kernel convolutions
  for (std::size_t k = 1; k < n; ++k) {
    for (std::size_t l = 0; l < L; ++l)
      for (std::size_t i = 0; i < L; ++i)
        convHist(l, i) = convolve_history(Kk[l][i], ups[l], k, h);
    std::vector<double> x(3 * L);
    for (std::size_t i = 0; i < L; ++i) {
      x[i] = S[i];
      x[L + i] = I[i];
      x[2 * L + i] = R[i];
    }
    damped_fixed_point(
        x,
        [&](const std::vector<double>& cur, std::vector<double>& next) {
          std::vector<double> Sc(cur.begin(), cur.begin() + L);
          std::vector<double> Ic(cur.begin() + L, cur.begin() + 2 * L);
          std::vector<double> Rc(cur.begin() + 2 * L, cur.end());
          for (std::size_t i = 0; i < L; ++i) ups[i][k] = upsilonAt(i, Sc, Ic, Rc);
          for (std::size_t i = 0; i < L; ++i) {
            double upInt = cumUps[i] + 0.5 * h * (prevUps[i] + ups[i][k]);
            double migS = cumMigS[i] + 0.5 * h * (prevMigS[i] + migRate(p.net.nuS, Sc, i));
            double migI = cumMigI[i] + 0.5 * h * (prevMigI[i] + migRate(p.net.nuI, Ic, i));
            double migR = cumMigR[i] + 0.5 * h * (prevMigR[i] + migRate(p.net.nuR, Rc, i));
            double recovInit = 0.0, recovNew = 0.0;
            for (std::size_t l = 0; l < L; ++l) {
              recovInit += p.I0[l] * Dk[l][i].right[k];
              recovNew += convHist(l, i) + 0.5 * h * Kk[l][i].right[0] * ups[l][k];
            }
            next[i] = p.S0[i] - upInt + migS;
            next[L + i] = p.I0[i] - recovInit + upInt - recovNew + migI;
            next[2 * L + i] = p.R0[i] + recovInit + recovNew + migR;
          }
        },
        "solve_multipatch_volterra");
    for (std::size_t i = 0; i < L; ++i) {
      S[i] = x[i];
      I[i] = x[L + i];
      R[i] = x[2 * L + i];
      if (S[i] < -1e-6 || I[i] < -1e-6 || R[i] < -1e-6)
        throw NumericalError("solve_multipatch_volterra: patch mass went negative");
      sol.Sp[i][k] = S[i];
      sol.Ip[i][k] = I[i];
      sol.Rp[i][k] = R[i];
    }
    for (std::size_t i = 0; i < L; ++i) {
      ups[i][k] = upsilonAt(i, S, I, R);
      cumUps[i] += 0.5 * h * (prevUps[i] + ups[i][k]);
      double mS = migRate(p.net.nuS, S, i), mI = migRate(p.net.nuI, I, i),
             mR = migRate(p.net.nuR, R, i);
      cumMigS[i] += 0.5 * h * (prevMigS[i] + mS);
      cumMigI[i] += 0.5 * h * (prevMigI[i] + mI);
      cumMigR[i] += 0.5 * h * (prevMigR[i] + mR);
      prevUps[i] = ups[i][k];
      prevMigS[i] = mS;
      prevMigI[i] = mI;
      prevMigR[i] = mR;
    }
  }
  // aggregate curves for convenience
  sol.S.assign(n, 0.0);
  sol.I.assign(n, 0.0);
  sol.R.assign(n, 0.0);
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < L; ++i) {
      sol.S[k] += sol.Sp[i][k];
      sol.I[k] += sol.Ip[i][k];
      sol.R[k] += sol.Rp[i][k];
    }
  return sol;
}

}  // namespace epi
