#include "epi/fclt.hpp"

#include <cmath>

#include "epi/errors.hpp"
#include "epi/rng.hpp"
#include "volterra_detail.hpp"

namespace epi {

namespace {

// Monte Carlo panel statistics of an infectivity law on the mesh.
struct Panel {
  Curve mean;
  Matrix cov;
};

Panel trajectory_panel(const InfectivityLaw& law, const TimeMesh& mesh, std::size_t panelSize,
                       std::uint64_t panelSeed) {
  const std::size_t n = mesh.size();
  Panel p;
  p.mean.assign(n, 0.0);
  Matrix second(n, n, 0.0);
  StreamFamily fam(panelSeed);
  std::vector<double> vals(n);
  for (std::size_t s = 0; s < panelSize; ++s) {
    auto rng = fam.stream("panel", s);
    KnotCurve c = law.sample(rng);
    for (std::size_t i = 0; i < n; ++i) vals[i] = c.value(mesh.time(i));
    for (std::size_t i = 0; i < n; ++i) {
      p.mean[i] += vals[i];
      for (std::size_t j = i; j < n; ++j) second(i, j) += vals[i] * vals[j];
    }
  }
  double m = static_cast<double>(panelSize);
  for (std::size_t i = 0; i < n; ++i) p.mean[i] /= m;
  p.cov = Matrix(n, n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) {
      double c = second(i, j) / m - p.mean[i] * p.mean[j];
      p.cov(i, j) = c;
      p.cov(j, i) = c;
    }
  return p;
}

}  // namespace

double GaussianDriverSpec::covariance(std::size_t driverA, std::size_t i, std::size_t driverB,
                                      std::size_t j) const {
  const std::size_t n = mesh.size();
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const auto& blk = blocks[b];
    std::size_t la = blk.size(), lb = blk.size();
    for (std::size_t k = 0; k < blk.size(); ++k) {
      if (blk[k] == driverA) la = k;
      if (blk[k] == driverB) lb = k;
    }
    if (la < blk.size() && lb < blk.size())
      return blockCov[b](la * n + i, lb * n + j);
    if (la < blk.size() || lb < blk.size()) return 0.0;  // different blocks
  }
  throw ValidationError("driver covariance: unknown driver index");
}

GaussianDriverSpec driver_covariances(const FcltProblem& problem, const LimitSolution& limit) {
  const TimeMesh& mesh = limit.mesh;
  const std::size_t n = mesh.size();
  const double h = mesh.step;
  if (limit.S.size() != n || limit.I.size() != n)
    throw ValidationError("driver covariances: limit curves must live on the mesh");

  GaussianDriverSpec spec;
  spec.mesh = mesh;
  spec.model = problem.model;
  spec.Sbar = limit.S;
  spec.Ibar = limit.I;
  spec.forceBar = limit.force;
  spec.I0 = limit.I[0];
  spec.lambda = problem.lambda;
  spec.F = problem.model == FcltModel::MarkovSir ? DurationLaw::exponential(problem.gamma)
                                                 : problem.F;
  spec.F0 = problem.model == FcltModel::MarkovSir ? DurationLaw::exponential(problem.gamma)
                                                  : problem.F0;

  // intensity of the infection point process against which the displayed
  // integrals are taken
  Curve psi(n);
  if (problem.model == FcltModel::VaryingInfectivity) {
    if (limit.force.size() != n)
      throw ValidationError("driver covariances: the limit force curve is required");
    for (std::size_t k = 0; k < n; ++k) psi[k] = limit.S[k] * limit.force[k];
  } else {
    for (std::size_t k = 0; k < n; ++k) psi[k] = problem.lambda * limit.S[k] * limit.I[k];
  }
  Curve cumPsi = cumulative_trapezoid(psi, h);

  // T(m, k, kernel) = int_0^{t_m} kernel(t_k - s) psi(s) ds
  auto quad = [&](std::size_t m, auto&& f) {
    if (m == 0) return 0.0;
    double acc = 0.5 * (f(0) * psi[0] + f(m) * psi[m]);
    for (std::size_t l = 1; l < m; ++l) acc += f(l) * psi[l];
    return acc * h;
  };

  if (problem.model == FcltModel::VaryingInfectivity) {
    spec.names = {"F0hat", "F1hat", "F2hat", "MA"};
    spec.blocks = {{0}, {1}, {2, 3}};
    auto analytic = problem.infectivity.analytic_mean(mesh);
    Panel panel = trajectory_panel(problem.infectivity, mesh, problem.panelSize, problem.panelSeed);
    spec.lambdaBar = analytic ? *analytic : panel.mean;
    const InfectivityLaw& law0 = problem.infectivity0 ? *problem.infectivity0 : problem.infectivity;
    Panel panel0 = problem.infectivity0
                       ? trajectory_panel(law0, mesh, problem.panelSize, problem.panelSeed + 1)
                       : panel;
    const Curve& lam = spec.lambdaBar;

    Matrix f0(n, n), f1(n, n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        f0(i, j) = spec.I0 * panel0.cov(i, j);
        std::size_t m = std::min(i, j);
        f1(i, j) = quad(m, [&](std::size_t l) { return panel.cov(i - l, j - l); });
      }
    Matrix joint(2 * n, 2 * n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        std::size_t m = std::min(i, j);
        joint(i, j) = quad(m, [&](std::size_t l) { return lam[i - l] * lam[j - l]; });
        joint(n + i, n + j) = cumPsi[m];
        double maF2 = quad(m, [&](std::size_t l) { return lam[j - l]; });
        joint(n + i, j) = maF2;  // Cov(MA(t_i), F2(t_j))
        joint(i, n + j) = quad(m, [&](std::size_t l) { return lam[i - l]; });
      }
    spec.blockCov = {std::move(f0), std::move(f1), std::move(joint)};
    return spec;
  }

  spec.names = {"MA", "I0hat", "R0hat", "I1hat", "R1hat"};
  spec.blocks = {{1, 2}, {0, 3, 4}};
  Curve Fc(n), Fcdf(n), F0c(n), F0cdf(n);
  for (std::size_t k = 0; k < n; ++k) {
    Fc[k] = spec.F.survival(mesh.time(k));
    Fcdf[k] = 1.0 - Fc[k];
    F0c[k] = spec.F0.survival(mesh.time(k));
    F0cdf[k] = 1.0 - F0c[k];
  }
  double i0 = spec.I0;

  Matrix init(2 * n, 2 * n);  // (I0hat, R0hat)
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      init(i, j) = i0 * (F0c[std::max(i, j)] - F0c[i] * F0c[j]);
      init(n + i, n + j) = i0 * (F0cdf[std::min(i, j)] - F0cdf[i] * F0cdf[j]);
      double c = i0 * ((j >= i ? F0cdf[j] - F0cdf[i] : 0.0) - F0c[i] * F0cdf[j]);
      init(i, n + j) = c;  // Cov(I0hat(t_i), R0hat(t_j))
      init(n + j, i) = c;
    }

  Matrix mart(3 * n, 3 * n);  // (MA, I1hat, R1hat)
  auto T = [&](std::size_t m, std::size_t k, const Curve& kern) {
    return quad(m, [&](std::size_t l) { return kern[k - l]; });
  };
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      std::size_t m = std::min(i, j);
      mart(i, j) = cumPsi[m];
      mart(n + i, n + j) = T(m, std::max(i, j), Fc);
      mart(2 * n + i, 2 * n + j) = T(m, m, Fcdf);
      double maI1 = T(m, j, Fc);
      mart(i, n + j) = maI1;
      mart(n + j, i) = maI1;
      double maR1 = T(m, j, Fcdf);
      mart(i, 2 * n + j) = maR1;
      mart(2 * n + j, i) = maR1;
      double i1r1 = j > i ? T(i, j, Fcdf) - T(i, i, Fcdf) : 0.0;
      mart(n + i, 2 * n + j) = i1r1;
      mart(2 * n + j, n + i) = i1r1;
    }
  spec.blockCov = {std::move(init), std::move(mart)};
  return spec;
}

std::vector<std::vector<Curve>> sample_driver_paths(const GaussianDriverSpec& spec,
                                                    std::size_t nPaths, std::uint64_t seed) {
  const std::size_t n = spec.mesh.size();
  std::vector<Matrix> factors;
  factors.reserve(spec.blockCov.size());
  for (const auto& c : spec.blockCov) factors.push_back(cholesky_psd(c, 1e-8));

  StreamFamily fam(seed);
  std::vector<std::vector<Curve>> out(nPaths);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (std::size_t p = 0; p < nPaths; ++p) {
    auto rng = fam.stream("gauss", p);
    out[p].assign(spec.names.size(), Curve(n, 0.0));
    for (std::size_t b = 0; b < spec.blocks.size(); ++b) {
      const Matrix& L = factors[b];
      std::vector<double> z(L.rows), x(L.rows, 0.0);
      for (double& v : z) v = gauss(rng);
      for (std::size_t r = 0; r < L.rows; ++r) {
        double acc = 0.0;
        for (std::size_t c = 0; c <= r; ++c) acc += L(r, c) * z[c];
        x[r] = acc;
      }
      for (std::size_t k = 0; k < spec.blocks[b].size(); ++k) {
        std::size_t d = spec.blocks[b][k];
        for (std::size_t i = 0; i < n; ++i) out[p][d][i] = x[k * n + i];
      }
    }
  }
  return out;
}

std::vector<Curve> solve_fluctuation_path(const GaussianDriverSpec& spec,
                                          const std::vector<Curve>& drivers) {
  const std::size_t n = spec.mesh.size();
  const double h = spec.mesh.step;
  if (drivers.size() != spec.names.size())
    throw ValidationError("fluctuation path: driver count mismatch");

  if (spec.model == FcltModel::VaryingInfectivity) {
    const Curve &F0d = drivers[0], &F1d = drivers[1], &F2d = drivers[2], &MA = drivers[3];
    detail::KernelSamples lamK{spec.lambdaBar, spec.lambdaBar};
    Curve S(n, 0.0), F(n, 0.0), ups(n, 0.0);
    S[0] = -MA[0];
    F[0] = F0d[0] + F1d[0] + F2d[0];
    ups[0] = S[0] * spec.forceBar[0] + spec.Sbar[0] * F[0];
    double cumU = 0.0;
    for (std::size_t k = 1; k < n; ++k) {
      double hist = detail::convolve_history(lamK, ups, k, h);
      std::vector<double> x{S[k - 1], F[k - 1]};
      detail::damped_fixed_point(
          x,
          [&](const std::vector<double>& cur, std::vector<double>& next) {
            double u = cur[0] * spec.forceBar[k] + spec.Sbar[k] * cur[1];
            next[0] = -(cumU + 0.5 * h * (ups[k - 1] + u)) - MA[k];
            next[1] = F0d[k] + F1d[k] + F2d[k] + hist + 0.5 * h * lamK.right[0] * u;
          },
          "fluctuation step");
      S[k] = x[0];
      F[k] = x[1];
      ups[k] = S[k] * spec.forceBar[k] + spec.Sbar[k] * F[k];
      cumU += 0.5 * h * (ups[k - 1] + ups[k]);
    }
    return {S, F};
  }

  const Curve &MA = drivers[0], &I0d = drivers[1], &I1drv = drivers[3];
  detail::KernelSamples Fc = detail::survival_kernel(spec.F, spec.mesh);
  Curve S(n, 0.0), I(n, 0.0), R(n, 0.0), u(n, 0.0);
  S[0] = -MA[0];
  I[0] = I0d[0] + I1drv[0];
  u[0] = spec.lambda * (S[0] * spec.Ibar[0] + spec.Sbar[0] * I[0]);
  double cumU = 0.0;
  for (std::size_t k = 1; k < n; ++k) {
    double hist = detail::convolve_history(Fc, u, k, h);
    std::vector<double> x{S[k - 1], I[k - 1]};
    detail::damped_fixed_point(
        x,
        [&](const std::vector<double>& cur, std::vector<double>& next) {
          double uk = spec.lambda * (cur[0] * spec.Ibar[k] + spec.Sbar[k] * cur[1]);
          next[0] = -(cumU + 0.5 * h * (u[k - 1] + uk)) - MA[k];
          next[1] = hist + 0.5 * h * Fc.right[0] * uk + I0d[k] + I1drv[k];
        },
        "fluctuation step");
    S[k] = x[0];
    I[k] = x[1];
    u[k] = spec.lambda * (S[k] * spec.Ibar[k] + spec.Sbar[k] * I[k]);
    cumU += 0.5 * h * (u[k - 1] + u[k]);
    R[k] = -S[k] - I[k];  // fixed population: fluctuations sum to zero
  }
  return {S, I, R};
}

FluctuationEnsemble sample_fluctuations(const GaussianDriverSpec& spec, std::size_t nPaths,
                                        std::uint64_t seed, bool keepPaths) {
  if (nPaths == 0) throw ValidationError("sample_fluctuations: need at least one path");
  const std::size_t n = spec.mesh.size();
  FluctuationEnsemble out;
  out.mesh = spec.mesh;
  out.components = spec.model == FcltModel::VaryingInfectivity
                       ? std::vector<std::string>{"S", "F"}
                       : std::vector<std::string>{"S", "I", "R"};
  const std::size_t nc = out.components.size();
  std::vector<Curve> sums(nc, Curve(n, 0.0)), sq(nc, Curve(n, 0.0));

  auto driverPaths = sample_driver_paths(spec, nPaths, seed);
  for (std::size_t p = 0; p < nPaths; ++p) {
    auto comps = solve_fluctuation_path(spec, driverPaths[p]);
    for (std::size_t c = 0; c < nc; ++c)
      for (std::size_t k = 0; k < n; ++k) {
        sums[c][k] += comps[c][k];
        sq[c][k] += comps[c][k] * comps[c][k];
      }
    if (keepPaths) out.paths.push_back(std::move(comps));
  }
  double m = static_cast<double>(nPaths);
  out.mean.assign(nc, Curve(n, 0.0));
  out.variance.assign(nc, Curve(n, 0.0));
  for (std::size_t c = 0; c < nc; ++c)
    for (std::size_t k = 0; k < n; ++k) {
      out.mean[c][k] = sums[c][k] / m;
      if (nPaths > 1)
        out.variance[c][k] =
            std::max(0.0, (sq[c][k] - m * out.mean[c][k] * out.mean[c][k]) / (m - 1.0));
    }
  return out;
}

PoissonCltResult poisson_clt_check(double scaleN, const TimeMesh& mesh, std::size_t nPaths,
                                   std::uint64_t seed) {
  if (scaleN <= 0.0) throw ValidationError("poisson_clt_check: scale must be positive");
  if (nPaths < 2) throw ValidationError("poisson_clt_check: need at least two paths");
  const std::size_t n = mesh.size();
  const double h = mesh.step;
  PoissonCltResult out;
  out.mesh = mesh;
  out.paths.assign(nPaths, Curve(n, 0.0));
  StreamFamily fam(seed);
  std::poisson_distribution<long long> pois(scaleN * h);
  for (std::size_t p = 0; p < nPaths; ++p) {
    auto rng = fam.stream("poisson", p);
    long long count = 0;
    for (std::size_t k = 1; k < n; ++k) {
      count += pois(rng);
      out.paths[p][k] = (static_cast<double>(count) - scaleN * mesh.time(k)) / std::sqrt(scaleN);
    }
  }
  out.variance.assign(n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    double s = 0.0, s2 = 0.0;
    for (std::size_t p = 0; p < nPaths; ++p) {
      s += out.paths[p][k];
      s2 += out.paths[p][k] * out.paths[p][k];
    }
    double mean = s / static_cast<double>(nPaths);
    out.variance[k] = std::max(
        0.0, (s2 - static_cast<double>(nPaths) * mean * mean) / (static_cast<double>(nPaths) - 1.0));
  }
  return out;
}

}  // namespace epi
