#pragma once
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "epi/infectivity.hpp"
#include "epi/laws.hpp"
#include "epi/linalg.hpp"
#include "epi/mesh.hpp"
#include "epi/volterra.hpp"

namespace epi {

enum class FcltModel { MarkovSir, NonMarkovSir, VaryingInfectivity };

// Model inputs for the Gaussian fluctuation limit.
struct FcltProblem {
  FcltModel model = FcltModel::MarkovSir;
  double lambda = 0.0;  // infection rate (constant-infectivity models)
  double gamma = 0.0;   // recovery rate (Markov model)
  DurationLaw F = DurationLaw::exponential(1.0);
  DurationLaw F0 = DurationLaw::exponential(1.0);
  InfectivityLaw infectivity = InfectivityLaw::zero();  // varying-infectivity model
  std::optional<InfectivityLaw> infectivity0;
  std::size_t panelSize = 10000;  // trajectory panel for infectivity covariances
  std::uint64_t panelSeed = 777;
};

// Named centered Gaussian drivers on the mesh with their joint covariance,
// organized in independence blocks (cross-block covariances are exactly 0).
struct GaussianDriverSpec {
  TimeMesh mesh;
  FcltModel model = FcltModel::MarkovSir;
  std::vector<std::string> names;
  std::vector<std::vector<std::size_t>> blocks;  // indices into names
  std::vector<Matrix> blockCov;  // joint covariance per block, time-major per driver

  // limit curves and kernels needed by the linear fluctuation solver
  Curve Sbar, Ibar, forceBar;
  Curve lambdaBar;  // mean infectivity kernel (varying-infectivity model)
  double lambda = 0.0;
  double I0 = 0.0;
  DurationLaw F = DurationLaw::exponential(1.0);
  DurationLaw F0 = DurationLaw::exponential(1.0);

  // covariance of two drivers at two mesh indices (0 across blocks)
  double covariance(std::size_t driverA, std::size_t i, std::size_t driverB, std::size_t j) const;
};

// Evaluates the covariance integrals of the Gaussian fluctuation limit by
// trapezoid quadrature against the limit curves; infectivity-trajectory
// covariances come from a fixed Monte Carlo panel of the law.
GaussianDriverSpec driver_covariances(const FcltProblem& problem, const LimitSolution& limit);

// Joint Gaussian driver paths: result[p][d] is driver d of path p.
std::vector<std::vector<Curve>> sample_driver_paths(const GaussianDriverSpec& spec,
                                                    std::size_t nPaths, std::uint64_t seed);

// Solves the linear fluctuation Volterra system for one set of driver paths.
// Components: (S, I, R) for the SIR models, (S, F) for varying infectivity.
std::vector<Curve> solve_fluctuation_path(const GaussianDriverSpec& spec,
                                          const std::vector<Curve>& drivers);

struct FluctuationEnsemble {
  TimeMesh mesh;
  std::vector<std::string> components;
  std::vector<Curve> mean, variance;          // per component
  std::vector<std::vector<Curve>> paths;      // kept when keepPaths
};

FluctuationEnsemble sample_fluctuations(const GaussianDriverSpec& spec, std::size_t nPaths,
                                        std::uint64_t seed, bool keepPaths = false);

struct PoissonCltResult {
  TimeMesh mesh;
  Curve variance;                 // empirical variance of (P(Nt) - Nt)/sqrt(N)
  std::vector<Curve> paths;
};

PoissonCltResult poisson_clt_check(double scaleN, const TimeMesh& mesh, std::size_t nPaths,
                                   std::uint64_t seed);

}  // namespace epi
