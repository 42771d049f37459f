#pragma once
#include <cstdint>

#include "epi/infectivity.hpp"
#include "epi/laws.hpp"
#include "epi/mesh.hpp"
#include "epi/volterra.hpp"

namespace epi {

// integral of the mean infectivity discounted at rate rho,
// int_0^inf mean-lambda(t) e^{-rho t} dt; +inf when the tail diverges.
// Monte Carlo settings only matter for laws without a closed-form mean.
double discounted_kernel_integral(const InfectivityLaw& law, double rho,
                                  std::size_t mcSamples = 20000, std::uint64_t seed = 202);

// Exponential growth (or decay) rate of the early phase: the unique rho with
// int mean-lambda(t) e^{-rho t} dt = 1, found by expanding-bracket bisection.
double growth_rate(const InfectivityLaw& law, std::size_t mcSamples = 20000,
                   std::uint64_t seed = 202);

// Reproduction number recovered from the growth rate through the normalized
// kernel: (int gbar(t) e^{-rho t} dt)^{-1} with gbar = mean-lambda / R0.
double r0_from_rho(const InfectivityLaw& law, double rho, std::size_t mcSamples = 20000,
                   std::uint64_t seed = 202);

// The initial condition that makes the linearized epidemic exactly
// exponential: tilted mean infectivity and period survival of the already
// established exponential regime, with the infected/recovered split (i, r).
struct EarlyPhaseProfile {
  double rho = 0.0;
  Curve lambdaRho;  // tilted mean infectivity of the initially infected
  Curve FRhoC;      // tilted period survival of the initially infected
  double i = 0.0, r = 0.0;  // i + r = 1
};

EarlyPhaseProfile early_phase_profile(const InfectivityLaw& law, const DurationLaw& F, double rho,
                                      const TimeMesh& mesh, std::size_t mcSamples = 20000,
                                      std::uint64_t seed = 202);

struct MarkovEquilibrium {
  double S = 1.0, I = 0.0;
};

// Endemic equilibrium of the Markov families that admit one (SIS, SIRS,
// demography); the disease-free point when R0 <= 1.
MarkovEquilibrium markov_equilibria(MarkovFamily family, const MarkovParams& params);

// Population size below which endemic persistence fails,
// 9 / (eps^2 (1 - 1/R0)^2 R0) with eps = mu / (gamma + mu).
double critical_population_size(double r0, double gamma, double mu);

// Large-deviation cost of reaching the disease-free state from the endemic
// one in the Markov SIS model: log R0 - 1 + 1/R0.
double sis_quasipotential(double r0);

}  // namespace epi
