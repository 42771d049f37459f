#pragma once
#include <cstdint>
#include <optional>

#include "epi/infectivity.hpp"
#include "epi/laws.hpp"
#include "epi/mesh.hpp"
#include "epi/susceptibility.hpp"
#include "epi/volterra.hpp"

namespace epi {

// Mean-field limit of the model with random infectivity and post-recovery
// waning susceptibility: the pair (mean susceptibility, mean force) solves a
// coupled Volterra system whose kernels are expectations over the trajectory
// laws.
struct VivsProblem {
  InfectivityLaw infectivity = InfectivityLaw::zero();  // after each (re)infection
  std::optional<InfectivityLaw> infectivity0;           // initially infected
  SusceptibilityLaw susceptibility;

  // initial-state mixture: naive / infected / recovered fractions
  double S0 = 0.0, I0 = 0.0, R0 = 0.0;
  std::optional<DurationLaw> recoveredAge;  // elapsed recovery age of the R0 group

  // The trajectory expectations are averaged over a fixed panel of mcSamples
  // paired draws (common random numbers across Picard iterations), or, when
  // `quadrature` is set (deterministic waning profile only), integrated
  // against the period densities instead of sampled.
  std::size_t mcSamples = 1000;
  std::uint64_t seed = 123;
  bool quadrature = false;

  // Picard start for the mean force; empty means identically zero.
  std::optional<Curve> initialForceIterate;
};

struct VivsSolution {
  TimeMesh mesh;
  Curve susceptibility;  // mean susceptibility in the population
  Curve force;           // mean force of infection
  Curve S, I;            // susceptible / infected proportions
  std::size_t iterations = 0;
  double residual = 0.0;
};

VivsSolution solve_vivs_fixed_point(const VivsProblem& p, const TimeMesh& mesh);

}  // namespace epi
