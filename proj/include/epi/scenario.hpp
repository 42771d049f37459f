#pragma once
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "epi/abm.hpp"
#include "epi/infectivity.hpp"
#include "epi/laws.hpp"
#include "epi/susceptibility.hpp"

namespace epi {

// Declarative duration-law description as it appears in scenario files.
struct LawSpec {
  std::string type;            // exponential | deterministic | gamma | uniform |
                               // betaShifted | empirical
  std::vector<double> params;  // positional parameters of the law
  std::vector<std::pair<double, double>> table;  // empirical atoms

  DurationLaw build() const;
};

struct InfectivitySpec {
  std::string type = "zero";  // zero | classical | covid
  double lambda = 0.0;        // classical scale
  std::optional<LawSpec> period;
  double alpha = 0.5, pReported = 0.5;  // covid profile parameters

  InfectivityLaw build() const;
};

struct SusceptibilitySpec {
  std::string type = "pureSIR";  // pureSIR | waning
  std::string interp = "linear";  // linear | step
  std::vector<std::pair<double, double>> knots;

  SusceptibilityLaw build() const;
};

// Default lockdown-comparison scenario; the contact rate drops to
// contactFactor at interventionDay, and both model families are calibrated to
// the same pre-intervention growth rate rho0.
struct CompareSpec {
  double interventionDay = 28.0;
  double contactFactor = 0.4;
  double rho0 = 0.25;
  double meanExposed = 3.0;
  double meanInfectious = 4.0;
  bool identical = false;  // run the Markov model on both sides (zero gap)
};

struct PdeSpec {
  std::string mode = "depletion";  // depletion | sis
  double ageMax = 10.0;
  double r0 = 2.0;  // SIS mode reproduction number
};

struct VivsSpec {
  std::size_t mcSamples = 500;
  bool quadrature = false;
  std::optional<LawSpec> recoveredAge;
};

struct ScenarioConfig {
  std::string experiment;  // simulate | solve | converge | fluctuations |
                           // pde | analytics | vivs | compare
  std::string family = "markov-sir";
  std::size_t N = 1000;
  double horizon = 10.0;
  double meshStep = 0.05;
  std::uint64_t seed = 1;
  std::size_t replicates = 1;
  std::string outDir = "out";

  double lambda = 0.0, gamma = 0.0, rho = 0.0, mu = 0.0, nu = 0.0;
  double S0 = 0.0, E0 = 0.0, I0 = 0.0, R0 = 0.0;  // fractions

  std::optional<LawSpec> F, G, F0, G0;
  std::optional<InfectivitySpec> infectivity, infectivity0;
  std::optional<SusceptibilitySpec> susceptibility;
  std::optional<CompareSpec> compare;
  std::optional<PdeSpec> pde;
  std::optional<VivsSpec> vivs;

  static ScenarioConfig parse_string(const std::string& text);
  static ScenarioConfig parse_file(const std::string& path);

  // canonical serialized form; parse(canonical()) reproduces the config
  std::string canonical() const;
  // FNV-1a hex digest of the canonical form, embedded in output headers
  std::string digest() const;

  void validate() const;

  // individual-based model of this scenario (simulate/converge/fluctuations)
  ModelSpec build_model() const;
};

}  // namespace epi
