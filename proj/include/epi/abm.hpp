#pragma once
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "epi/infectivity.hpp"
#include "epi/laws.hpp"
#include "epi/mesh.hpp"
#include "epi/susceptibility.hpp"
#include "epi/volterra.hpp"

namespace epi {

enum class AbmFamily {
  MarkovSir,
  MarkovSis,
  MarkovSirs,
  MarkovSirDemography,
  NonMarkovSir,
  NonMarkovSeir,
  VaryingInfectivity,
  VaryingSusceptibility,
  Multipatch,
};

std::string family_name(AbmFamily family);

// Individual-based stochastic model.  Only the fields relevant to the chosen
// family are read; validate() enforces the family-specific requirements.
struct ModelSpec {
  AbmFamily family = AbmFamily::MarkovSir;
  std::size_t N = 0;  // population scale

  double lambda = 0.0;  // infection rate (constant-infectivity families)
  double gamma = 0.0;   // recovery rate (Markov families)
  double rho = 0.0;     // immunity-loss rate (SIRS)
  double mu = 0.0;      // birth/death rate (demography)

  DurationLaw F = DurationLaw::exponential(1.0);  // infectious period (non-Markov)
  DurationLaw G = DurationLaw::exponential(1.0);  // exposed period (SEIR)
  std::optional<DurationLaw> F0;  // remaining infectious period, initially infected
  std::optional<DurationLaw> G0;  // remaining exposed period, initially exposed
  std::optional<AgeProfile> ageProfile;  // alternative initial condition:
                                         // infection ages of the initially infected

  InfectivityLaw infectivity = InfectivityLaw::zero();  // varying-infectivity families
  std::optional<InfectivityLaw> infectivity0;  // law for the initially infected
  SusceptibilityLaw susceptibility;            // varying-susceptibility family

  std::size_t S0 = 0, E0 = 0, I0 = 0, R0 = 0;  // initial counts

  PatchNetwork net;                    // multipatch family
  std::vector<std::size_t> S0p, I0p, R0p;  // per-patch initial counts

  // Optional per-capita dominating rate for the candidate stream of
  // aggregate-rate families (total candidate rate cap*N).  When set, the
  // candidate stream is independent of the model rates, so runs with
  // different lambda share their candidate times and marks.
  std::optional<double> dominatingRateCap;

  bool recordEvents = false;

  void validate() const;
  std::string describe() const;
};

struct AbmEvent {
  double t = 0.0;
  std::uint64_t id = 0;  // candidate/individual identifier
  char kind = '?';       // 'i' infection, 'r' recovery, 'e' end of latency,
                         // 'w' immunity loss, 'b' birth, 'd' death, 'm' migration
};

struct Trajectory {
  TimeMesh mesh;
  std::vector<long long> S, E, I, R;   // compartment counts per mesh time
  std::vector<long long> A;            // cumulative infection counter
  Curve force;                         // aggregate force of infection F^N(t)
  std::vector<std::vector<long long>> Sp, Ip, Rp;  // per-patch counts
  std::uint64_t seed = 0;
  std::string digest;  // spec digest; runs are a function of (digest, seed)
  std::vector<AbmEvent> events;  // populated when spec.recordEvents
};

Trajectory simulate(const ModelSpec& spec, double horizon, std::uint64_t seed,
                    const TimeMesh& recordMesh);

struct EnsembleStats {
  TimeMesh mesh;
  std::size_t replicates = 0;
  Curve meanS, varS, meanE, varE, meanI, varI, meanR, varR;
  Curve meanForce, varForce, meanA, varA;
};

// Independent runs, one per seed; mean and sample variance per mesh point
// (variance 0 for a single seed).  Deterministic given the seed list and
// invariant under reordering of it.
EnsembleStats replicate(const ModelSpec& spec, double horizon,
                        const std::vector<std::uint64_t>& seeds, const TimeMesh& recordMesh);

struct ExtinctionResult {
  double time = 0.0;
  bool censored = false;  // true when the run hit the cap before extinction
};

// First time I^N hits zero for the endemic-capable Markov SIS family.
ExtinctionResult extinction_time(const ModelSpec& spec, std::uint64_t seed, double cap);

}  // namespace epi
