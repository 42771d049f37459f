#pragma once
#include <functional>
#include <optional>
#include <vector>

#include "epi/laws.hpp"
#include "epi/linalg.hpp"
#include "epi/mesh.hpp"

namespace epi {

// Grid-sampled deterministic limit curves.  Curves not produced by a given
// solver are left empty.
struct LimitSolution {
  TimeMesh mesh;
  Curve S, E, I, R;
  Curve force;           // aggregate force of infection
  Curve susceptibility;  // population-average susceptibility (waning-immunity model)
  std::vector<Curve> Sp, Ip, Rp;  // per-patch curves
};

enum class MarkovFamily { SIR, SIS, SIRS, SIRDemography, SEIR };

struct MarkovParams {
  MarkovFamily family = MarkovFamily::SIR;
  double lambda = 0.0;  // infection rate
  double gamma = 0.0;   // recovery rate
  double rho = 0.0;     // immunity-loss rate (SIRS)
  double mu = 0.0;      // birth/death rate (demography)
  double nu = 0.0;      // exposed-to-infectious rate (SEIR)
  double S0 = 0.0, E0 = 0.0, I0 = 0.0, R0 = 0.0;
  std::function<double(double)> contactFactor;  // optional multiplier c(t), default 1
};

// RK4 integration of the Markov mean-field ODE systems.
LimitSolution solve_ode(const MarkovParams& params, const TimeMesh& mesh);

// Infection-age profile of the initially infected: density on ages
// [0, step*(values.size()-1)], trapezoid-integrating to the initial infected
// fraction.
struct AgeProfile {
  double step = 0.0;
  Curve density;
};

struct SirVolterraProblem {
  double lambda = 0.0;
  DurationLaw F = DurationLaw::exponential(1.0);   // infectious period of new infections
  std::optional<DurationLaw> F0;                   // remaining period of initially infected
  std::optional<AgeProfile> ageProfile;            // alternative initial condition
  double S0 = 0.0, I0 = 0.0, R0 = 0.0;
  std::function<double(double)> contactFactor;
};

LimitSolution solve_sir_volterra(const SirVolterraProblem& p, const TimeMesh& mesh);

struct ViVolterraProblem {
  Curve lambdaBar;        // mean infectivity kernel on the mesh
  Curve initialForce;     // force of infection exerted by the initially infected, on mesh
  Curve initialInfected;  // still-infected mass from the initially infected, on mesh
  DurationLaw F = DurationLaw::exponential(1.0);  // period law of new infections
  double S0 = 0.0, I0 = 0.0, R0 = 0.0;
  bool linearized = false;  // early-phase variant: susceptible fraction frozen at 1
  std::function<double(double)> contactFactor;
};

LimitSolution solve_vi_volterra(const ViVolterraProblem& p, const TimeMesh& mesh);

struct SeirVolterraProblem {
  double lambda = 0.0;
  DurationLaw G = DurationLaw::exponential(1.0);  // exposed period
  DurationLaw F = DurationLaw::exponential(1.0);  // infectious period
  std::optional<BivariateTable> joint;            // correlated (exposed, infectious); overrides G x F
  std::optional<DurationLaw> G0;                  // remaining exposed period, initially exposed
  std::optional<DurationLaw> F0;                  // remaining infectious period, initially infected
  double S0 = 0.0, E0 = 0.0, I0 = 0.0, R0 = 0.0;
  std::function<double(double)> contactFactor;
};

LimitSolution solve_seir_volterra(const SeirVolterraProblem& p, const TimeMesh& mesh);

struct PatchNetwork {
  std::size_t L = 1;
  std::vector<double> lambda;  // per-patch infection rates
  Matrix kappa;                // distance-infectivity weights, kappa_ii = 1
  double gammaExponent = 0.0;  // exponent of the patch-population denominator
  Matrix nuS, nuI, nuR;        // migration rate matrices (off-diagonal >= 0)

  void validate() const;
};

struct MultipatchProblem {
  PatchNetwork net;
  DurationLaw F = DurationLaw::exponential(1.0);
  std::optional<DurationLaw> F0;
  std::vector<double> S0, I0, R0;  // per-patch fractions of the total population
};

LimitSolution solve_multipatch_volterra(const MultipatchProblem& p, const TimeMesh& mesh);

// p_{l,i}(t): location law of an infected individual, from the migration
// generator of nuI, evaluated on the mesh (index [n] -> L x L matrix).
std::vector<Matrix> migration_location_laws(const PatchNetwork& net, const TimeMesh& mesh);

// Helper for the alternative initial condition of the infectivity model:
// force exerted at time t by individuals with infection-age profile `prof`,
// integral of lambdaBar(y + t) over the profile.
Curve initial_force_from_age_profile(const std::function<double(double)>& lambdaBarFn,
                                     const AgeProfile& prof, const TimeMesh& mesh);
// Still-infected mass at time t from the age profile, integral of
// F^c(t+y)/F^c(y) over the profile.
Curve initial_mass_from_age_profile(const DurationLaw& F, const AgeProfile& prof,
                                    const TimeMesh& mesh);

}  // namespace epi
