#pragma once
#include <optional>
#include <random>
#include <string>

#include "epi/infectivity.hpp"
#include "epi/laws.hpp"

namespace epi {

// Generator of post-infection susceptibility trajectories gamma(.) in [0,1],
// paired with an infectivity draw: gamma is 0 while the individual is still
// infectious (t < eta) and follows the waning profile afterwards.
class SusceptibilityLaw {
 public:
  // gamma identically 0 after infection: no reinfection (plain SIR behavior).
  static SusceptibilityLaw pureSIR();
  // gamma(t) = g(t - eta) with a deterministic profile g (g = 0 on negatives).
  // g is a knot curve; its value is held constant after its last knot.
  static SusceptibilityLaw deterministicWaning(KnotCurve g);

  // The susceptibility trajectory paired to an infectivity draw whose active
  // period ends at eta, as a function of time since infection.
  KnotCurve sample_paired(std::mt19937_64& rng, double eta) const;
  // Susceptibility as a function of time since recovery (the profile g).
  KnotCurve profile() const;

  bool is_zero() const { return zero_; }
  std::string describe() const;

 private:
  bool zero_ = true;
  KnotCurve g_;
};

// Monte Carlo mean of paired gamma trajectories (eta drawn from the paired
// infectivity law); deterministic given the seed.
Curve mean_curve(const SusceptibilityLaw& law, const InfectivityLaw& paired, const TimeMesh& mesh,
                 std::size_t samples, std::uint64_t seed);

}  // namespace epi
