#include "epi/susceptibility.hpp"

#include <sstream>

#include "epi/rng.hpp"

namespace epi {

SusceptibilityLaw SusceptibilityLaw::pureSIR() {
  SusceptibilityLaw law;
  law.zero_ = true;
  return law;
}

SusceptibilityLaw SusceptibilityLaw::deterministicWaning(KnotCurve g) {
  for (auto& [t, v] : g.knots)
    if (v < 0.0 || v > 1.0)
      throw ValidationError("waning profile: values must stay in [0,1]");
  SusceptibilityLaw law;
  law.zero_ = false;
  law.g_ = std::move(g);
  return law;
}

KnotCurve SusceptibilityLaw::sample_paired(std::mt19937_64& /*rng*/, double eta) const {
  if (zero_ || g_.knots.empty()) return KnotCurve::zero();
  KnotCurve out;
  out.interp = g_.interp;
  out.knots.reserve(g_.knots.size() + 1);
  // shift the profile by eta; insert an explicit zero knot at eta when the
  // profile starts positive, so the curve is 0 before recovery
  if (g_.knots.front().second != 0.0 || g_.knots.front().first > 0.0)
    out.knots.emplace_back(eta, 0.0);
  for (auto& [t, v] : g_.knots) {
    double ts = t + eta;
    if (!out.knots.empty() && ts <= out.knots.back().first) ts = out.knots.back().first + 1e-12;
    out.knots.emplace_back(ts, v);
  }
  return out;
}

KnotCurve SusceptibilityLaw::profile() const {
  if (zero_) return KnotCurve::zero();
  return g_;
}

std::string SusceptibilityLaw::describe() const {
  if (zero_) return "zero";
  std::ostringstream os;
  os << "deterministic-waning(" << (g_.interp == KnotCurve::Interp::Linear ? "linear" : "step");
  for (auto& [t, v] : g_.knots) os << ";" << t << ":" << v;
  os << ")";
  return os.str();
}

Curve mean_curve(const SusceptibilityLaw& law, const InfectivityLaw& paired, const TimeMesh& mesh,
                 std::size_t samples, std::uint64_t seed) {
  if (samples == 0) throw ValidationError("mean_curve: samples must be >= 1");
  StreamFamily streams(seed);
  Curve acc(mesh.size(), 0.0);
  for (std::size_t s = 0; s < samples; ++s) {
    auto rng = streams.stream("mean-gamma", s);
    KnotCurve lam = paired.sample(rng);
    double eta = lam.active_end();
    KnotCurve gam = law.sample_paired(rng, eta);
    if (gam.knots.empty()) continue;
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += gam.value(mesh.time(i));
  }
  for (double& v : acc) v /= static_cast<double>(samples);
  return acc;
}

}  // namespace epi
