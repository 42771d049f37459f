#include "epi/infectivity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <sstream>

#include "epi/rng.hpp"

namespace epi {
namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

double KnotCurve::value(double t) const {
  if (knots.empty() || t < knots.front().first) return 0.0;
  if (t >= knots.back().first) return knots.back().second;
  // knots are few (<= 4); linear scan
  std::size_t i = 0;
  while (i + 1 < knots.size() && knots[i + 1].first <= t) ++i;
  if (interp == Interp::StepRight) return knots[i].second;
  auto [t0, v0] = knots[i];
  auto [t1, v1] = knots[i + 1];
  return v0 + (v1 - v0) * (t - t0) / (t1 - t0);
}

double KnotCurve::active_end() const {
  if (knots.empty()) return 0.0;
  if (knots.back().second != 0.0) return kInf;
  // walk back over the trailing zero plateau
  std::size_t i = knots.size() - 1;
  while (i > 0 && knots[i - 1].second == 0.0) --i;
  if (i == 0) return 0.0;  // identically zero
  return knots[i].first;
}

double KnotCurve::max_value() const {
  double m = 0.0;
  for (auto& [t, v] : knots) m = std::max(m, v);
  return m;
}

KnotCurve KnotCurve::zero() { return KnotCurve{Interp::StepRight, {}}; }

KnotCurve KnotCurve::constantUntil(double level, double end) {
  if (end <= 0.0) return zero();
  return KnotCurve{Interp::StepRight, {{0.0, level}, {end, 0.0}}};
}

struct InfectivityLaw::Impl {
  enum class Kind { Zero, Classical, Covid };
  Kind kind = Kind::Zero;
  double lambda = 0.0;
  DurationLaw period = DurationLaw::deterministic(0.0);
  double alpha = 1.0;
  double pReported = 1.0;
};

InfectivityLaw InfectivityLaw::classical(double lambda, DurationLaw period) {
  if (!(lambda >= 0.0)) throw ValidationError("classical infectivity: lambda must be >= 0");
  auto impl = std::make_shared<Impl>();
  impl->kind = Impl::Kind::Classical;
  impl->lambda = lambda;
  impl->period = period;
  InfectivityLaw law;
  law.impl_ = impl;
  return law;
}

InfectivityLaw InfectivityLaw::covidProfile(double alpha, double pReported) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw ValidationError("covid profile: alpha in (0,1]");
  if (!(pReported >= 0.0 && pReported <= 1.0))
    throw ValidationError("covid profile: reported probability in [0,1]");
  auto impl = std::make_shared<Impl>();
  impl->kind = Impl::Kind::Covid;
  impl->alpha = alpha;
  impl->pReported = pReported;
  InfectivityLaw law;
  law.impl_ = impl;
  return law;
}

InfectivityLaw InfectivityLaw::zero() {
  auto impl = std::make_shared<Impl>();
  impl->kind = Impl::Kind::Zero;
  InfectivityLaw law;
  law.impl_ = impl;
  return law;
}

KnotCurve InfectivityLaw::sample(std::mt19937_64& rng) const {
  switch (impl_->kind) {
    case Impl::Kind::Zero:
      return KnotCurve::zero();
    case Impl::Kind::Classical: {
      double eta = impl_->period.sample(rng);
      return KnotCurve::constantUntil(impl_->lambda, eta);
    }
    case Impl::Kind::Covid: {
      // draw order fixed: reporting flag, X1 (onset), X2 (duration)
      double uRep = uniform01(rng);
      double x1 = beta22_quantile(uniform01(rng));
      double x2 = beta22_quantile(uniform01(rng));
      bool reported = uRep < impl_->pReported;
      double zeta = 2.0 + 2.0 * x1;
      double eta = reported ? 3.0 + x2 : 8.0 + 4.0 * x2;
      double peak = reported ? 1.0 : impl_->alpha;
      KnotCurve c;
      c.interp = KnotCurve::Interp::Linear;
      c.knots = {{zeta, 0.0}, {zeta + eta / 5.0, peak}, {zeta + eta, 0.0}};
      return c;
    }
  }
  return KnotCurve::zero();
}

double InfectivityLaw::lambda_star() const {
  switch (impl_->kind) {
    case Impl::Kind::Zero:
      return 0.0;
    case Impl::Kind::Classical:
      return impl_->lambda;
    case Impl::Kind::Covid:
      return 1.0;
  }
  return 0.0;
}

double InfectivityLaw::period_bound() const {
  switch (impl_->kind) {
    case Impl::Kind::Zero:
      return 0.0;
    case Impl::Kind::Classical:
      return impl_->period.support_upper();
    case Impl::Kind::Covid: {
      double etaMax = impl_->pReported >= 1.0 ? 4.0 : 12.0;
      return 4.0 + etaMax;
    }
  }
  return 0.0;
}

std::optional<Curve> InfectivityLaw::analytic_mean(const TimeMesh& mesh) const {
  if (impl_->kind == Impl::Kind::Zero) return Curve(mesh.size(), 0.0);
  if (impl_->kind != Impl::Kind::Classical) return std::nullopt;
  Curve out(mesh.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = impl_->lambda * impl_->period.survival(mesh.time(i));
  return out;
}

std::optional<DurationLaw> InfectivityLaw::period_law() const {
  if (impl_->kind == Impl::Kind::Classical && impl_->lambda > 0.0) return impl_->period;
  if (impl_->kind == Impl::Kind::Zero) return DurationLaw::deterministic(0.0);
  return std::nullopt;
}

std::string InfectivityLaw::describe() const {
  std::ostringstream os;
  switch (impl_->kind) {
    case Impl::Kind::Zero:
      os << "zero";
      break;
    case Impl::Kind::Classical:
      os << "classical(lambda=" << impl_->lambda << ",period=" << impl_->period.describe() << ")";
      break;
    case Impl::Kind::Covid:
      os << "covid-profile(alpha=" << impl_->alpha << ",p-reported=" << impl_->pReported << ")";
      break;
  }
  return os.str();
}

namespace {
std::mutex g_meanCacheMutex;
std::map<std::string, Curve> g_meanCache;  // key -> cached mean curve
}  // namespace

Curve mean_curve(const InfectivityLaw& law, const TimeMesh& mesh, std::size_t samples,
                 std::uint64_t seed) {
  if (samples == 0) throw ValidationError("mean_curve: samples must be >= 1");
  std::ostringstream key;
  key << law.describe() << "|T=" << mesh.horizon << "|h=" << mesh.step << "|n=" << samples
      << "|seed=" << seed;
  {
    std::lock_guard<std::mutex> lock(g_meanCacheMutex);
    auto it = g_meanCache.find(key.str());
    if (it != g_meanCache.end()) return it->second;
  }
  StreamFamily streams(seed);
  Curve acc(mesh.size(), 0.0);
  for (std::size_t s = 0; s < samples; ++s) {
    auto rng = streams.stream("mean-curve", s);
    KnotCurve traj = law.sample(rng);
    if (traj.knots.empty()) continue;
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += traj.value(mesh.time(i));
  }
  for (double& v : acc) v /= static_cast<double>(samples);
  std::lock_guard<std::mutex> lock(g_meanCacheMutex);
  g_meanCache.emplace(key.str(), acc);
  return acc;
}

double truncation_horizon(const InfectivityLaw& law) {
  const double cap = 1e4;
  double bound = law.period_bound();
  if (std::isfinite(bound)) return std::max(bound, 1e-6);
  auto periodLaw = law.period_law();
  if (!periodLaw)
    throw NumericalError("truncation horizon: unbounded law without a known period law");
  // smallest T with lambda-bar(T) < 1e-12 and F^c(T) < 1e-12
  double lam = std::max(law.lambda_star(), 1.0);
  double t1 = periodLaw->quantile(1.0 - 1e-12 / lam);
  double t2 = periodLaw->quantile(1.0 - 1e-12);
  double horizon = std::max(t1, t2);
  if (horizon > cap) {
    if (periodLaw->survival(cap) >= 1e-12)
      throw NumericalError("truncation horizon: tail mass beyond cap exceeds tolerance");
    horizon = cap;
  }
  return horizon;
}

double basic_reproduction_number(const InfectivityLaw& law, std::size_t samples,
                                 std::uint64_t seed) {
  if (law.lambda_star() == 0.0) return 0.0;
  if (auto periodLaw = law.period_law()) {
    // constant-level law: the integral of lambda * F^c is lambda * E[eta],
    // exact even when the period law has atoms
    return law.lambda_star() * periodLaw->mean();
  }
  double horizon = truncation_horizon(law);
  double step = horizon / std::ceil(horizon / 1e-3);
  TimeMesh mesh(horizon, step);
  auto analytic = law.analytic_mean(mesh);
  Curve lbar = analytic ? *analytic : mean_curve(law, mesh, samples, seed);
  return trapezoid(lbar, mesh.step);
}

}  // namespace epi
