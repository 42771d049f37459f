#include "epi/laws.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace epi {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Regularized lower incomplete gamma by series (x < a+1) or continued
// fraction (x >= a+1); standard Lentz/serial evaluation.
double gamma_p_series(double a, double x) {
  double ap = a;
  double sum = 1.0 / a;
  double del = sum;
  for (int n = 0; n < 500; ++n) {
    ap += 1.0;
    del *= x / ap;
    sum += del;
    if (std::abs(del) < std::abs(sum) * 1e-16) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

double gamma_q_cf(double a, double x) {
  const double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < 500; ++i) {
    double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < 1e-16) break;
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

}  // namespace

double gamma_p(double a, double x) {
  if (x <= 0.0) return 0.0;
  if (x < a + 1.0) return gamma_p_series(a, x);
  return 1.0 - gamma_q_cf(a, x);
}

double beta22_cdf(double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  return x * x * (3.0 - 2.0 * x);
}

double beta22_quantile(double u) {
  if (u <= 0.0) return 0.0;
  if (u >= 1.0) return 1.0;
  // Solve 3x^2 - 2x^3 = u by Newton with bisection safeguard.
  double lo = 0.0, hi = 1.0, x = 0.5;
  for (int it = 0; it < 100; ++it) {
    double f = beta22_cdf(x) - u;
    if (f > 0.0)
      hi = x;
    else
      lo = x;
    double df = 6.0 * x * (1.0 - x);
    double step = (df > 1e-12) ? f / df : 0.0;
    double xn = x - step;
    if (!(xn > lo && xn < hi)) xn = 0.5 * (lo + hi);
    if (std::abs(xn - x) < 1e-15) {
      x = xn;
      break;
    }
    x = xn;
  }
  return x;
}

DurationLaw DurationLaw::exponential(double rate) {
  if (!(rate > 0.0)) throw ValidationError("exponential law: rate must be > 0");
  return DurationLaw(Kind::Exponential, rate, 0.0);
}

DurationLaw DurationLaw::deterministic(double d) {
  if (!(d >= 0.0)) throw ValidationError("deterministic law: value must be >= 0");
  return DurationLaw(Kind::Deterministic, d, 0.0);
}

DurationLaw DurationLaw::gammaLaw(double shape, double scale) {
  if (!(shape > 0.0) || !(scale > 0.0))
    throw ValidationError("gamma law: shape and scale must be > 0");
  return DurationLaw(Kind::Gamma, shape, scale);
}

DurationLaw DurationLaw::uniformLaw(double a, double b) {
  if (!(a < b) || a < 0.0) throw ValidationError("uniform law: need 0 <= a < b");
  return DurationLaw(Kind::Uniform, a, b);
}

DurationLaw DurationLaw::betaShifted(double base, double span) {
  if (!(base >= 0.0) || !(span > 0.0))
    throw ValidationError("beta-shifted law: need base >= 0, span > 0");
  return DurationLaw(Kind::BetaShifted, base, span);
}

DurationLaw::DurationLaw(std::vector<std::pair<double, double>> t)
    : kind_(Kind::Empirical), table_(std::move(t)) {
  std::sort(table_.begin(), table_.end());
  double total = 0.0;
  for (auto& [v, p] : table_) {
    if (v < 0.0 || p < 0.0) throw ValidationError("empirical law: negative value or probability");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9)
    throw ValidationError("empirical law: probabilities must sum to 1");
}

DurationLaw DurationLaw::empirical(std::vector<std::pair<double, double>> table) {
  if (table.empty()) throw ValidationError("empirical law: empty table");
  return DurationLaw(std::move(table));
}

double DurationLaw::cdf(double t) const {
  if (t < 0.0) return 0.0;
  switch (kind_) {
    case Kind::Exponential:
      return -std::expm1(-p_[0] * t);
    case Kind::Deterministic:
      return t >= p_[0] ? 1.0 : 0.0;
    case Kind::Gamma:
      return gamma_p(p_[0], t / p_[1]);
    case Kind::Uniform:
      return std::clamp((t - p_[0]) / (p_[1] - p_[0]), 0.0, 1.0);
    case Kind::BetaShifted:
      return beta22_cdf((t - p_[0]) / p_[1]);
    case Kind::Empirical: {
      double s = 0.0;
      for (auto& [v, p] : table_)
        if (v <= t) s += p;
      return s;
    }
  }
  return 0.0;
}

double DurationLaw::survival(double t) const { return 1.0 - cdf(t); }

double DurationLaw::survival_left(double t) const {
  if (t <= 0.0) return 1.0;
  if (!has_atoms()) return survival(t);
  if (kind_ == Kind::Deterministic) return t <= p_[0] ? 1.0 : 0.0;
  double s = 0.0;  // empirical: P(eta >= t)
  for (auto& [v, p] : table_)
    if (v >= t) s += p;
  return s;
}

bool DurationLaw::has_density() const {
  return kind_ != Kind::Deterministic && kind_ != Kind::Empirical;
}

double DurationLaw::density(double t) const {
  if (!has_density()) throw NumericalError("duration law has no density");
  if (t < 0.0) return 0.0;
  switch (kind_) {
    case Kind::Exponential:
      return p_[0] * std::exp(-p_[0] * t);
    case Kind::Gamma:
      if (t == 0.0) return p_[0] < 1.0 ? kInf : (p_[0] == 1.0 ? 1.0 / p_[1] : 0.0);
      return std::exp((p_[0] - 1.0) * std::log(t / p_[1]) - t / p_[1] - std::lgamma(p_[0])) / p_[1];
    case Kind::Uniform:
      return (t >= p_[0] && t <= p_[1]) ? 1.0 / (p_[1] - p_[0]) : 0.0;
    case Kind::BetaShifted: {
      double x = (t - p_[0]) / p_[1];
      if (x < 0.0 || x > 1.0) return 0.0;
      return 6.0 * x * (1.0 - x) / p_[1];
    }
    default:
      return 0.0;
  }
}

double DurationLaw::hazard(double t) const {
  if (kind_ == Kind::Exponential) return p_[0];
  double sc = survival(t);
  if (sc <= 0.0) return 0.0;
  return density(t) / sc;
}

double DurationLaw::mean() const {
  switch (kind_) {
    case Kind::Exponential:
      return 1.0 / p_[0];
    case Kind::Deterministic:
      return p_[0];
    case Kind::Gamma:
      return p_[0] * p_[1];
    case Kind::Uniform:
      return 0.5 * (p_[0] + p_[1]);
    case Kind::BetaShifted:
      return p_[0] + 0.5 * p_[1];  // E[Beta(2,2)] = 1/2
    case Kind::Empirical: {
      double m = 0.0;
      for (auto& [v, p] : table_) m += v * p;
      return m;
    }
  }
  return 0.0;
}

double DurationLaw::quantile(double u) const {
  u = std::clamp(u, 0.0, 1.0 - 1e-16);
  switch (kind_) {
    case Kind::Exponential:
      return -std::log1p(-u) / p_[0];
    case Kind::Deterministic:
      return p_[0];
    case Kind::Gamma: {
      // Newton on the CDF with bisection safeguard; crude but robust.
      double lo = 0.0, hi = p_[0] * p_[1];
      while (cdf(hi) < u) hi *= 2.0;
      double x = 0.5 * (lo + hi);
      for (int it = 0; it < 200; ++it) {
        double f = cdf(x) - u;
        if (f > 0.0)
          hi = x;
        else
          lo = x;
        double d = density(x);
        double xn = (d > 1e-14 && std::isfinite(d)) ? x - f / d : 0.5 * (lo + hi);
        if (!(xn > lo && xn < hi)) xn = 0.5 * (lo + hi);
        if (std::abs(xn - x) < 1e-14 * std::max(1.0, x)) return xn;
        x = xn;
      }
      return x;
    }
    case Kind::Uniform:
      return p_[0] + (p_[1] - p_[0]) * u;
    case Kind::BetaShifted:
      return p_[0] + p_[1] * beta22_quantile(u);
    case Kind::Empirical: {
      double s = 0.0;
      for (auto& [v, p] : table_) {
        s += p;
        if (s >= u) return v;
      }
      return table_.back().first;
    }
  }
  return 0.0;
}

double DurationLaw::sample(std::mt19937_64& rng) const {
  return quantile(std::uniform_real_distribution<double>(0.0, 1.0)(rng));
}

double DurationLaw::sample_remaining(std::mt19937_64& rng, double age) const {
  if (age <= 0.0) return sample(rng);
  if (kind_ == Kind::Exponential) return sample(rng);  // memoryless
  double sc = survival_left(age);
  if (sc <= 0.0) return 0.0;
  // Want T with F^c(age + T) = F^c(age) * U; invert through the global CDF.
  double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  double target = 1.0 - sc * (1.0 - u);  // CDF level of age + T
  double t = quantile(target);
  return std::max(0.0, t - age);
}

double DurationLaw::support_upper() const {
  switch (kind_) {
    case Kind::Exponential:
    case Kind::Gamma:
      return kInf;
    case Kind::Deterministic:
      return p_[0];
    case Kind::Uniform:
      return p_[1];
    case Kind::BetaShifted:
      return p_[0] + p_[1];
    case Kind::Empirical:
      return table_.back().first;
  }
  return kInf;
}

bool DurationLaw::has_atoms() const {
  return kind_ == Kind::Deterministic || kind_ == Kind::Empirical;
}

std::string DurationLaw::describe() const {
  std::ostringstream os;
  switch (kind_) {
    case Kind::Exponential:
      os << "exponential(rate=" << p_[0] << ")";
      break;
    case Kind::Deterministic:
      os << "deterministic(" << p_[0] << ")";
      break;
    case Kind::Gamma:
      os << "gamma(shape=" << p_[0] << ",scale=" << p_[1] << ")";
      break;
    case Kind::Uniform:
      os << "uniform(" << p_[0] << "," << p_[1] << ")";
      break;
    case Kind::BetaShifted:
      os << "beta-shifted(base=" << p_[0] << ",span=" << p_[1] << ")";
      break;
    case Kind::Empirical:
      os << "empirical(";
      for (auto& [v, p] : table_) os << v << ":" << p << ";";
      os << ")";
      break;
  }
  return os.str();
}

void BivariateTable::validate() const {
  if (atoms.empty()) throw ValidationError("bivariate table: empty");
  double total = 0.0;
  for (auto& a : atoms) {
    if (a.u < 0.0 || a.v < 0.0 || a.p < 0.0)
      throw ValidationError("bivariate table: negative entry");
    total += a.p;
  }
  if (std::abs(total - 1.0) > 1e-9)
    throw ValidationError("bivariate table: probabilities must sum to 1");
}

std::pair<double, double> BivariateTable::sample(std::mt19937_64& rng) const {
  double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  double s = 0.0;
  for (auto& a : atoms) {
    s += a.p;
    if (s >= u) return {a.u, a.v};
  }
  return {atoms.back().u, atoms.back().v};
}

}  // namespace epi
