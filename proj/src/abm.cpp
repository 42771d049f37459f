#include "epi/abm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <sstream>

#include "epi/errors.hpp"
#include "epi/rng.hpp"

namespace epi {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Scheduled transition; recoveries and other scheduled moves (rank 0) are
// processed before infection candidates (rank 1) at equal timestamps, and
// equal-time scheduled events in insertion order.
struct Sched {
  double t = 0.0;
  char kind = '?';
  std::uint64_t id = 0;
  std::uint64_t seq = 0;
};

struct SchedLater {
  bool operator()(const Sched& a, const Sched& b) const {
    if (a.t != b.t) return a.t > b.t;
    return a.seq > b.seq;
  }
};

using SchedQueue = std::priority_queue<Sched, std::vector<Sched>, SchedLater>;

template <typename Snap>
void record_until(const TimeMesh& mesh, std::size_t& next, double t, Snap&& snap) {
  while (next < mesh.size() && mesh.time(next) < t) {
    snap(next);
    ++next;
  }
}

bool is_markov(AbmFamily f) {
  return f == AbmFamily::MarkovSir || f == AbmFamily::MarkovSis || f == AbmFamily::MarkovSirs ||
         f == AbmFamily::MarkovSirDemography;
}

double sample_profile_age(const AgeProfile& prof, std::mt19937_64& rng) {
  // inverse-CDF draw from the discretized age density
  Curve cdf = cumulative_trapezoid(prof.density, prof.step);
  double total = cdf.back();
  if (total <= 0.0) throw ValidationError("age profile: density integrates to zero");
  double target = uniform01(rng) * total;
  std::size_t j = 1;
  while (j < cdf.size() && cdf[j] < target) ++j;
  if (j >= cdf.size()) return prof.step * static_cast<double>(cdf.size() - 1);
  double lo = cdf[j - 1], hi = cdf[j];
  double frac = hi > lo ? (target - lo) / (hi - lo) : 0.0;
  return prof.step * (static_cast<double>(j - 1) + frac);
}

// Event-driven piecewise-linear aggregator for the total force of infection:
// each infected individual's infectivity trajectory is folded in as value and
// slope deltas at its knot times.
class ForceAggregator {
 public:
  double at(double time) {
    advance(time);
    return std::max(value_, 0.0);
  }

  void add(const KnotCurve& curve, double start) {
    const auto& kn = curve.knots;
    if (kn.empty()) return;
    if (curve.interp == KnotCurve::Interp::StepRight) {
      double prev = 0.0;
      for (const auto& [x, v] : kn) {
        apply_delta(start + x, v - prev, 0.0);
        prev = v;
      }
      return;
    }
    double prevSlope = 0.0;
    for (std::size_t m = 0; m < kn.size(); ++m) {
      double slope = 0.0;
      if (m + 1 < kn.size()) slope = (kn[m + 1].second - kn[m].second) / (kn[m + 1].first - kn[m].first);
      double dv = m == 0 ? kn[0].second : 0.0;
      apply_delta(start + kn[m].first, dv, slope - prevSlope);
      prevSlope = slope;
    }
  }

 private:
  struct Knot {
    double t, dv, ds;
    std::uint64_t seq;
  };
  struct Later {
    bool operator()(const Knot& a, const Knot& b) const {
      if (a.t != b.t) return a.t > b.t;
      return a.seq > b.seq;
    }
  };

  void apply_delta(double at, double dv, double ds) {
    if (at <= t_) {
      value_ += dv + ds * (t_ - at);
      slope_ += ds;
      return;
    }
    queue_.push(Knot{at, dv, ds, seq_++});
  }

  void advance(double to) {
    while (!queue_.empty() && queue_.top().t <= to) {
      Knot k = queue_.top();
      queue_.pop();
      value_ += slope_ * (k.t - t_);
      t_ = k.t;
      value_ += k.dv;
      slope_ += k.ds;
    }
    value_ += slope_ * (to - t_);
    t_ = to;
  }

  double t_ = 0.0, value_ = 0.0, slope_ = 0.0;
  std::uint64_t seq_ = 0;
  std::priority_queue<Knot, std::vector<Knot>, Later> queue_;
};

void log_event(const ModelSpec& sp, Trajectory& out, double t, std::uint64_t id, char kind) {
  if (sp.recordEvents) out.events.push_back(AbmEvent{t, id, kind});
}

Trajectory make_trajectory(const ModelSpec& sp, std::uint64_t seed, const TimeMesh& mesh) {
  Trajectory out;
  out.mesh = mesh;
  const std::size_t n = mesh.size();
  out.S.assign(n, 0);
  out.E.assign(n, 0);
  out.I.assign(n, 0);
  out.R.assign(n, 0);
  out.A.assign(n, 0);
  out.force.assign(n, 0.0);
  out.seed = seed;
  std::ostringstream os;
  os << std::hex << hash_tag(sp.describe());
  out.digest = os.str();
  return out;
}

// ---------------------------------------------------------------------------
// constant-infectivity families (aggregate-rate thinning)
// ---------------------------------------------------------------------------

Trajectory simulate_constant(const ModelSpec& sp, double horizon, std::uint64_t seed,
                             const TimeMesh& mesh) {
  StreamFamily fam(seed);
  auto prm = fam.stream("prm");
  auto initRng = fam.stream("init");
  auto birthRng = fam.stream("birth");
  auto deathRng = fam.stream("death");

  const bool demography = sp.family == AbmFamily::MarkovSirDemography;
  const bool seir = sp.family == AbmFamily::NonMarkovSeir;
  const bool markov = is_markov(sp.family);
  const double Nd = static_cast<double>(sp.N);

  long long S = static_cast<long long>(sp.S0), E = static_cast<long long>(sp.E0);
  long long I = static_cast<long long>(sp.I0), R = static_cast<long long>(sp.R0);
  long long pop = S + E + I + R;
  long long A = 0;
  double t = 0.0;

  Trajectory out = make_trajectory(sp, seed, mesh);
  std::size_t nextRec = 0;
  auto snap = [&](std::size_t k) {
    out.S[k] = S;
    out.E[k] = E;
    out.I[k] = I;
    out.R[k] = R;
    out.A[k] = A;
    out.force[k] = sp.lambda * static_cast<double>(I);
  };

  SchedQueue q;
  std::uint64_t seq = 0;
  auto push = [&](double when, char kind, std::uint64_t id) {
    q.push(Sched{when, kind, id, seq++});
  };

  auto infectiousPeriod = [&](std::uint64_t id) {
    auto rng = fam.stream("eta", id);
    return markov ? exponential(rng, sp.gamma) : sp.F.sample(rng);
  };

  // demography: currently-infected bookkeeping so a death can cancel a
  // scheduled recovery (lazy cancellation by id)
  std::vector<std::uint64_t> activeInfected;
  std::vector<std::uint64_t> posOf;  // id -> index in activeInfected
  std::vector<char> cancelled;
  auto registerInfected = [&](std::uint64_t id) {
    if (!demography) return;
    if (posOf.size() <= id) {
      posOf.resize(id + 1, 0);
      cancelled.resize(id + 1, 0);
    }
    posOf[id] = activeInfected.size();
    activeInfected.push_back(id);
  };
  auto removeInfected = [&](std::size_t pos) {
    std::uint64_t last = activeInfected.back();
    activeInfected[pos] = last;
    posOf[last] = pos;
    activeInfected.pop_back();
  };

  // initially infected / exposed
  std::uint64_t idCounter = 0;
  for (std::size_t i = 0; i < sp.I0; ++i) {
    std::uint64_t id = idCounter++;
    double remaining;
    if (sp.ageProfile) {
      double age = sample_profile_age(*sp.ageProfile, initRng);
      remaining = sp.F.sample_remaining(initRng, age);
    } else if (sp.F0) {
      remaining = sp.F0->sample(initRng);
    } else if (markov) {
      remaining = exponential(initRng, sp.gamma);
    } else {
      remaining = sp.F.sample(initRng);
    }
    push(remaining, 'r', id);
    registerInfected(id);
  }
  for (std::size_t i = 0; i < sp.E0; ++i) {
    std::uint64_t id = idCounter++;
    double remaining = sp.G0 ? sp.G0->sample(initRng) : sp.G.sample(initRng);
    push(remaining, 'e', id);
  }

  // infection candidate stream: fixed dominating rate for fixed-population
  // families; redrawn after each event when the population varies
  const bool fixedD = !demography;
  auto dominating = [&]() {
    if (sp.dominatingRateCap) return *sp.dominatingRateCap * Nd;
    return sp.lambda * static_cast<double>(fixedD ? static_cast<long long>(sp.N) : pop);
  };
  double D = dominating();
  double nextCand = D > 0.0 ? exponential(prm, D) : kInf;
  double nextDeath = demography && sp.mu > 0.0 ? exponential(deathRng, sp.mu * static_cast<double>(pop)) : kInf;
  double nextBirth = demography && sp.mu > 0.0 ? exponential(birthRng, sp.mu * Nd) : kInf;

  auto redrawChannels = [&]() {
    if (!fixedD) {
      D = dominating();
      nextCand = D > 0.0 ? t + exponential(prm, D) : kInf;
    }
    if (demography && sp.mu > 0.0) {
      nextDeath = pop > 0 ? t + exponential(deathRng, sp.mu * static_cast<double>(pop)) : kInf;
      nextBirth = t + exponential(birthRng, sp.mu * Nd);
    }
  };

  std::uint64_t candCounter = 0;
  while (true) {
    double tSched = q.empty() ? kInf : q.top().t;
    double tEvent = std::min({tSched, nextCand, nextDeath, nextBirth});
    if (tEvent > horizon) break;
    record_until(mesh, nextRec, tEvent, snap);
    t = tEvent;

    if (tSched <= tEvent) {  // scheduled moves win ties against candidates
      Sched ev = q.top();
      q.pop();
      switch (ev.kind) {
        case 'r':
          if (demography) {
            if (cancelled[ev.id]) break;
            removeInfected(posOf[ev.id]);
          }
          --I;
          if (sp.family == AbmFamily::MarkovSis) {
            ++S;
          } else {
            ++R;
            if (sp.family == AbmFamily::MarkovSirs && sp.rho > 0.0) {
              auto rng = fam.stream("waning", ev.id);
              push(t + exponential(rng, sp.rho), 'w', ev.id);
            }
          }
          log_event(sp, out, t, ev.id, 'r');
          break;
        case 'w':
          --R;
          ++S;
          log_event(sp, out, t, ev.id, 'w');
          break;
        case 'e': {
          --E;
          ++I;
          push(t + infectiousPeriod(ev.id), 'r', ev.id);
          log_event(sp, out, t, ev.id, 'e');
          break;
        }
        default:
          break;
      }
      redrawChannels();
      continue;
    }

    if (nextCand <= std::min(nextDeath, nextBirth)) {
      std::uint64_t cand = candCounter++;
      double upsilon = sp.lambda * static_cast<double>(S) * static_cast<double>(I) / Nd;
      double acc = D > 0.0 ? upsilon / D : 0.0;
      if (acc > 1.0 + 1e-9)
        throw NumericalError("simulate: dominating rate violated at an infection candidate");
      double u = uniform01(prm);
      bool accepted = u < acc;
      if (fixedD) nextCand = t + (D > 0.0 ? exponential(prm, D) : kInf);
      if (accepted) {
        ++A;
        --S;
        std::uint64_t id = sp.I0 + sp.E0 + cand;  // ids keyed by candidate index
        if (seir) {
          ++E;
          auto rng = fam.stream("latency", id);
          push(t + sp.G.sample(rng), 'e', id);
        } else {
          ++I;
          push(t + infectiousPeriod(id), 'r', id);
          registerInfected(id);
        }
        log_event(sp, out, t, id, 'i');
        redrawChannels();
      } else if (!fixedD) {
        redrawChannels();
      }
      continue;
    }

    if (nextDeath <= nextBirth) {
      double u = uniform01(deathRng) * static_cast<double>(pop);
      if (u < static_cast<double>(S)) {
        --S;
      } else if (u < static_cast<double>(S + I)) {
        std::size_t pick = std::min<std::size_t>(
            static_cast<std::size_t>(uniform01(deathRng) * static_cast<double>(activeInfected.size())),
            activeInfected.size() - 1);
        cancelled[activeInfected[pick]] = 1;
        removeInfected(pick);
        --I;
      } else {
        --R;
      }
      --pop;
      log_event(sp, out, t, 0, 'd');
      redrawChannels();
      continue;
    }

    ++S;
    ++pop;
    if (pop > 4 * static_cast<long long>(sp.N))
      throw NumericalError("simulate: demography population exceeded the 4N bookkeeping cap");
    log_event(sp, out, t, 0, 'b');
    redrawChannels();
  }
  record_until(mesh, nextRec, kInf, snap);
  return out;
}

// ---------------------------------------------------------------------------
// varying infectivity (aggregate thinning against lambda* I)
// ---------------------------------------------------------------------------

Trajectory simulate_varying_infectivity(const ModelSpec& sp, double horizon, std::uint64_t seed,
                                        const TimeMesh& mesh) {
  StreamFamily fam(seed);
  auto prm = fam.stream("prm");
  auto initRng = fam.stream("init");
  const double Nd = static_cast<double>(sp.N);
  const double lambdaStar = sp.infectivity.lambda_star();
  const InfectivityLaw& law0 = sp.infectivity0 ? *sp.infectivity0 : sp.infectivity;

  long long S = static_cast<long long>(sp.S0), I = static_cast<long long>(sp.I0);
  long long R = static_cast<long long>(sp.R0), A = 0;
  double t = 0.0;

  ForceAggregator agg;
  SchedQueue q;
  std::uint64_t seq = 0;

  Trajectory out = make_trajectory(sp, seed, mesh);
  std::size_t nextRec = 0;
  auto snap = [&](std::size_t k) {
    out.S[k] = S;
    out.E[k] = 0;
    out.I[k] = I;
    out.R[k] = R;
    out.A[k] = A;
    out.force[k] = agg.at(mesh.time(k));
  };

  for (std::size_t i = 0; i < sp.I0; ++i) {
    auto rng = fam.stream("inf0", i);
    KnotCurve curve;
    double age = 0.0;
    if (sp.ageProfile) {
      age = sample_profile_age(*sp.ageProfile, initRng);
      int attempts = 0;
      do {
        curve = law0.sample(rng);
        if (++attempts > 100000)
          throw NumericalError("simulate: could not draw a trajectory still active at the given age");
      } while (curve.active_end() <= age);
    } else {
      curve = law0.sample(rng);
    }
    agg.add(curve, -age);
    double remaining = curve.active_end() - age;
    q.push(Sched{std::max(remaining, 0.0), 'r', i, seq++});
  }

  std::uint64_t idCounter = sp.I0;
  double D = lambdaStar * static_cast<double>(S) * static_cast<double>(I) / Nd;
  double nextCand = D > 0.0 ? exponential(prm, D) : kInf;
  auto redraw = [&]() {
    D = lambdaStar * static_cast<double>(S) * static_cast<double>(I) / Nd;
    nextCand = D > 0.0 ? t + exponential(prm, D) : kInf;
  };

  while (true) {
    double tSched = q.empty() ? kInf : q.top().t;
    double tEvent = std::min(tSched, nextCand);
    if (tEvent > horizon) break;
    record_until(mesh, nextRec, tEvent, snap);
    t = tEvent;
    if (tSched <= tEvent) {
      Sched ev = q.top();
      q.pop();
      --I;
      ++R;
      log_event(sp, out, t, ev.id, 'r');
      redraw();
      continue;
    }
    double f = agg.at(t);
    double acc = f / (lambdaStar * static_cast<double>(I));
    if (acc > 1.0 + 1e-9)
      throw NumericalError("simulate: aggregate force exceeded its dominating bound");
    double u = uniform01(prm);
    if (u < acc) {
      ++A;
      --S;
      ++I;
      std::uint64_t id = idCounter++;
      auto rng = fam.stream("inf", id);
      KnotCurve curve = sp.infectivity.sample(rng);
      agg.add(curve, t);
      q.push(Sched{t + curve.active_end(), 'r', id, seq++});
      log_event(sp, out, t, id, 'i');
      redraw();
    } else {
      nextCand = t + (D > 0.0 ? exponential(prm, D) : kInf);
    }
  }
  record_until(mesh, nextRec, kInf, snap);
  return out;
}

// ---------------------------------------------------------------------------
// varying susceptibility (per-individual thinning)
// ---------------------------------------------------------------------------

Trajectory simulate_varying_susceptibility(const ModelSpec& sp, double horizon, std::uint64_t seed,
                                           const TimeMesh& mesh) {
  StreamFamily fam(seed);
  auto prm = fam.stream("prm");
  const double Nd = static_cast<double>(sp.N);
  const double lambdaStar = sp.infectivity.lambda_star();
  const InfectivityLaw& law0 = sp.infectivity0 ? *sp.infectivity0 : sp.infectivity;

  long long I = static_cast<long long>(sp.I0), A = 0;
  double t = 0.0;

  std::vector<KnotCurve> waning(sp.N);       // susceptibility since last infection
  std::vector<double> lastInfection(sp.N, 0.0);
  std::vector<char> everInfected(sp.N, 0);
  std::vector<long long> perIndividual(sp.N, 0);

  auto susceptibilityOf = [&](std::size_t k, double when) {
    if (!everInfected[k]) return 1.0;
    return waning[k].value(when - lastInfection[k]);
  };

  ForceAggregator agg;
  SchedQueue q;
  std::uint64_t seq = 0;

  Trajectory out = make_trajectory(sp, seed, mesh);
  std::size_t nextRec = 0;
  auto snap = [&](std::size_t k) {
    out.S[k] = static_cast<long long>(sp.N) - I;
    out.E[k] = 0;
    out.I[k] = I;
    out.R[k] = 0;
    out.A[k] = A;
    out.force[k] = agg.at(mesh.time(k));
  };

  std::uint64_t infCounter = 0;
  auto infect = [&](std::size_t k, double when, const InfectivityLaw& law, const char* tag) {
    auto rng = fam.stream(tag, infCounter++);
    KnotCurve curve = law.sample(rng);
    double eta = curve.active_end();
    waning[k] = sp.susceptibility.sample_paired(rng, std::isfinite(eta) ? eta : 0.0);
    everInfected[k] = 1;
    lastInfection[k] = when;
    ++perIndividual[k];
    agg.add(curve, when);
    ++I;
    q.push(Sched{when + eta, 'r', k, seq++});
  };

  I = 0;
  for (std::size_t k = 0; k < sp.I0; ++k) infect(k, 0.0, law0, "inf0");
  A = 0;  // initial infections are initial condition, not counted in A

  double D = lambdaStar * static_cast<double>(I);
  double nextCand = D > 0.0 ? exponential(prm, D) : kInf;

  while (true) {
    double tSched = q.empty() ? kInf : q.top().t;
    double tEvent = std::min(tSched, nextCand);
    if (tEvent > horizon) break;
    record_until(mesh, nextRec, tEvent, snap);
    t = tEvent;
    if (tSched <= tEvent) {
      Sched ev = q.top();
      q.pop();
      --I;
      log_event(sp, out, t, ev.id, 'r');
      D = lambdaStar * static_cast<double>(I);
      nextCand = D > 0.0 ? t + exponential(prm, D) : kInf;
      continue;
    }
    double f = agg.at(t);
    std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(uniform01(prm) * Nd), sp.N - 1);
    double s = susceptibilityOf(k, t);
    double acc = s * f / (lambdaStar * static_cast<double>(I));
    if (acc > 1.0 + 1e-9)
      throw NumericalError("simulate: per-individual rate exceeded its dominating bound");
    double u = uniform01(prm);
    if (u < acc) {
      ++A;
      infect(k, t, sp.infectivity, "inf");
      log_event(sp, out, t, k, 'i');
      D = lambdaStar * static_cast<double>(I);
      nextCand = t + exponential(prm, D);
    } else {
      nextCand = t + (D > 0.0 ? exponential(prm, D) : kInf);
    }
  }
  record_until(mesh, nextRec, kInf, snap);
  return out;
}

// ---------------------------------------------------------------------------
// multipatch (Markov channels for infection/migration, scheduled recoveries)
// ---------------------------------------------------------------------------

Trajectory simulate_multipatch(const ModelSpec& sp, double horizon, std::uint64_t seed,
                               const TimeMesh& mesh) {
  StreamFamily fam(seed);
  auto chan = fam.stream("gillespie");
  auto initRng = fam.stream("init");
  const std::size_t L = sp.net.L;
  const double Nd = static_cast<double>(sp.N);

  std::vector<long long> S(L), R(L);
  for (std::size_t i = 0; i < L; ++i) {
    S[i] = static_cast<long long>(sp.S0p[i]);
    R[i] = static_cast<long long>(sp.R0p[i]);
  }
  // infected individuals carry an explicit patch; buckets allow a uniform
  // pick inside a patch in O(1)
  std::vector<std::size_t> patchOf;
  std::vector<char> recovered;
  std::vector<std::vector<std::uint64_t>> bucket(L);
  std::vector<std::size_t> posInBucket;
  auto addInfected = [&](std::uint64_t id, std::size_t patch) {
    if (patchOf.size() <= id) {
      patchOf.resize(id + 1, 0);
      recovered.resize(id + 1, 0);
      posInBucket.resize(id + 1, 0);
    }
    patchOf[id] = patch;
    posInBucket[id] = bucket[patch].size();
    bucket[patch].push_back(id);
  };
  auto removeInfected = [&](std::uint64_t id) {
    auto& b = bucket[patchOf[id]];
    std::uint64_t last = b.back();
    b[posInBucket[id]] = last;
    posInBucket[last] = posInBucket[id];
    b.pop_back();
  };

  SchedQueue q;
  std::uint64_t seq = 0;
  long long A = 0;
  double t = 0.0;

  std::uint64_t idCounter = 0;
  for (std::size_t i = 0; i < L; ++i)
    for (std::size_t c = 0; c < sp.I0p[i]; ++c) {
      std::uint64_t id = idCounter++;
      auto rng = fam.stream("eta0", id);
      double remaining = sp.F0 ? sp.F0->sample(initRng) : sp.F.sample(rng);
      addInfected(id, i);
      q.push(Sched{remaining, 'r', id, seq++});
    }

  auto patchI = [&](std::size_t i) { return static_cast<long long>(bucket[i].size()); };
  auto upsilon = [&](std::size_t i) {
    double numer = 0.0;
    for (std::size_t j = 0; j < L; ++j)
      numer += sp.net.kappa(i, j) * static_cast<double>(patchI(j));
    numer *= sp.net.lambda[i] * static_cast<double>(S[i]);
    if (numer == 0.0) return 0.0;
    double ni = static_cast<double>(S[i] + patchI(i) + R[i]);
    if (ni <= 0.0) return 0.0;  // 0/0 convention
    return numer / (std::pow(ni, sp.net.gammaExponent) * std::pow(Nd, 1.0 - sp.net.gammaExponent));
  };

  Trajectory out = make_trajectory(sp, seed, mesh);
  out.Sp.assign(L, std::vector<long long>(mesh.size(), 0));
  out.Ip.assign(L, std::vector<long long>(mesh.size(), 0));
  out.Rp.assign(L, std::vector<long long>(mesh.size(), 0));
  std::size_t nextRec = 0;
  auto snap = [&](std::size_t k) {
    long long sS = 0, sI = 0, sR = 0;
    double f = 0.0;
    for (std::size_t i = 0; i < L; ++i) {
      out.Sp[i][k] = S[i];
      out.Ip[i][k] = patchI(i);
      out.Rp[i][k] = R[i];
      sS += S[i];
      sI += patchI(i);
      sR += R[i];
      f += upsilon(i);
    }
    out.S[k] = sS;
    out.E[k] = 0;
    out.I[k] = sI;
    out.R[k] = sR;
    out.A[k] = A;
    out.force[k] = f;  // total instantaneous infection intensity
  };

  // channel list: infections per patch, then S/I/R migrations per ordered pair
  while (true) {
    double total = 0.0;
    std::vector<double> rates;
    rates.reserve(L + 3 * L * L);
    for (std::size_t i = 0; i < L; ++i) rates.push_back(upsilon(i));
    for (std::size_t i = 0; i < L; ++i)
      for (std::size_t j = 0; j < L; ++j)
        if (i != j) {
          rates.push_back(sp.net.nuS(i, j) * static_cast<double>(S[i]));
          rates.push_back(sp.net.nuI(i, j) * static_cast<double>(patchI(i)));
          rates.push_back(sp.net.nuR(i, j) * static_cast<double>(R[i]));
        } else {
          rates.push_back(0.0);
          rates.push_back(0.0);
          rates.push_back(0.0);
        }
    for (double r : rates) total += r;

    double tChan = total > 0.0 ? t + exponential(chan, total) : kInf;
    double tSched = q.empty() ? kInf : q.top().t;
    double tEvent = std::min(tChan, tSched);
    if (tEvent > horizon) break;
    record_until(mesh, nextRec, tEvent, snap);
    t = tEvent;

    if (tSched <= tEvent) {
      Sched ev = q.top();
      q.pop();
      std::size_t i = patchOf[ev.id];
      removeInfected(ev.id);
      recovered[ev.id] = 1;
      ++R[i];
      log_event(sp, out, t, ev.id, 'r');
      continue;
    }

    double pick = uniform01(chan) * total;
    std::size_t c = 0;
    while (c + 1 < rates.size() && pick >= rates[c]) pick -= rates[c], ++c;
    if (c < L) {  // infection in patch c
      ++A;
      --S[c];
      std::uint64_t id = idCounter++;
      auto rng = fam.stream("eta", id);
      addInfected(id, c);
      q.push(Sched{t + sp.F.sample(rng), 'r', id, seq++});
      log_event(sp, out, t, id, 'i');
    } else {
      std::size_t m = c - L;
      std::size_t i = m / (3 * L), rem = m % (3 * L);
      std::size_t j = rem / 3, what = rem % 3;
      if (what == 0) {
        --S[i];
        ++S[j];
      } else if (what == 1) {
        std::size_t idx = std::min<std::size_t>(
            static_cast<std::size_t>(uniform01(chan) * static_cast<double>(bucket[i].size())),
            bucket[i].size() - 1);
        std::uint64_t id = bucket[i][idx];
        removeInfected(id);
        addInfected(id, j);
      } else {
        --R[i];
        ++R[j];
      }
      log_event(sp, out, t, 0, 'm');
    }
  }
  record_until(mesh, nextRec, kInf, snap);
  return out;
}

}  // namespace

std::string family_name(AbmFamily family) {
  switch (family) {
    case AbmFamily::MarkovSir: return "markov-sir";
    case AbmFamily::MarkovSis: return "markov-sis";
    case AbmFamily::MarkovSirs: return "markov-sirs";
    case AbmFamily::MarkovSirDemography: return "markov-sir-demography";
    case AbmFamily::NonMarkovSir: return "nonmarkov-sir";
    case AbmFamily::NonMarkovSeir: return "nonmarkov-seir";
    case AbmFamily::VaryingInfectivity: return "varying-infectivity";
    case AbmFamily::VaryingSusceptibility: return "varying-susceptibility";
    case AbmFamily::Multipatch: return "multipatch";
  }
  return "?";
}

void ModelSpec::validate() const {
  if (N == 0) throw ValidationError("model: population scale N must be positive");
  if (lambda < 0 || gamma < 0 || rho < 0 || mu < 0)
    throw ValidationError("model: rates must be nonnegative");
  if (ageProfile && F0)
    throw ValidationError("model: give either a remaining-period law or an age profile, not both");
  if (family == AbmFamily::Multipatch) {
    net.validate();
    if (S0p.size() != net.L || I0p.size() != net.L || R0p.size() != net.L)
      throw ValidationError("model: per-patch initial counts must match the patch count");
    std::size_t total = 0;
    for (std::size_t i = 0; i < net.L; ++i) total += S0p[i] + I0p[i] + R0p[i];
    if (total != N) throw ValidationError("model: per-patch counts must sum to N");
    return;
  }
  if (family == AbmFamily::VaryingSusceptibility) {
    if (I0 > N) throw ValidationError("model: initial infected exceed N");
    return;  // individuals cycle through states; only N and I0 are counts
  }
  std::size_t total = S0 + E0 + I0 + R0;
  if (family != AbmFamily::MarkovSirDemography && total != N)
    throw ValidationError("model: compartment counts must sum to N");
  if (family == AbmFamily::MarkovSirDemography && total == 0)
    throw ValidationError("model: demography needs a nonempty initial population");
  if (E0 > 0 && family != AbmFamily::NonMarkovSeir)
    throw ValidationError("model: exposed individuals require the seir family");
}

std::string ModelSpec::describe() const {
  std::ostringstream os;
  os << family_name(family) << ";N=" << N << ";lambda=" << lambda << ";gamma=" << gamma
     << ";rho=" << rho << ";mu=" << mu << ";F=" << F.describe() << ";G=" << G.describe()
     << ";F0=" << (F0 ? F0->describe() : "-") << ";G0=" << (G0 ? G0->describe() : "-")
     << ";inf=" << infectivity.describe()
     << ";inf0=" << (infectivity0 ? infectivity0->describe() : "-")
     << ";sus=" << susceptibility.describe() << ";S0=" << S0 << ";E0=" << E0 << ";I0=" << I0
     << ";R0=" << R0;
  if (dominatingRateCap) os << ";cap=" << *dominatingRateCap;
  if (ageProfile) os << ";ageProfile[" << ageProfile->density.size() << "," << ageProfile->step << "]";
  if (family == AbmFamily::Multipatch) {
    os << ";L=" << net.L << ";patches=";
    for (std::size_t i = 0; i < net.L; ++i)
      os << S0p[i] << "/" << I0p[i] << "/" << R0p[i] << (i + 1 < net.L ? "," : "");
  }
  return os.str();
}

Trajectory simulate(const ModelSpec& spec, double horizon, std::uint64_t seed,
                    const TimeMesh& recordMesh) {
  if (horizon <= 0.0) throw ValidationError("simulate: horizon must be positive");
  spec.validate();
  switch (spec.family) {
    case AbmFamily::VaryingInfectivity:
      return simulate_varying_infectivity(spec, horizon, seed, recordMesh);
    case AbmFamily::VaryingSusceptibility:
      return simulate_varying_susceptibility(spec, horizon, seed, recordMesh);
    case AbmFamily::Multipatch:
      return simulate_multipatch(spec, horizon, seed, recordMesh);
    default:
      return simulate_constant(spec, horizon, seed, recordMesh);
  }
}

EnsembleStats replicate(const ModelSpec& spec, double horizon,
                        const std::vector<std::uint64_t>& seeds, const TimeMesh& recordMesh) {
  if (seeds.empty()) throw ValidationError("replicate: need at least one seed");
  std::vector<std::uint64_t> sorted = seeds;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw ValidationError("replicate: duplicate seeds");

  const std::size_t n = recordMesh.size();
  EnsembleStats st;
  st.mesh = recordMesh;
  st.replicates = seeds.size();
  auto zero = [&]() { return Curve(n, 0.0); };
  Curve sums[6] = {zero(), zero(), zero(), zero(), zero(), zero()};
  Curve sq[6] = {zero(), zero(), zero(), zero(), zero(), zero()};
  for (std::uint64_t s : seeds) {
    Trajectory tr = simulate(spec, horizon, s, recordMesh);
    for (std::size_t k = 0; k < n; ++k) {
      double vals[6] = {static_cast<double>(tr.S[k]), static_cast<double>(tr.E[k]),
                        static_cast<double>(tr.I[k]), static_cast<double>(tr.R[k]),
                        tr.force[k],                  static_cast<double>(tr.A[k])};
      for (int c = 0; c < 6; ++c) {
        sums[c][k] += vals[c];
        sq[c][k] += vals[c] * vals[c];
      }
    }
  }
  double m = static_cast<double>(seeds.size());
  auto finish = [&](int c, Curve& mean, Curve& var) {
    mean = zero();
    var = zero();
    for (std::size_t k = 0; k < n; ++k) {
      mean[k] = sums[c][k] / m;
      if (seeds.size() > 1)
        var[k] = std::max(0.0, (sq[c][k] - m * mean[k] * mean[k]) / (m - 1.0));
    }
  };
  finish(0, st.meanS, st.varS);
  finish(1, st.meanE, st.varE);
  finish(2, st.meanI, st.varI);
  finish(3, st.meanR, st.varR);
  finish(4, st.meanForce, st.varForce);
  finish(5, st.meanA, st.varA);
  return st;
}

ExtinctionResult extinction_time(const ModelSpec& spec, std::uint64_t seed, double cap) {
  if (spec.family != AbmFamily::MarkovSis)
    throw ValidationError("extinction_time: only the endemic-capable markov-sis family is supported");
  spec.validate();
  if (cap <= 0.0) throw ValidationError("extinction_time: cap must be positive");
  if (spec.I0 == 0) return ExtinctionResult{0.0, false};

  StreamFamily fam(seed);
  auto prm = fam.stream("prm");
  auto initRng = fam.stream("init");
  const double Nd = static_cast<double>(spec.N);
  long long S = static_cast<long long>(spec.S0), I = static_cast<long long>(spec.I0);
  double t = 0.0;

  SchedQueue q;
  std::uint64_t seq = 0;
  for (std::size_t i = 0; i < spec.I0; ++i)
    q.push(Sched{exponential(initRng, spec.gamma), 'r', i, seq++});
  double D = spec.lambda * Nd;
  double nextCand = D > 0.0 ? exponential(prm, D) : kInf;
  std::uint64_t cand = 0;
  while (true) {
    double tSched = q.empty() ? kInf : q.top().t;
    double tEvent = std::min(tSched, nextCand);
    if (tEvent > cap) return ExtinctionResult{cap, true};
    t = tEvent;
    if (tSched <= tEvent) {
      q.pop();
      --I;
      ++S;
      if (I == 0) return ExtinctionResult{t, false};
      continue;
    }
    double acc = spec.lambda * static_cast<double>(S) * static_cast<double>(I) / (Nd * D);
    double u = uniform01(prm);
    nextCand = t + exponential(prm, D);
    if (u < acc) {
      --S;
      ++I;
      std::uint64_t id = spec.I0 + cand;
      auto rng = fam.stream("eta", id);
      q.push(Sched{t + exponential(rng, spec.gamma), 'r', id, seq++});
    }
    ++cand;
  }
}

}  // namespace epi
