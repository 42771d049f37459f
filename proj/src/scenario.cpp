#include "epi/scenario.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "epi/errors.hpp"
#include "json.hpp"

namespace epi {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& msg) { throw ValidationError("config: " + msg); }

void check_keys(const json& obj, const std::string& where, const std::set<std::string>& allowed) {
  if (!obj.is_object()) fail(where + " must be an object");
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (allowed.find(it.key()) == allowed.end())
      fail("unknown key '" + it.key() + "' in " + where);
}

double get_num(const json& obj, const std::string& where, const std::string& key, double dflt) {
  if (!obj.contains(key)) return dflt;
  if (!obj[key].is_number()) fail(where + "." + key + " must be a number");
  return obj[key].get<double>();
}

std::string get_str(const json& obj, const std::string& where, const std::string& key,
                    const std::string& dflt) {
  if (!obj.contains(key)) return dflt;
  if (!obj[key].is_string()) fail(where + "." + key + " must be a string");
  return obj[key].get<std::string>();
}

std::vector<std::pair<double, double>> get_pairs(const json& arr, const std::string& where) {
  if (!arr.is_array()) fail(where + " must be an array of [x, y] pairs");
  std::vector<std::pair<double, double>> out;
  for (const auto& e : arr) {
    if (!e.is_array() || e.size() != 2 || !e[0].is_number() || !e[1].is_number())
      fail(where + " entries must be [x, y] number pairs");
    out.emplace_back(e[0].get<double>(), e[1].get<double>());
  }
  return out;
}

LawSpec parse_law(const json& obj, const std::string& where) {
  check_keys(obj, where, {"type", "params", "table"});
  LawSpec ls;
  ls.type = get_str(obj, where, "type", "");
  if (ls.type.empty()) fail(where + ".type is required");
  if (obj.contains("params")) {
    if (!obj["params"].is_array()) fail(where + ".params must be an array of numbers");
    for (const auto& v : obj["params"]) {
      if (!v.is_number()) fail(where + ".params must be an array of numbers");
      ls.params.push_back(v.get<double>());
    }
  }
  if (obj.contains("table")) ls.table = get_pairs(obj["table"], where + ".table");
  return ls;
}

json law_json(const LawSpec& ls) {
  json j;
  j["type"] = ls.type;
  if (!ls.params.empty()) j["params"] = ls.params;
  if (!ls.table.empty()) {
    json t = json::array();
    for (const auto& [a, b] : ls.table) t.push_back({a, b});
    j["table"] = t;
  }
  return j;
}

InfectivitySpec parse_infectivity(const json& obj, const std::string& where) {
  check_keys(obj, where, {"type", "lambda", "period", "alpha", "pReported"});
  InfectivitySpec is;
  is.type = get_str(obj, where, "type", "zero");
  is.lambda = get_num(obj, where, "lambda", 0.0);
  is.alpha = get_num(obj, where, "alpha", 0.5);
  is.pReported = get_num(obj, where, "pReported", 0.5);
  if (obj.contains("period")) is.period = parse_law(obj["period"], where + ".period");
  return is;
}

json infectivity_json(const InfectivitySpec& is) {
  json j;
  j["type"] = is.type;
  if (is.type == "classical") {
    j["lambda"] = is.lambda;
    if (is.period) j["period"] = law_json(*is.period);
  } else if (is.type == "covid") {
    j["alpha"] = is.alpha;
    j["pReported"] = is.pReported;
  }
  return j;
}

SusceptibilitySpec parse_susceptibility(const json& obj, const std::string& where) {
  check_keys(obj, where, {"type", "interp", "knots"});
  SusceptibilitySpec ss;
  ss.type = get_str(obj, where, "type", "pureSIR");
  ss.interp = get_str(obj, where, "interp", "linear");
  if (obj.contains("knots")) ss.knots = get_pairs(obj["knots"], where + ".knots");
  return ss;
}

json susceptibility_json(const SusceptibilitySpec& ss) {
  json j;
  j["type"] = ss.type;
  if (ss.type == "waning") {
    j["interp"] = ss.interp;
    json k = json::array();
    for (const auto& [a, b] : ss.knots) k.push_back({a, b});
    j["knots"] = k;
  }
  return j;
}

}  // namespace

DurationLaw LawSpec::build() const {
  auto need = [&](std::size_t n) {
    if (params.size() != n)
      fail("law '" + type + "' needs " + std::to_string(n) + " parameter(s)");
  };
  if (type == "exponential") {
    need(1);
    return DurationLaw::exponential(params[0]);
  }
  if (type == "deterministic") {
    need(1);
    return DurationLaw::deterministic(params[0]);
  }
  if (type == "gamma") {
    need(2);
    return DurationLaw::gammaLaw(params[0], params[1]);
  }
  if (type == "uniform") {
    need(2);
    return DurationLaw::uniformLaw(params[0], params[1]);
  }
  if (type == "betaShifted") {
    need(2);
    return DurationLaw::betaShifted(params[0], params[1]);
  }
  if (type == "empirical") {
    if (table.empty()) fail("empirical law needs a table");
    return DurationLaw::empirical(table);
  }
  fail("unknown law type '" + type + "'");
}

InfectivityLaw InfectivitySpec::build() const {
  if (type == "zero") return InfectivityLaw::zero();
  if (type == "classical") {
    if (!period) fail("classical infectivity needs a period law");
    return InfectivityLaw::classical(lambda, period->build());
  }
  if (type == "covid") return InfectivityLaw::covidProfile(alpha, pReported);
  fail("unknown infectivity type '" + type + "'");
}

SusceptibilityLaw SusceptibilitySpec::build() const {
  if (type == "pureSIR") return SusceptibilityLaw::pureSIR();
  if (type == "waning") {
    KnotCurve g;
    g.interp = interp == "step" ? KnotCurve::Interp::StepRight : KnotCurve::Interp::Linear;
    if (interp != "step" && interp != "linear") fail("susceptibility.interp must be linear or step");
    g.knots = knots;
    if (g.knots.empty()) fail("waning susceptibility needs knots");
    return SusceptibilityLaw::deterministicWaning(g);
  }
  fail("unknown susceptibility type '" + type + "'");
}

ScenarioConfig ScenarioConfig::parse_string(const std::string& text) {
  json root = json::parse(text, nullptr, false);
  if (root.is_discarded()) fail("malformed JSON");
  check_keys(root, "config",
             {"experiment", "family", "N", "horizon", "meshStep", "seed", "replicates", "outDir",
              "rates", "initial", "laws", "infectivity", "infectivity0", "susceptibility",
              "compare", "pde", "vivs"});
  ScenarioConfig c;
  c.experiment = get_str(root, "config", "experiment", "");
  c.family = get_str(root, "config", "family", c.family);
  c.N = static_cast<std::size_t>(get_num(root, "config", "N", static_cast<double>(c.N)));
  c.horizon = get_num(root, "config", "horizon", c.horizon);
  c.meshStep = get_num(root, "config", "meshStep", c.meshStep);
  c.seed = static_cast<std::uint64_t>(get_num(root, "config", "seed", static_cast<double>(c.seed)));
  c.replicates = static_cast<std::size_t>(
      get_num(root, "config", "replicates", static_cast<double>(c.replicates)));
  c.outDir = get_str(root, "config", "outDir", c.outDir);

  if (root.contains("rates")) {
    const json& r = root["rates"];
    check_keys(r, "rates", {"lambda", "gamma", "rho", "mu", "nu"});
    c.lambda = get_num(r, "rates", "lambda", 0.0);
    c.gamma = get_num(r, "rates", "gamma", 0.0);
    c.rho = get_num(r, "rates", "rho", 0.0);
    c.mu = get_num(r, "rates", "mu", 0.0);
    c.nu = get_num(r, "rates", "nu", 0.0);
  }
  if (root.contains("initial")) {
    const json& r = root["initial"];
    check_keys(r, "initial", {"S0", "E0", "I0", "R0"});
    c.S0 = get_num(r, "initial", "S0", 0.0);
    c.E0 = get_num(r, "initial", "E0", 0.0);
    c.I0 = get_num(r, "initial", "I0", 0.0);
    c.R0 = get_num(r, "initial", "R0", 0.0);
  }
  if (root.contains("laws")) {
    const json& r = root["laws"];
    check_keys(r, "laws", {"F", "G", "F0", "G0"});
    if (r.contains("F")) c.F = parse_law(r["F"], "laws.F");
    if (r.contains("G")) c.G = parse_law(r["G"], "laws.G");
    if (r.contains("F0")) c.F0 = parse_law(r["F0"], "laws.F0");
    if (r.contains("G0")) c.G0 = parse_law(r["G0"], "laws.G0");
  }
  if (root.contains("infectivity"))
    c.infectivity = parse_infectivity(root["infectivity"], "infectivity");
  if (root.contains("infectivity0"))
    c.infectivity0 = parse_infectivity(root["infectivity0"], "infectivity0");
  if (root.contains("susceptibility"))
    c.susceptibility = parse_susceptibility(root["susceptibility"], "susceptibility");
  if (root.contains("compare")) {
    const json& r = root["compare"];
    check_keys(r, "compare",
               {"interventionDay", "contactFactor", "rho0", "meanExposed", "meanInfectious",
                "identical"});
    CompareSpec cs;
    cs.interventionDay = get_num(r, "compare", "interventionDay", cs.interventionDay);
    cs.contactFactor = get_num(r, "compare", "contactFactor", cs.contactFactor);
    cs.rho0 = get_num(r, "compare", "rho0", cs.rho0);
    cs.meanExposed = get_num(r, "compare", "meanExposed", cs.meanExposed);
    cs.meanInfectious = get_num(r, "compare", "meanInfectious", cs.meanInfectious);
    if (r.contains("identical")) {
      if (!r["identical"].is_boolean()) fail("compare.identical must be a boolean");
      cs.identical = r["identical"].get<bool>();
    }
    c.compare = cs;
  }
  if (root.contains("pde")) {
    const json& r = root["pde"];
    check_keys(r, "pde", {"mode", "ageMax", "r0"});
    PdeSpec ps;
    ps.mode = get_str(r, "pde", "mode", ps.mode);
    ps.ageMax = get_num(r, "pde", "ageMax", ps.ageMax);
    ps.r0 = get_num(r, "pde", "r0", ps.r0);
    c.pde = ps;
  }
  if (root.contains("vivs")) {
    const json& r = root["vivs"];
    check_keys(r, "vivs", {"mcSamples", "quadrature", "recoveredAge"});
    VivsSpec vs;
    vs.mcSamples =
        static_cast<std::size_t>(get_num(r, "vivs", "mcSamples", static_cast<double>(vs.mcSamples)));
    if (r.contains("quadrature")) {
      if (!r["quadrature"].is_boolean()) fail("vivs.quadrature must be a boolean");
      vs.quadrature = r["quadrature"].get<bool>();
    }
    if (r.contains("recoveredAge")) vs.recoveredAge = parse_law(r["recoveredAge"], "vivs.recoveredAge");
    c.vivs = vs;
  }
  c.validate();
  return c;
}

ScenarioConfig ScenarioConfig::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_string(ss.str());
}

std::string ScenarioConfig::canonical() const {
  json root;
  root["experiment"] = experiment;
  root["family"] = family;
  root["N"] = N;
  root["horizon"] = horizon;
  root["meshStep"] = meshStep;
  root["seed"] = static_cast<double>(seed);
  root["replicates"] = replicates;
  root["outDir"] = outDir;
  root["rates"] = {{"lambda", lambda}, {"gamma", gamma}, {"rho", rho}, {"mu", mu}, {"nu", nu}};
  root["initial"] = {{"S0", S0}, {"E0", E0}, {"I0", I0}, {"R0", R0}};
  json laws;
  if (F) laws["F"] = law_json(*F);
  if (G) laws["G"] = law_json(*G);
  if (F0) laws["F0"] = law_json(*F0);
  if (G0) laws["G0"] = law_json(*G0);
  if (!laws.is_null()) root["laws"] = laws;
  if (infectivity) root["infectivity"] = infectivity_json(*infectivity);
  if (infectivity0) root["infectivity0"] = infectivity_json(*infectivity0);
  if (susceptibility) root["susceptibility"] = susceptibility_json(*susceptibility);
  if (compare)
    root["compare"] = {{"interventionDay", compare->interventionDay},
                       {"contactFactor", compare->contactFactor},
                       {"rho0", compare->rho0},
                       {"meanExposed", compare->meanExposed},
                       {"meanInfectious", compare->meanInfectious},
                       {"identical", compare->identical}};
  if (pde) root["pde"] = {{"mode", pde->mode}, {"ageMax", pde->ageMax}, {"r0", pde->r0}};
  if (vivs) {
    json v = {{"mcSamples", vivs->mcSamples}, {"quadrature", vivs->quadrature}};
    if (vivs->recoveredAge) v["recoveredAge"] = law_json(*vivs->recoveredAge);
    root["vivs"] = v;
  }
  return root.dump(2) + "\n";
}

std::string ScenarioConfig::digest() const {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : canonical()) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void ScenarioConfig::validate() const {
  static const std::set<std::string> experiments = {"simulate",     "solve", "converge",
                                                    "fluctuations", "pde",   "analytics",
                                                    "vivs",         "compare"};
  // an empty experiment is allowed at parse time; the CLI fills it from the
  // subcommand and run_experiment rejects anything unknown
  if (!experiment.empty() && experiments.find(experiment) == experiments.end())
    fail("experiment must be one of simulate, solve, converge, fluctuations, pde, analytics, "
         "vivs, compare (got '" + experiment + "')");
  if (!(meshStep > 0.0)) fail("meshStep must be positive");
  if (!(horizon > 0.0)) fail("horizon must be positive");
  if (N < 1) fail("N must be at least 1");
  if (replicates < 1) fail("replicates must be at least 1");
  for (double v : {S0, E0, I0, R0})
    if (v < 0.0 || v > 1.0) fail("initial fractions must lie in [0, 1]");
}

ModelSpec ScenarioConfig::build_model() const {
  ModelSpec m;
  if (family == "markov-sir") m.family = AbmFamily::MarkovSir;
  else if (family == "markov-sis") m.family = AbmFamily::MarkovSis;
  else if (family == "markov-sirs") m.family = AbmFamily::MarkovSirs;
  else if (family == "markov-sir-demography") m.family = AbmFamily::MarkovSirDemography;
  else if (family == "nonmarkov-sir") m.family = AbmFamily::NonMarkovSir;
  else if (family == "nonmarkov-seir") m.family = AbmFamily::NonMarkovSeir;
  else if (family == "varying-infectivity") m.family = AbmFamily::VaryingInfectivity;
  else if (family == "varying-susceptibility") m.family = AbmFamily::VaryingSusceptibility;
  else fail("unknown model family '" + family + "'");
  m.N = N;
  m.lambda = lambda;
  m.gamma = gamma;
  m.rho = rho;
  m.mu = mu;
  if (F) m.F = F->build();
  if (G) m.G = G->build();
  if (F0) m.F0 = F0->build();
  if (G0) m.G0 = G0->build();
  if (infectivity) m.infectivity = infectivity->build();
  if (infectivity0) m.infectivity0 = infectivity0->build();
  if (susceptibility) m.susceptibility = susceptibility->build();
  auto count = [&](double frac) {
    return static_cast<std::size_t>(std::llround(frac * static_cast<double>(N)));
  };
  m.E0 = count(E0);
  m.I0 = count(I0);
  m.R0 = count(R0);
  m.S0 = N - m.E0 - m.I0 - m.R0;
  return m;
}

}  // namespace epi
