#pragma once
#include <string>
#include <utility>
#include <vector>

#include "epi/scenario.hpp"

namespace epi {

// Output of one experiment run, kept in memory so callers (and tests) can
// inspect exact bytes; write_experiment persists it to a directory.
struct ExperimentResult {
  std::vector<std::pair<std::string, std::string>> files;  // (name, content)
  std::string manifest;  // manifest.json content
  std::string summary;   // one-paragraph stdout summary
};

// Dispatches on cfg.experiment; throws ValidationError / NumericalError.
ExperimentResult run_experiment(const ScenarioConfig& cfg);

void write_experiment(const ExperimentResult& res, const std::string& outDir);

}  // namespace epi
