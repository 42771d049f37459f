// epiflow: scenario runner for the epidemic-modeling toolkit.
//
// Usage: epiflow <subcommand> --config scenario.json [--seed S] [--mesh-step H]
//                [--out DIR] [--replicates R]
//
// The subcommand must match the "experiment" field of the scenario unless the
// scenario omits it.  Exit codes: 0 success, 2 invalid input, 3 numerical
// failure.
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "epi/errors.hpp"
#include "epi/experiments.hpp"
#include "epi/scenario.hpp"

int main(int argc, char** argv) {
  CLI::App app{"epidemic-modeling scenario runner"};
  app.require_subcommand(1);

  std::string configPath;
  std::optional<std::uint64_t> seed;
  std::optional<double> meshStep;
  std::optional<std::string> outDir;
  std::optional<std::size_t> replicates;

  const std::vector<std::string> names = {"simulate",     "solve", "converge",
                                          "fluctuations", "pde",   "analytics",
                                          "vivs",         "compare"};
  for (const auto& name : names) {
    CLI::App* sub = app.add_subcommand(name, "run a '" + name + "' scenario");
    sub->add_option("--config", configPath, "scenario file (JSON)")->required();
    sub->add_option("--seed", seed, "override the scenario seed");
    sub->add_option("--mesh-step", meshStep, "override the scenario mesh step");
    sub->add_option("--out", outDir, "override the scenario output directory");
    sub->add_option("--replicates", replicates, "override the replicate count");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    epi::ScenarioConfig cfg = epi::ScenarioConfig::parse_file(configPath);
    const std::string sub = app.get_subcommands().front()->get_name();
    if (cfg.experiment.empty()) cfg.experiment = sub;
    if (cfg.experiment != sub)
      throw epi::ValidationError("config: scenario experiment '" + cfg.experiment +
                                 "' does not match subcommand '" + sub + "'");
    if (seed) cfg.seed = *seed;
    if (meshStep) cfg.meshStep = *meshStep;
    if (outDir) cfg.outDir = *outDir;
    if (replicates) cfg.replicates = *replicates;

    auto res = epi::run_experiment(cfg);
    epi::write_experiment(res, cfg.outDir);
    std::cout << res.summary << "\n";
    std::cout << "wrote " << res.files.size() + 1 << " file(s) to " << cfg.outDir << "\n";
    return 0;
  } catch (const epi::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const epi::NumericalError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
