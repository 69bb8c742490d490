#include <cstdint>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "epflow/config.hpp"
#include "epflow/run.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitMemberFailure = 3;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stochastic Euler-Poincare flow laboratory"};
  app.set_version_flag("--version", epflow::cli::code_version());

  std::string experiment;
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<int> members;
  bool quiet = false;

  app.add_option("experiment", experiment, "homog | rigidbody | vortex | euler2d")->required();
  app.add_option("--config", config_path, "JSON run configuration")->required();
  app.add_option("--seed", seed, "Root seed (overrides ensemble.seed)");
  app.add_option("--out", out_dir, "Output directory (overrides output.directory)");
  app.add_option("--members", members, "Ensemble size (overrides ensemble.members)");
  app.add_flag("--quiet", quiet, "Suppress progress and warnings");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  epflow::cli::RunOptions options;
  options.seed = seed;
  options.out_dir = out_dir;
  options.members = members;
  options.log = quiet ? nullptr : &std::cerr;

  epflow::cli::RunConfig config;
  try {
    const auto wanted = epflow::cli::experiment_from_string(experiment);
    config = epflow::cli::apply_overrides(epflow::cli::load_config(config_path), options);
    if (config.experiment != wanted) {
      std::cerr << "config describes experiment '" << epflow::cli::to_string(config.experiment) << "', not '"
                << experiment << "'\n";
      return kExitConfig;
    }
  } catch (const epflow::cli::ConfigError& e) {
    for (const auto& msg : e.errors()) std::cerr << "config error: " << msg << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  }

  try {
    const auto manifest = epflow::cli::run_experiment(config, options);
    if (!quiet) {
      std::cerr << manifest.experiment << ": " << manifest.files.size() << " files in " << config.output.directory
                << " (" << manifest.wall_clock_seconds << " s)\n";
      for (const auto& [key, value] : manifest.summary) std::cerr << "  " << key << " = " << value << "\n";
    }
    if (manifest.failures() > 0) {
      std::cerr << manifest.failures() << " member(s) failed\n";
      return kExitMemberFailure;
    }
  } catch (const std::exception& e) {
    std::cerr << "run failed: " << e.what() << "\n";
    return kExitMemberFailure;
  }
  return kExitOk;
}
