#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "epflow/config.hpp"
#include "epflow/output.hpp"

namespace epflow::cli {

const char* code_version();

struct RunOptions {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<int> members;
  /// Worker threads; 0 uses EPFLOW_WORKERS or the hardware count.
  int workers = 0;
  /// Progress and warnings; nullptr silences them.
  std::ostream* log = nullptr;

  /// Fault injection: runs before each output file is renamed into place.
  io::CommitHook before_commit;
  /// Fault injection: runs at the start of every ensemble member; throwing
  /// integrators::IntegrationError marks that member failed.
  std::function<void(int member)> member_hook;
};

struct MemberStatus {
  int index = 0;
  std::uint64_t seed = 0;
  bool ok = true;
  std::string error;
};

struct RunManifest {
  std::string experiment;
  std::string config_hash;
  std::string code_version;
  std::string config;  // canonical form, overrides applied
  std::uint64_t root_seed = 0;
  double wall_clock_seconds = 0.0;
  std::vector<MemberStatus> members;
  std::vector<std::string> files;  // relative to the output directory, manifest excluded
  std::vector<std::uintmax_t> file_sizes;
  /// Headline numbers of the run, in a fixed order.
  std::vector<std::pair<std::string, double>> summary;

  int failures() const;
};

/// Config with the command-line overrides applied.
RunConfig apply_overrides(RunConfig config, const RunOptions& options);

/// Run the configured experiment with the overrides applied, write every
/// output atomically and the manifest (manifest.json) last. Member failures are recorded, not thrown.
RunManifest run_experiment(const RunConfig& config, const RunOptions& options = {});

std::string manifest_json(const RunManifest& manifest);

}  // namespace epflow::cli
