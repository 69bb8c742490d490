#include "epflow/run.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>

#include "epflow/integrators.hpp"
#include "experiments.hpp"
#include "json.hpp"

namespace epflow::cli {

const char* code_version() { return "0.1.0"; }

int RunManifest::failures() const {
  int n = 0;
  for (const auto& m : members) n += m.ok ? 0 : 1;
  return n;
}

RunConfig apply_overrides(RunConfig config, const RunOptions& options) {
  if (options.seed) config.ensemble.seed = *options.seed;
  if (options.out_dir) config.output.directory = *options.out_dir;
  if (options.members) {
    if (*options.members < 1) throw ConfigError({"--members must be at least 1"});
    config.ensemble.members = *options.members;
  }
  return config;
}

RunManifest run_experiment(const RunConfig& input, const RunOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  const RunConfig config = apply_overrides(input, options);
  const std::filesystem::path dir = config.output.directory;
  std::filesystem::create_directories(dir);
  io::OutputSet out(dir, options.before_commit);

  detail::Context ctx{config, options, out,
                      options.workers > 0 ? options.workers : integrators::default_worker_count()};
  detail::ExperimentResult result;
  switch (config.experiment) {
    case Experiment::Homog: result = detail::run_homog(ctx); break;
    case Experiment::Rigidbody: result = detail::run_rigidbody(ctx); break;
    case Experiment::Vortex: result = detail::run_vortex(ctx); break;
    case Experiment::Euler2d: result = detail::run_euler2d(ctx); break;
  }

  RunManifest manifest;
  manifest.experiment = to_string(config.experiment);
  manifest.config_hash = config_hash(config);
  manifest.code_version = code_version();
  manifest.config = serialise(config);
  manifest.root_seed = config.ensemble.seed;
  manifest.members = std::move(result.members);
  manifest.files = out.files();
  manifest.file_sizes = out.sizes();
  manifest.summary = std::move(result.summary);
  manifest.wall_clock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  io::write_atomic(dir / "manifest.json", manifest_json(manifest), options.before_commit);
  return manifest;
}

std::string manifest_json(const RunManifest& m) {
  using nlohmann::json;
  json members = json::array();
  for (const auto& s : m.members) {
    json entry = {{"index", s.index}, {"seed", s.seed}, {"status", s.ok ? "ok" : "failed"}};
    if (!s.ok) entry["error"] = s.error;
    members.push_back(std::move(entry));
  }
  json files = json::array();
  for (std::size_t i = 0; i < m.files.size(); ++i) files.push_back({{"name", m.files[i]}, {"bytes", m.file_sizes[i]}});
  json summary = json::object();
  for (const auto& [key, value] : m.summary) summary[key] = std::isfinite(value) ? json(value) : json(nullptr);
  const json doc = {{"experiment", m.experiment},
                    {"config_hash", m.config_hash},
                    {"code_version", m.code_version},
                    {"config", json::parse(m.config)},
                    {"root_seed", m.root_seed},
                    {"wall_clock_seconds", m.wall_clock_seconds},
                    {"failures", m.failures()},
                    {"members", members},
                    {"files", files},
                    {"summary", summary}};
  return doc.dump(2) + "\n";
}

}  // namespace epflow::cli
