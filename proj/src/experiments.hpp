#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "epflow/config.hpp"
#include "epflow/output.hpp"
#include "epflow/run.hpp"

namespace epflow::cli::detail {

struct Context {
  const RunConfig& config;
  const RunOptions& options;
  io::OutputSet& out;
  int workers = 1;
};

struct ExperimentResult {
  std::vector<MemberStatus> members;
  std::vector<std::pair<std::string, double>> summary;
};

ExperimentResult run_homog(const Context& ctx);
ExperimentResult run_rigidbody(const Context& ctx);
ExperimentResult run_vortex(const Context& ctx);
ExperimentResult run_euler2d(const Context& ctx);

}  // namespace epflow::cli::detail
