#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "epflow/noise.hpp"

namespace epflow::cli {

inline constexpr int kSchemaVersion = 1;

enum class Experiment { Homog, Rigidbody, Vortex, Euler2d };

const char* to_string(Experiment e);
/// Throws std::invalid_argument for unknown names.
Experiment experiment_from_string(const std::string& name);

struct IntegratorBlock {
  std::string scheme = "midpoint";  // heun | midpoint | split (vortex only)
  double dt = 1e-3;
  double T = 1.0;
  double tol = 1e-14;
  int max_iter = 50;
};

struct EnsembleBlock {
  int members = 1;
  std::uint64_t seed = 1;
};

struct GammaBlock {
  std::string source = "zero";  // zero | explicit | estimated
  Eigen::MatrixXd matrix;      // K x K, explicit only
};

/// Fields by kind:
///   so3-axis: axes (K x 3)
///   torus-constant: vectors (K x d)
///   planar-killing: amplitude, decay, a, b
///   custom-linear: matrices (K square matrices)
struct NoiseBlock {
  std::string kind;
  std::vector<std::vector<double>> vectors;
  std::vector<Eigen::MatrixXd> matrices;
  double amplitude = 1.0;
  double decay = 0.0;
  double a = 0.0;
  double b = 0.0;
  GammaBlock gamma;
};

struct HomogBlock {
  std::string fast = "ou-surrogate";  // ou-surrogate | lorenz63
  double ou_rate = 1.0;
  Eigen::MatrixXd ou_covariance = Eigen::MatrixXd::Identity(1, 1);
  double base_step = 0.05;
  double burn_in = 20.0;
  double calibration_time = 1e4;
  std::vector<double> epsilons{0.2, 0.1, 0.05, 0.02};
  int slow_steps = 64;
  std::vector<double> x0{0.0};
  std::string mean_velocity = "zero";  // zero | constant | shear
  std::vector<double> mean_vector;
  double mean_amplitude = 0.0;
  bool couple_limit = true;
  double alpha = 0.05;
};

struct RigidBlock {
  std::vector<double> inertia{1.0, 1.0, 2.0};
  std::vector<double> pi0{1.0, 0.0, 2.0};
  /// Monte Carlo frames for the averaged run; 0 disables it.
  int averaged_members = 0;
};

struct VortexBlock {
  /// Either explicit positions/strengths or an equilateral triangle of the given radius.
  std::vector<std::vector<double>> positions;
  std::vector<double> strengths;
  double triangle_radius = 0.0;
};

struct Euler2dBlock {
  int n = 64;
  std::string initial = "two-mode";  // cos-x | two-mode | triad
  int loop_markers = 400;
  double loop_radius = 1.0;
  std::vector<double> loop_center{3.141592653589793, 3.141592653589793};
  /// Step of the deterministic run behind the oracle column; 0 means dt.
  double dt_det = 0.0;
  int snapshot_stride = 0;  // 0: initial and final snapshots only
};

struct OutputBlock {
  std::string directory = "out";
  int stride = 1;
  /// csv, jsonl, bin; defaults: homog csv+jsonl, euler2d csv+bin, others csv.
  std::vector<std::string> formats{"csv"};

  bool wants(const std::string& f) const;
};

struct RunConfig {
  int schema_version = kSchemaVersion;
  Experiment experiment = Experiment::Rigidbody;
  IntegratorBlock integrator;
  EnsembleBlock ensemble;
  NoiseBlock noise;
  HomogBlock homog;
  RigidBlock rigidbody;
  VortexBlock vortex;
  Euler2dBlock euler2d;
  OutputBlock output;
};

/// Every validation problem found in a document, one message per entry.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> errors);
  const std::vector<std::string>& errors() const { return errors_; }

 private:
  std::vector<std::string> errors_;
};

/// Parse and validate a JSON document. Unknown keys and all invalid or
/// missing values are collected and thrown together as ConfigError.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);

/// Canonical JSON with every field explicit (sorted keys, two-space indent).
std::string serialise(const RunConfig& config);

/// FNV-1a 64 of the compact canonical form, as 16 hex digits.
std::string config_hash(const RunConfig& config);

bool operator==(const RunConfig& a, const RunConfig& b);

/// Noise basis described by the block (gamma included when explicit).
noise::NoiseBasis build_noise(const NoiseBlock& block);

}  // namespace epflow::cli
