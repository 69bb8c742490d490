#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "epflow/lie.hpp"
#include "epflow/noise.hpp"

namespace epflow::rigid {

enum class Scheme { Heun, Midpoint };

const char* to_string(Scheme scheme);
Scheme scheme_from_string(const std::string& name);

struct RigidConfig {
  Eigen::Vector3d inertia{1.0, 1.0, 2.0};  // principal moments, all > 0
  Eigen::Vector3d pi0{1.0, 0.0, 2.0};
  /// so3-axis, or custom-linear with skew-symmetric 3x3 matrices.
  noise::NoiseBasis noise = noise::NoiseBasis::so3_axis({Eigen::Vector3d::UnitZ()});
  double T = 1.0;
  double dt = 1e-3;
  Scheme scheme = Scheme::Midpoint;
  double tol = 1e-14;
  int max_iter = 50;

  int steps() const;
  /// Throws std::invalid_argument on non-positive inertia, dt or T.
  void validate() const;
};

/// Pi, and Xi with Pi = Xi Pi-bar.
struct RigidState {
  Eigen::Vector3d pi = Eigen::Vector3d::Zero();
  lie::Rotation3 frame;
  double t = 0.0;
};

/// Pi x I^{-1} Pi
Eigen::Vector3d rb_drift(const Eigen::Vector3d& pi, const Eigen::Vector3d& inertia);

/// Noise axes a_k of the basis, with xi_k(Pi) = Pi x a_k. A skew matrix A
/// acts as A Pi = Pi x (-vee(A)). Throws for other kinds or non-skew matrices.
noise::NoiseBasis as_axis_basis(const noise::NoiseBasis& basis);

/// dPi = Pi x (Omega dt + a_k o dW^k + 1/2 Gamma^{kl} a_k x a_l dt) with the
/// frame built from the same increments (steps x K).
std::vector<RigidState> simulate_rb(const RigidConfig& config, const Eigen::MatrixXd& increments);

struct MeanSample {
  double t = 0.0;
  Eigen::Vector3d pi_bar = Eigen::Vector3d::Zero();
};

/// Random-coefficient form dPi-bar/dt = Pi-bar x Omega-bar,
/// Omega-bar = (Xi^-1 I Xi)^-1 Pi-bar, with the frames supplied (one per grid
/// point). Implicit midpoint with the operator averaged over the step.
std::vector<MeanSample> simulate_rb_mean(const RigidConfig& config, const std::vector<lie::Rotation3>& frames);

/// E-bar(t) = E[Xi_t^-1 I Xi_t] on the time grid, with entrywise standard errors.
struct AveragedOperator {
  double dt = 0.0;
  int members = 0;
  std::vector<Eigen::Matrix3d> mean;
  std::vector<Eigen::Matrix3d> standard_error;
};

AveragedOperator averaged_operator(const RigidConfig& config, int members, std::uint64_t seed, int workers = 0);

struct AveragedSample {
  double t = 0.0;
  Eigen::Vector3d momentum = Eigen::Vector3d::Zero();  // E-bar Omega-bar
  Eigen::Vector3d omega = Eigen::Vector3d::Zero();
  double energy = 0.0;   // 1/2 Omega-bar . E-bar Omega-bar
  double casimir = 0.0;  // 1/2 |E-bar Omega-bar|^2
};

/// d(E-bar Omega-bar)/dt = (E-bar Omega-bar) x Omega-bar by implicit midpoint.
std::vector<AveragedSample> simulate_rb_averaged(const RigidConfig& config, const AveragedOperator& op);

struct RbDiagnostic {
  double t = 0.0;
  double energy = 0.0;   // 1/2 Omega . I Omega
  double casimir = 0.0;  // 1/2 |Pi|^2
};

std::vector<RbDiagnostic> rb_diagnostics(const std::vector<RigidState>& trajectory, const Eigen::Vector3d& inertia);

/// Exact Kubo solution for I = diag(I1, I1, I3), noise sigma e3:
/// Pi1 + i Pi2 = (Pi1 + i Pi2)(0) exp(-i (c t + sigma W_t)), c = Pi3 (1/I3 - 1/I1).
Eigen::Vector3d kubo_solution(const Eigen::Vector3d& pi0, const Eigen::Vector3d& inertia, double sigma, double t,
                              double w);

}  // namespace epflow::rigid
