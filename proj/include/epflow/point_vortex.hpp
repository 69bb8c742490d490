#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "epflow/integrators.hpp"
#include "epflow/lie.hpp"
#include "epflow/noise.hpp"

namespace epflow::vortex {

/// Two vortices closer than kCoincidence abort the run.
inline constexpr double kCoincidence = 1e-10;

class CoincidenceError : public integrators::IntegrationError {
 public:
  using integrators::IntegrationError::IntegrationError;
};

struct VortexState {
  std::vector<Eigen::Vector2d> positions;
  std::vector<double> strengths;
  lie::PlanarIsometry frame;
  double t = 0.0;

  int size() const { return static_cast<int>(positions.size()); }
};

/// Sum(G x) / Sum(G); the plain centroid when |Sum G| < 1e-12.
Eigen::Vector2d center_of_vorticity(const std::vector<Eigen::Vector2d>& x, const std::vector<double>& strengths);

/// u(x_a) = -(1/2pi) sum_{b != a} G_b (x_a - x_b)^perp / |x_a - x_b|^2, (p, q)^perp = (-q, p).
std::vector<Eigen::Vector2d> pv_velocity(const std::vector<Eigen::Vector2d>& x, const std::vector<double>& strengths);

enum class PvScheme {
  Midpoint,
  Heun,
  /// Deterministic midpoint step, then the exact flows of the rotation and
  /// translation fields over the step.
  Split,
};

const char* to_string(PvScheme scheme);
PvScheme pv_scheme_from_string(const std::string& name);

struct PvOptions {
  double T = 1.0;
  double dt = 1e-3;
  PvScheme scheme = PvScheme::Midpoint;
  double tol = 1e-13;
  int max_iter = 50;
};

/// dx_a = u(x_a) dt + sum_k xi_k(x_a) o dW^k (+ bracket drift when Gamma != 0),
/// with the rotation field pivoting about the instantaneous centre of
/// vorticity. The recorded frame is the closed-form isometry for the circle
/// through the initial configuration: rotation by -angular_rate(rho*) W^1
/// about x_c(0) and translation (-b, a) W^2, rho* the mean initial distance
/// to x_c(0). `increments` is steps x 2.
std::vector<VortexState> simulate_pv(const VortexState& state0, const noise::NoiseBasis& basis,
                                     const PvOptions& options, const Eigen::MatrixXd& increments);

/// x-bar_a(t) = Xi_t^-1(x_a(t)) for every sample.
std::vector<VortexState> frame_pullback(const std::vector<VortexState>& trajectory);

struct PvDiagnostic {
  double t = 0.0;
  double hamiltonian = 0.0;
  std::vector<double> side_lengths;  // |x_a - x_b| for a < b, row-major
  Eigen::Vector2d center = Eigen::Vector2d::Zero();
  double angular_impulse = 0.0;  // sum G_a |x_a - x_c|^2
};

/// H = -(1/4pi) sum_{a != b} G_a G_b log |x_a - x_b|
double hamiltonian(const std::vector<Eigen::Vector2d>& x, const std::vector<double>& strengths);

PvDiagnostic pv_diagnostic(const VortexState& state);
std::vector<PvDiagnostic> pv_diagnostics(const std::vector<VortexState>& trajectory);

/// Equilateral triangle of unit-strength vortices on the circle of radius rho
/// about `center`, first vertex at angle `phase`.
VortexState equilateral_triangle(double rho, const Eigen::Vector2d& center = Eigen::Vector2d::Zero(),
                                 double phase = 0.0);

}  // namespace epflow::vortex
