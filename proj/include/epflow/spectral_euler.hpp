#pragma once

#include <complex>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "epflow/noise.hpp"

namespace epflow::euler2d {

/// Row-major grid: entry (i, j) sits at (x_j, y_i) = 2 pi (j, i) / N.
using Grid = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Spectrum = std::vector<std::complex<double>>;  // N x (N/2 + 1), unnormalised r2c layout

struct VorticityField {
  Grid values;
  double t = 0.0;

  int n() const { return static_cast<int>(values.rows()); }
  static VorticityField sample(int n, const std::function<double(double, double)>& f);
};

struct VelocityField {
  Grid u;
  Grid v;
};

/// Forward and inverse real transforms on the N x N grid.
Spectrum forward(const Grid& g);
Grid inverse(const Spectrum& s, int n);

/// 2/3-rule truncation: keep |k_x|, |k_y| <= N/3.
void dealias(Spectrum& s, int n);
VorticityField dealiased(const VorticityField& w);

/// u = grad^perp psi = (-psi_y, psi_x), Laplacian psi = omega, zero mean mode.
/// Throws std::invalid_argument when the mean of omega exceeds 1e-12 (scaled by max(1, max|omega|)).
VelocityField biot_savart(const VorticityField& w);
/// Stream function psi.
Grid stream_function(const VorticityField& w);

/// max |div u| over the grid, by spectral differentiation of the grid velocity.
double max_divergence(const VelocityField& vel);

/// Material loop carried by the full stochastic flow; positions are not
/// wrapped, so the last marker connects back to the first.
struct LoopMarkers {
  std::vector<Eigen::Vector2d> points;
  static LoopMarkers circle(const Eigen::Vector2d& center, double radius, int count);
};

/// Velocity sampled by bicubic (4 x 4 Lagrange) periodic interpolation of a
/// spectrally upsampled copy of the field (refine >= 1).
class VelocityInterpolator {
 public:
  VelocityInterpolator(const VelocityField& vel, int refine = 4);
  Eigen::Vector2d operator()(const Eigen::Vector2d& x) const;

 private:
  Grid u_;
  Grid v_;
  int m_ = 0;
};

struct StepInfo {
  double cfl = 0.0;
  bool cfl_warning = false;
  double max_divergence = 0.0;  // over both Heun stages
};

struct StepOptions {
  /// Add the 1/2 Gamma^{kl} [xi_k, xi_l] transport term (zero for constant fields).
  bool include_bracket = true;
  bool check_divergence = true;
  int interpolation_refine = 4;
};

/// Heun step of d omega + (u + sum_k xi_k dW^k / dt) . grad omega dt = 0,
/// dealiased by the 2/3 rule, with loop markers (optional) advected by the
/// same two stage velocities. Throws integrators::IntegrationError on a
/// non-finite field; sets cfl_warning when CFL > 1.
StepInfo step_salt_euler(VorticityField& w, const noise::NoiseBasis& basis, double dt, const Eigen::VectorXd& dw,
                         LoopMarkers* loop = nullptr, const StepOptions& options = {});

/// omega(x - s) by exact trigonometric shift.
VorticityField shift_field(const VorticityField& w, const Eigen::Vector2d& s);

/// Deterministic Euler from omega0 over [0, T] with step dt_det, then the
/// shift by sum_k xi_k W_T^k.
VorticityField translation_oracle(const VorticityField& w0, const noise::NoiseBasis& basis,
                                  const Eigen::VectorXd& w_end, double T, double dt_det);

/// Trapezoid rule for the loop integral of u . x'(s) over the uniformly
/// parametrised markers, with x'(s) from the trigonometric interpolant of the
/// marker positions.
double loop_circulation(const VelocityInterpolator& u, const LoopMarkers& loop);
double loop_circulation(const VelocityField& vel, const LoopMarkers& loop, int refine = 4);

struct Euler2dDiagnostics {
  double energy = 0.0;        // 1/2 int |u|^2
  double enstrophy = 0.0;     // 1/2 int omega^2
  double palinstrophy = 0.0;  // 1/2 int |grad omega|^2
};
Euler2dDiagnostics euler2d_diagnostics(const VorticityField& w);

/// int omega^p, exact for band-limited omega via a zero-padded grid (p <= 5
/// for a 2/3-truncated field).
double casimir_integral(const VorticityField& w, int power);

/// Continuous L2 norm sqrt(int (a - b)^2) over the torus.
double l2_distance(const VorticityField& a, const VorticityField& b);

/// Flat binary snapshot: "EPFW", uint32 endianness tag 0x01020304, uint32 N,
/// float64 t, N*N float64 values in row-major order, native byte order.
void write_snapshot(const std::filesystem::path& path, const VorticityField& w);
VorticityField read_snapshot(const std::filesystem::path& path);
std::string encode_snapshot(const VorticityField& w);

}  // namespace epflow::euler2d
