#pragma once

#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "epflow/lie.hpp"

namespace epflow::noise {

enum class NoiseKind { So3Axis, TorusConstant, PlanarKilling, CustomLinear };

const char* to_string(NoiseKind kind);
NoiseKind noise_kind_from_string(const std::string& name);

/// Parameters of the planar rotation + translation pair
///   xi_1(x) = A rho exp(-(r/2) rho^2) (y_2, -y_1),  y = x - pivot, rho = |y|
///   xi_2(x) = (-b, a)
/// `radius` is the circle on which xi_1 acts as a rigid rotation; it only
/// enters the closed-form frame.
struct PlanarKillingParams {
  double amplitude = 1.0;  // A
  double decay = 0.0;      // r
  double a = 0.0;
  double b = 0.0;
  Eigen::Vector2d pivot = Eigen::Vector2d::Zero();
  double radius = 1.0;

  /// Angular speed of the xi_1 flow at distance rho from the pivot
  /// (clockwise positive).
  double angular_rate(double rho) const;
};

/// The K noise vector fields together with the invariance-principle data
/// (Sigma, Gamma). Immutable after construction.
class NoiseBasis {
 public:
  static NoiseBasis so3_axis(std::vector<Eigen::Vector3d> axes);
  static NoiseBasis torus_constant(std::vector<Eigen::VectorXd> vectors);
  static NoiseBasis planar_killing(const PlanarKillingParams& params);
  static NoiseBasis custom_linear(std::vector<Eigen::MatrixXd> matrices);

  /// Throws std::invalid_argument unless gamma is K x K and exactly antisymmetric.
  NoiseBasis with_gamma(const Eigen::MatrixXd& gamma) const;
  /// Throws std::invalid_argument unless sigma is K x K, symmetric and PSD (tol 1e-10).
  NoiseBasis with_sigma(const Eigen::MatrixXd& sigma) const;
  NoiseBasis with_pivot(const Eigen::Vector2d& pivot) const;

  NoiseKind kind() const { return kind_; }
  int size() const { return k_; }
  /// Dimension of the state space the fields act on.
  int dimension() const { return dim_; }
  const Eigen::MatrixXd& gamma() const { return gamma_; }
  const Eigen::MatrixXd& sigma() const { return sigma_; }

  const std::vector<Eigen::Vector3d>& axes() const { return axes_; }
  const std::vector<Eigen::VectorXd>& vectors() const { return vectors_; }
  const std::vector<Eigen::MatrixXd>& matrices() const { return matrices_; }
  const PlanarKillingParams& planar() const { return planar_; }

  /// True when every pair of fields has vanishing commutator identically
  /// (constant fields, parallel so(3) axes, commuting matrices).
  bool commuting() const;

 private:
  NoiseKind kind_ = NoiseKind::TorusConstant;
  int k_ = 0;
  int dim_ = 0;
  Eigen::MatrixXd gamma_;
  Eigen::MatrixXd sigma_;
  std::vector<Eigen::Vector3d> axes_;
  std::vector<Eigen::VectorXd> vectors_;
  std::vector<Eigen::MatrixXd> matrices_;
  PlanarKillingParams planar_;
};

/// xi_k(x). Throws std::out_of_range for k outside [0, K).
Eigen::VectorXd xi_eval(const NoiseBasis& basis, int k, const Eigen::VectorXd& x);

/// D xi_k(x) . v
Eigen::VectorXd xi_jacobian_apply(const NoiseBasis& basis, int k, const Eigen::VectorXd& x,
                                  const Eigen::VectorXd& v);

/// Jacobi-Lie bracket [xi_k, xi_l](x) = D xi_l . xi_k - D xi_k . xi_l.
Eigen::VectorXd xi_commutator(const NoiseBasis& basis, int k, int l, const Eigen::VectorXd& x);

/// 1/2 sum_{k,l} Gamma^{kl} [xi_k, xi_l](x); zero when Gamma is zero.
Eigen::VectorXd bracket_drift(const NoiseBasis& basis, const Eigen::VectorXd& x);

/// Rotation (so3-axis), isometry (planar-killing), shift vector
/// (torus-constant) or matrix flow map (custom-linear).
using FrameValue = std::variant<lie::Rotation3, lie::PlanarIsometry, Eigen::VectorXd, Eigen::MatrixXd>;

struct FrameSample {
  double t = 0.0;
  FrameValue frame;
  Eigen::VectorXd brownian;
};

/// Stochastic frame driven by the given Brownian increments (one row per
/// step, K columns). Sample 0 is the identity at t = 0.
///
///  - so3-axis: Xi^{-1} dXi = hat(sum_k a_k o dW^k + 1/2 Gamma^{kl} a_k x a_l dt).
///    Parallel axes use the closed form rot_exp(sum_k a_k W^k_t); otherwise a
///    product of per-step exponentials.
///  - torus-constant: exact shift sum_k xi_k W^k_t.
///  - planar-killing: exact rotation by -angular_rate(radius) W^1_t about the
///    pivot composed with translation (-b, a) W^2_t.
///  - custom-linear: midpoint (Cayley) steps of dXi = (A_k o dW^k + B dt) Xi.
std::vector<FrameSample> generate_frame(const NoiseBasis& basis, const Eigen::MatrixXd& increments,
                                        double dt);

/// Apply a frame value to a point of the basis' state space.
Eigen::VectorXd apply_frame(const FrameValue& frame, const Eigen::VectorXd& x);

}  // namespace epflow::noise
