#pragma once

#include <Eigen/Dense>

namespace epflow::lie {

/// Element of so(3) in its R^3 representation. Used both for body angular
/// velocity and for angular momentum (via the pairing with so(3)*).
using AlgebraVec3 = Eigen::Vector3d;

/// Skew-symmetric matrix with hat(v) * w == v.cross(w).
Eigen::Matrix3d hat(const AlgebraVec3& v);

/// Inverse of hat on the skew part of m.
AlgebraVec3 vee(const Eigen::Matrix3d& m);

/// Element of SO(3) stored as a 3x3 matrix.
///
/// Composition counts updates; every kReorthonormaliseEvery compositions the
/// matrix is projected back onto SO(3) (polar decomposition) so that long SDE
/// runs do not drift off the group.
class Rotation3 {
 public:
  static constexpr int kReorthonormaliseEvery = 1000;

  Rotation3() : m_(Eigen::Matrix3d::Identity()) {}

  /// Throws std::invalid_argument if m is not orthogonal with unit determinant
  /// to within tol per entry.
  explicit Rotation3(const Eigen::Matrix3d& m, double tol = 1e-10);

  static Rotation3 identity() { return {}; }

  const Eigen::Matrix3d& matrix() const { return m_; }
  Rotation3 inverse() const;
  Eigen::Vector3d apply(const Eigen::Vector3d& x) const { return m_ * x; }

  /// this * rhs
  Rotation3 compose(const Rotation3& rhs) const;
  /// Replace with lhs * this (left multiplication), counting the update.
  void premultiply(const Rotation3& lhs);
  /// Replace with this * rhs (right multiplication), counting the update.
  void postmultiply(const Rotation3& rhs);

  /// Max entrywise |R R^T - I| and |det R - 1|.
  double orthogonality_defect() const;

  int updates_since_projection() const { return updates_; }

  /// Nearest rotation in Frobenius norm.
  static Eigen::Matrix3d project(const Eigen::Matrix3d& m);

 private:
  struct Unchecked {};
  Rotation3(const Eigen::Matrix3d& m, Unchecked) : m_(m) {}
  void count_update();

  Eigen::Matrix3d m_;
  int updates_ = 0;
};

/// Group exponential exp(hat(v)) by the Rodrigues formula.
Rotation3 rot_exp(const AlgebraVec3& v);

/// Infinitesimal coadjoint action ad*_omega pi = pi x omega.
AlgebraVec3 coad_so3(const AlgebraVec3& omega, const AlgebraVec3& pi);

/// Coadjoint action Ad*_xi pi = xi^{-1} pi = xi^T pi.
AlgebraVec3 coAd_so3(const Rotation3& xi, const AlgebraVec3& pi);

/// Planar rotation by angle about pivot followed by a translation:
/// x -> Rot(angle) (x - pivot) + pivot + translation.
struct PlanarIsometry {
  double angle = 0.0;
  Eigen::Vector2d translation = Eigen::Vector2d::Zero();
  Eigen::Vector2d pivot = Eigen::Vector2d::Zero();

  Eigen::Vector2d apply(const Eigen::Vector2d& x) const;
  Eigen::Vector2d apply_inverse(const Eigen::Vector2d& y) const;
};

Eigen::Matrix2d rot2(double angle);

}  // namespace epflow::lie
