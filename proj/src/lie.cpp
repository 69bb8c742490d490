#include "epflow/lie.hpp"

#include <cmath>
#include <stdexcept>

namespace epflow::lie {

Eigen::Matrix3d hat(const AlgebraVec3& v) {
  Eigen::Matrix3d m;
  m << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
       -v.y(), v.x(), 0.0;
  return m;
}

AlgebraVec3 vee(const Eigen::Matrix3d& m) {
  return {0.5 * (m(2, 1) - m(1, 2)), 0.5 * (m(0, 2) - m(2, 0)), 0.5 * (m(1, 0) - m(0, 1))};
}

Rotation3::Rotation3(const Eigen::Matrix3d& m, double tol) : m_(m) {
  if (!m.allFinite() || orthogonality_defect() > tol) {
    throw std::invalid_argument("Rotation3: matrix is not in SO(3)");
  }
}

Rotation3 Rotation3::inverse() const { return Rotation3(m_.transpose(), Unchecked{}); }

Rotation3 Rotation3::compose(const Rotation3& rhs) const {
  Rotation3 out(m_ * rhs.m_, Unchecked{});
  out.updates_ = updates_ + rhs.updates_;
  out.count_update();
  return out;
}

void Rotation3::premultiply(const Rotation3& lhs) {
  m_ = lhs.m_ * m_;
  count_update();
}

void Rotation3::postmultiply(const Rotation3& rhs) {
  m_ = m_ * rhs.m_;
  count_update();
}

double Rotation3::orthogonality_defect() const {
  const double ortho = (m_ * m_.transpose() - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
  return std::max(ortho, std::abs(m_.determinant() - 1.0));
}

Eigen::Matrix3d Rotation3::project(const Eigen::Matrix3d& m) {
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d u = svd.matrixU();
  const Eigen::Matrix3d& v = svd.matrixV();
  if ((u * v.transpose()).determinant() < 0.0) u.col(2) *= -1.0;
  return u * v.transpose();
}

void Rotation3::count_update() {
  if (++updates_ >= kReorthonormaliseEvery) {
    m_ = project(m_);
    updates_ = 0;
  }
}

Rotation3 rot_exp(const AlgebraVec3& v) {
  const double theta2 = v.squaredNorm();
  const double theta = std::sqrt(theta2);
  double a;  // sin(theta)/theta
  double b;  // (1 - cos(theta))/theta^2
  if (theta < 1e-6) {
    a = 1.0 - theta2 / 6.0 + theta2 * theta2 / 120.0;
    b = 0.5 - theta2 / 24.0 + theta2 * theta2 / 720.0;
  } else {
    a = std::sin(theta) / theta;
    b = (1.0 - std::cos(theta)) / theta2;
  }
  const Eigen::Matrix3d k = hat(v);
  return Rotation3(Eigen::Matrix3d::Identity() + a * k + b * k * k);
}

AlgebraVec3 coad_so3(const AlgebraVec3& omega, const AlgebraVec3& pi) { return pi.cross(omega); }

AlgebraVec3 coAd_so3(const Rotation3& xi, const AlgebraVec3& pi) {
  return xi.matrix().transpose() * pi;
}

Eigen::Matrix2d rot2(double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  Eigen::Matrix2d r;
  r << c, -s, s, c;
  return r;
}

Eigen::Vector2d PlanarIsometry::apply(const Eigen::Vector2d& x) const {
  return rot2(angle) * (x - pivot) + pivot + translation;
}

Eigen::Vector2d PlanarIsometry::apply_inverse(const Eigen::Vector2d& y) const {
  return rot2(-angle) * (y - pivot - translation) + pivot;
}

}  // namespace epflow::lie
