#include "epflow/noise.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace epflow::noise {

namespace {

void check_index(const NoiseBasis& basis, int k) {
  if (k < 0 || k >= basis.size()) {
    throw std::out_of_range("noise field index " + std::to_string(k) + " out of range [0, " +
                            std::to_string(basis.size()) + ")");
  }
}

bool all_parallel(const std::vector<Eigen::Vector3d>& axes) {
  for (std::size_t i = 0; i < axes.size(); ++i) {
    for (std::size_t j = i + 1; j < axes.size(); ++j) {
      const double scale = axes[i].norm() * axes[j].norm();
      if (axes[i].cross(axes[j]).norm() > 1e-14 * std::max(scale, 1.0)) return false;
    }
  }
  return true;
}

}  // namespace

const char* to_string(NoiseKind kind) {
  switch (kind) {
    case NoiseKind::So3Axis: return "so3-axis";
    case NoiseKind::TorusConstant: return "torus-constant";
    case NoiseKind::PlanarKilling: return "planar-killing";
    case NoiseKind::CustomLinear: return "custom-linear";
  }
  return "unknown";
}

NoiseKind noise_kind_from_string(const std::string& name) {
  if (name == "so3-axis") return NoiseKind::So3Axis;
  if (name == "torus-constant") return NoiseKind::TorusConstant;
  if (name == "planar-killing") return NoiseKind::PlanarKilling;
  if (name == "custom-linear") return NoiseKind::CustomLinear;
  throw std::invalid_argument("unknown noise kind '" + name + "'");
}

double PlanarKillingParams::angular_rate(double rho) const {
  return amplitude * rho * std::exp(-0.5 * decay * rho * rho);
}

NoiseBasis NoiseBasis::so3_axis(std::vector<Eigen::Vector3d> axes) {
  NoiseBasis b;
  b.kind_ = NoiseKind::So3Axis;
  b.k_ = static_cast<int>(axes.size());
  b.dim_ = 3;
  b.axes_ = std::move(axes);
  b.gamma_ = Eigen::MatrixXd::Zero(b.k_, b.k_);
  b.sigma_ = Eigen::MatrixXd::Identity(b.k_, b.k_);
  return b;
}

NoiseBasis NoiseBasis::torus_constant(std::vector<Eigen::VectorXd> vectors) {
  if (vectors.empty()) throw std::invalid_argument("torus-constant basis needs at least one vector");
  NoiseBasis b;
  b.kind_ = NoiseKind::TorusConstant;
  b.k_ = static_cast<int>(vectors.size());
  b.dim_ = static_cast<int>(vectors.front().size());
  for (const auto& v : vectors) {
    if (v.size() != b.dim_) throw std::invalid_argument("torus-constant vectors differ in dimension");
  }
  b.vectors_ = std::move(vectors);
  b.gamma_ = Eigen::MatrixXd::Zero(b.k_, b.k_);
  b.sigma_ = Eigen::MatrixXd::Identity(b.k_, b.k_);
  return b;
}

NoiseBasis NoiseBasis::planar_killing(const PlanarKillingParams& params) {
  NoiseBasis b;
  b.kind_ = NoiseKind::PlanarKilling;
  b.k_ = 2;
  b.dim_ = 2;
  b.planar_ = params;
  b.gamma_ = Eigen::MatrixXd::Zero(2, 2);
  b.sigma_ = Eigen::MatrixXd::Identity(2, 2);
  return b;
}

NoiseBasis NoiseBasis::custom_linear(std::vector<Eigen::MatrixXd> matrices) {
  if (matrices.empty()) throw std::invalid_argument("custom-linear basis needs at least one matrix");
  NoiseBasis b;
  b.kind_ = NoiseKind::CustomLinear;
  b.k_ = static_cast<int>(matrices.size());
  b.dim_ = static_cast<int>(matrices.front().rows());
  for (const auto& m : matrices) {
    if (m.rows() != b.dim_ || m.cols() != b.dim_) {
      throw std::invalid_argument("custom-linear matrices must be square and equal-sized");
    }
  }
  b.matrices_ = std::move(matrices);
  b.gamma_ = Eigen::MatrixXd::Zero(b.k_, b.k_);
  b.sigma_ = Eigen::MatrixXd::Identity(b.k_, b.k_);
  return b;
}

NoiseBasis NoiseBasis::with_gamma(const Eigen::MatrixXd& gamma) const {
  if (gamma.rows() != k_ || gamma.cols() != k_) throw std::invalid_argument("gamma must be K x K");
  if (gamma != -gamma.transpose()) throw std::invalid_argument("gamma must be antisymmetric");
  NoiseBasis b = *this;
  b.gamma_ = gamma;
  return b;
}

NoiseBasis NoiseBasis::with_sigma(const Eigen::MatrixXd& sigma) const {
  if (sigma.rows() != k_ || sigma.cols() != k_) throw std::invalid_argument("sigma must be K x K");
  if ((sigma - sigma.transpose()).cwiseAbs().maxCoeff() > 1e-10) {
    throw std::invalid_argument("sigma must be symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (sigma + sigma.transpose()));
  if (eig.eigenvalues().minCoeff() < -1e-10) throw std::invalid_argument("sigma must be PSD");
  NoiseBasis b = *this;
  b.sigma_ = sigma;
  return b;
}

NoiseBasis NoiseBasis::with_pivot(const Eigen::Vector2d& pivot) const {
  NoiseBasis b = *this;
  b.planar_.pivot = pivot;
  return b;
}

bool NoiseBasis::commuting() const {
  switch (kind_) {
    case NoiseKind::TorusConstant: return true;
    case NoiseKind::So3Axis: return all_parallel(axes_);
    case NoiseKind::PlanarKilling: return false;
    case NoiseKind::CustomLinear:
      for (int k = 0; k < k_; ++k) {
        for (int l = k + 1; l < k_; ++l) {
          const Eigen::MatrixXd c = matrices_[k] * matrices_[l] - matrices_[l] * matrices_[k];
          if (c.cwiseAbs().maxCoeff() > 1e-14) return false;
        }
      }
      return true;
  }
  return false;
}

Eigen::VectorXd xi_eval(const NoiseBasis& basis, int k, const Eigen::VectorXd& x) {
  check_index(basis, k);
  switch (basis.kind()) {
    case NoiseKind::So3Axis: {
      const Eigen::Vector3d pi = x.head<3>();
      return pi.cross(basis.axes()[k]);
    }
    case NoiseKind::TorusConstant: return basis.vectors()[k];
    case NoiseKind::PlanarKilling: {
      const auto& p = basis.planar();
      if (k == 1) return Eigen::Vector2d(-p.b, p.a);
      const Eigen::Vector2d y = x.head<2>() - p.pivot;
      return p.angular_rate(y.norm()) * Eigen::Vector2d(y.y(), -y.x());
    }
    case NoiseKind::CustomLinear: return basis.matrices()[k] * x;
  }
  return {};
}

Eigen::VectorXd xi_jacobian_apply(const NoiseBasis& basis, int k, const Eigen::VectorXd& x,
                                  const Eigen::VectorXd& v) {
  check_index(basis, k);
  switch (basis.kind()) {
    case NoiseKind::So3Axis: {
      const Eigen::Vector3d w = v.head<3>();
      return w.cross(basis.axes()[k]);
    }
    case NoiseKind::TorusConstant: return Eigen::VectorXd::Zero(basis.dimension());
    case NoiseKind::PlanarKilling: {
      if (k == 1) return Eigen::VectorXd::Zero(2);
      const auto& p = basis.planar();
      const Eigen::Vector2d y = x.head<2>() - p.pivot;
      const double rho = y.norm();
      const Eigen::Vector2d w = v.head<2>();
      Eigen::Vector2d out = p.angular_rate(rho) * Eigen::Vector2d(w.y(), -w.x());
      if (rho > 0.0) {
        // f(rho) = A rho exp(-r rho^2 / 2),  grad f = f'(rho) y / rho
        const double fprime = p.amplitude * std::exp(-0.5 * p.decay * rho * rho) * (1.0 - p.decay * rho * rho);
        out += fprime * (y.dot(w) / rho) * Eigen::Vector2d(y.y(), -y.x());
      }
      return out;
    }
    case NoiseKind::CustomLinear: return basis.matrices()[k] * v;
  }
  return {};
}

Eigen::VectorXd xi_commutator(const NoiseBasis& basis, int k, int l, const Eigen::VectorXd& x) {
  check_index(basis, k);
  check_index(basis, l);
  return xi_jacobian_apply(basis, l, x, xi_eval(basis, k, x)) -
         xi_jacobian_apply(basis, k, x, xi_eval(basis, l, x));
}

Eigen::VectorXd bracket_drift(const NoiseBasis& basis, const Eigen::VectorXd& x) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(x.size());
  const auto& g = basis.gamma();
  for (int k = 0; k < basis.size(); ++k) {
    for (int l = k + 1; l < basis.size(); ++l) {
      // Gamma antisymmetric and the bracket antisymmetric: the (k,l) and (l,k)
      // terms are equal, so 1/2 sum over all pairs = sum over k < l.
      if (g(k, l) != 0.0) out += g(k, l) * xi_commutator(basis, k, l, x);
    }
  }
  return out;
}

namespace {

Eigen::Vector3d so3_bracket_axis(const NoiseBasis& basis) {
  Eigen::Vector3d out = Eigen::Vector3d::Zero();
  const auto& axes = basis.axes();
  for (int k = 0; k < basis.size(); ++k) {
    for (int l = k + 1; l < basis.size(); ++l) out += basis.gamma()(k, l) * axes[k].cross(axes[l]);
  }
  return out;
}

Eigen::MatrixXd linear_bracket_matrix(const NoiseBasis& basis) {
  const int d = basis.dimension();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(d, d);
  const auto& a = basis.matrices();
  for (int k = 0; k < basis.size(); ++k) {
    for (int l = k + 1; l < basis.size(); ++l) {
      out += basis.gamma()(k, l) * (a[l] * a[k] - a[k] * a[l]);
    }
  }
  return out;
}

}  // namespace

std::vector<FrameSample> generate_frame(const NoiseBasis& basis, const Eigen::MatrixXd& increments,
                                        double dt) {
  if (increments.cols() != basis.size()) {
    throw std::invalid_argument("generate_frame: increments have " + std::to_string(increments.cols()) +
                                " columns, basis has K = " + std::to_string(basis.size()));
  }
  const auto steps = increments.rows();
  const int kdim = basis.size();
  std::vector<FrameSample> out;
  out.reserve(static_cast<std::size_t>(steps) + 1);

  Eigen::VectorXd w = Eigen::VectorXd::Zero(kdim);
  auto push = [&](double t, FrameValue frame) { out.push_back({t, std::move(frame), w}); };

  switch (basis.kind()) {
    case NoiseKind::So3Axis: {
      const bool closed_form = basis.commuting();
      const Eigen::Vector3d bracket = so3_bracket_axis(basis);
      lie::Rotation3 g;
      push(0.0, g);
      for (Eigen::Index n = 0; n < steps; ++n) {
        Eigen::Vector3d eta = bracket * dt;
        for (int k = 0; k < kdim; ++k) eta += basis.axes()[k] * increments(n, k);
        w += increments.row(n).transpose();
        if (closed_form) {
          Eigen::Vector3d total = bracket * dt * static_cast<double>(n + 1);
          for (int k = 0; k < kdim; ++k) total += basis.axes()[k] * w(k);
          g = lie::rot_exp(total);
        } else {
          g.postmultiply(lie::rot_exp(eta));
        }
        push(dt * static_cast<double>(n + 1), g);
      }
      break;
    }
    case NoiseKind::TorusConstant: {
      Eigen::VectorXd shift = Eigen::VectorXd::Zero(basis.dimension());
      push(0.0, shift);
      for (Eigen::Index n = 0; n < steps; ++n) {
        w += increments.row(n).transpose();
        shift.setZero();
        for (int k = 0; k < kdim; ++k) shift += basis.vectors()[k] * w(k);
        push(dt * static_cast<double>(n + 1), shift);
      }
      break;
    }
    case NoiseKind::PlanarKilling: {
      const auto& p = basis.planar();
      const double rate = p.angular_rate(p.radius);
      lie::PlanarIsometry iso;
      iso.pivot = p.pivot;
      push(0.0, iso);
      for (Eigen::Index n = 0; n < steps; ++n) {
        w += increments.row(n).transpose();
        iso.angle = -rate * w(0);
        iso.translation = Eigen::Vector2d(-p.b, p.a) * w(1);
        push(dt * static_cast<double>(n + 1), iso);
      }
      break;
    }
    case NoiseKind::CustomLinear: {
      const int d = basis.dimension();
      const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(d, d);
      const Eigen::MatrixXd bracket = linear_bracket_matrix(basis);
      Eigen::MatrixXd frame = id;
      push(0.0, frame);
      for (Eigen::Index n = 0; n < steps; ++n) {
        Eigen::MatrixXd m = bracket * dt;
        for (int k = 0; k < kdim; ++k) m += basis.matrices()[k] * increments(n, k);
        frame = (id - 0.5 * m).partialPivLu().solve((id + 0.5 * m) * frame);
        w += increments.row(n).transpose();
        push(dt * static_cast<double>(n + 1), frame);
      }
      break;
    }
  }
  return out;
}

Eigen::VectorXd apply_frame(const FrameValue& frame, const Eigen::VectorXd& x) {
  struct Visitor {
    const Eigen::VectorXd& x;
    Eigen::VectorXd operator()(const lie::Rotation3& r) const { return r.apply(x.head<3>()); }
    Eigen::VectorXd operator()(const lie::PlanarIsometry& iso) const { return iso.apply(x.head<2>()); }
    Eigen::VectorXd operator()(const Eigen::VectorXd& shift) const { return x + shift; }
    Eigen::VectorXd operator()(const Eigen::MatrixXd& m) const { return m * x; }
  };
  return std::visit(Visitor{x}, frame);
}

}  // namespace epflow::noise
