#include "epflow/rigid_body.hpp"

#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>
#include <variant>

#include "epflow/integrators.hpp"

namespace epflow::rigid {

using integrators::State;

const char* to_string(Scheme scheme) { return scheme == Scheme::Heun ? "heun" : "midpoint"; }

Scheme scheme_from_string(const std::string& name) {
  if (name == "heun") return Scheme::Heun;
  if (name == "midpoint") return Scheme::Midpoint;
  throw std::invalid_argument("unknown scheme '" + name + "'");
}

int RigidConfig::steps() const { return static_cast<int>(std::llround(T / dt)); }

void RigidConfig::validate() const {
  if (!(inertia.minCoeff() > 0.0)) throw std::invalid_argument("rigid body: inertia entries must be positive");
  if (!(dt > 0.0)) throw std::invalid_argument("rigid body: dt must be positive");
  if (!(T > 0.0)) throw std::invalid_argument("rigid body: T must be positive");
}

Eigen::Vector3d rb_drift(const Eigen::Vector3d& pi, const Eigen::Vector3d& inertia) {
  return pi.cross(pi.cwiseQuotient(inertia));
}

noise::NoiseBasis as_axis_basis(const noise::NoiseBasis& basis) {
  if (basis.kind() == noise::NoiseKind::So3Axis) return basis;
  if (basis.kind() != noise::NoiseKind::CustomLinear || basis.dimension() != 3) {
    throw std::invalid_argument("rigid body noise must be so3-axis or 3x3 custom-linear");
  }
  std::vector<Eigen::Vector3d> axes;
  for (const auto& m : basis.matrices()) {
    if ((m + m.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
      throw std::invalid_argument("rigid body custom-linear noise matrices must be skew-symmetric");
    }
    axes.push_back(-lie::vee(m));
  }
  return noise::NoiseBasis::so3_axis(std::move(axes)).with_gamma(basis.gamma()).with_sigma(basis.sigma());
}

namespace {

integrators::StepProblem rb_problem(const noise::NoiseBasis& basis, const Eigen::Vector3d& inertia) {
  integrators::StepProblem p;
  p.drift = [inertia](const State& x) -> State { return rb_drift(x.head<3>(), inertia); };
  for (int k = 0; k < basis.size(); ++k) {
    const Eigen::Vector3d a = basis.axes()[static_cast<std::size_t>(k)];
    p.diffusions.push_back([a](const State& x) -> State { return Eigen::Vector3d(x.head<3>().cross(a)); });
  }
  if (basis.gamma().cwiseAbs().maxCoeff() > 0.0) {
    Eigen::Vector3d axis = Eigen::Vector3d::Zero();
    for (int k = 0; k < basis.size(); ++k) {
      for (int l = k + 1; l < basis.size(); ++l) {
        axis += basis.gamma()(k, l) * basis.axes()[static_cast<std::size_t>(k)].cross(basis.axes()[static_cast<std::size_t>(l)]);
      }
    }
    if (axis.norm() > 0.0) {
      p.bracket_drift = [axis](const State& x) -> State { return Eigen::Vector3d(x.head<3>().cross(axis)); };
    }
  }
  return p;
}

State advance(const RigidConfig& c, const integrators::StepProblem& p, const State& x, const Eigen::VectorXd& dw) {
  if (c.scheme == Scheme::Heun) return integrators::heun_step(p, x, c.dt, dw);
  return integrators::midpoint_step_or_throw(p, x, c.dt, dw, c.tol, c.max_iter);
}

}  // namespace

std::vector<RigidState> simulate_rb(const RigidConfig& config, const Eigen::MatrixXd& increments) {
  config.validate();
  const noise::NoiseBasis basis = as_axis_basis(config.noise);
  const int n = config.steps();
  if (increments.rows() != n || increments.cols() != basis.size()) {
    throw std::invalid_argument("simulate_rb: increments must be " + std::to_string(n) + " x " +
                                std::to_string(basis.size()));
  }
  const auto frames = noise::generate_frame(basis, increments, config.dt);
  const integrators::StepProblem problem = rb_problem(basis, config.inertia);

  std::vector<RigidState> out;
  out.reserve(static_cast<std::size_t>(n) + 1);
  State x = config.pi0;
  for (int i = 0; i <= n; ++i) {
    if (i > 0) {
      try {
        x = advance(config, problem, x, increments.row(i - 1).transpose());
      } catch (const integrators::IntegrationError& e) {
        throw integrators::IntegrationError(std::string(e.what()) + " at step " + std::to_string(i));
      }
    }
    // The generated frame G satisfies G^-1 dG = hat(eta); Pi-bar = G Pi, so Xi = G^-1.
    const auto& g = std::get<lie::Rotation3>(frames[static_cast<std::size_t>(i)].frame);
    out.push_back({x, g.inverse(), config.dt * i});
  }
  return out;
}

std::vector<MeanSample> simulate_rb_mean(const RigidConfig& config, const std::vector<lie::Rotation3>& frames) {
  config.validate();
  const int n = config.steps();
  if (static_cast<int>(frames.size()) != n + 1) {
    throw std::invalid_argument("simulate_rb_mean: need one frame per grid point");
  }
  const Eigen::Matrix3d inv_inertia = config.inertia.cwiseInverse().asDiagonal();
  auto pulled = [&](int i) {
    const Eigen::Matrix3d& xi = frames[static_cast<std::size_t>(i)].matrix();
    return Eigen::Matrix3d(xi.transpose() * inv_inertia * xi);
  };
  std::vector<MeanSample> out;
  out.reserve(static_cast<std::size_t>(n) + 1);
  Eigen::Vector3d pibar = lie::coAd_so3(frames.front(), config.pi0);
  out.push_back({0.0, pibar});
  Eigen::Matrix3d a0 = pulled(0);
  for (int i = 1; i <= n; ++i) {
    const Eigen::Matrix3d a1 = pulled(i);
    const Eigen::Matrix3d a = 0.5 * (a0 + a1);
    integrators::StepProblem p;
    p.drift = [&a](const State& x) -> State {
      const Eigen::Vector3d v = x.head<3>();
      return Eigen::Vector3d(v.cross(a * v));
    };
    pibar = integrators::midpoint_step_or_throw(p, pibar, config.dt, Eigen::VectorXd(), config.tol, config.max_iter);
    out.push_back({config.dt * i, pibar});
    a0 = a1;
  }
  return out;
}

AveragedOperator averaged_operator(const RigidConfig& config, int members, std::uint64_t seed, int workers) {
  config.validate();
  if (members < 1) throw std::invalid_argument("averaged_operator: M must be at least 1");
  const noise::NoiseBasis basis = as_axis_basis(config.noise);
  const int n = config.steps();
  const Eigen::Matrix3d inertia = config.inertia.asDiagonal();

  auto samples = integrators::run_ensemble(
      members, seed,
      [&](int, std::uint64_t s) {
        const auto path = integrators::make_brownian(s, basis.size(), config.dt, n);
        const auto frames = noise::generate_frame(basis, path.increments, config.dt);
        std::vector<Eigen::Matrix3d> e(frames.size());
        for (std::size_t i = 0; i < frames.size(); ++i) {
          // Xi^-1 I Xi with Xi = G^-1
          const Eigen::Matrix3d& g = std::get<lie::Rotation3>(frames[i].frame).matrix();
          e[i] = g * inertia * g.transpose();
        }
        return e;
      },
      workers);

  AveragedOperator op;
  op.dt = config.dt;
  op.members = members;
  op.mean.assign(static_cast<std::size_t>(n) + 1, Eigen::Matrix3d::Zero());
  op.standard_error.assign(static_cast<std::size_t>(n) + 1, Eigen::Matrix3d::Zero());
  std::vector<double> column(static_cast<std::size_t>(members));
  for (int i = 0; i <= n; ++i) {
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) {
        for (int m = 0; m < members; ++m) column[static_cast<std::size_t>(m)] = samples[static_cast<std::size_t>(m)][static_cast<std::size_t>(i)](r, c);
        const double mean = integrators::pairwise_sum(column) / members;
        double ss = 0.0;
        for (double v : column) ss += (v - mean) * (v - mean);
        op.mean[static_cast<std::size_t>(i)](r, c) = mean;
        op.standard_error[static_cast<std::size_t>(i)](r, c) =
            members > 1 ? std::sqrt(ss / (members - 1) / members) : 0.0;
      }
    }
  }
  return op;
}

std::vector<AveragedSample> simulate_rb_averaged(const RigidConfig& config, const AveragedOperator& op) {
  config.validate();
  const int n = config.steps();
  if (static_cast<int>(op.mean.size()) != n + 1) throw std::invalid_argument("simulate_rb_averaged: grid mismatch");
  auto sample = [](double t, const Eigen::Vector3d& p, const Eigen::Matrix3d& e) {
    AveragedSample s;
    s.t = t;
    s.momentum = p;
    s.omega = e.ldlt().solve(p);
    s.energy = 0.5 * s.omega.dot(p);
    s.casimir = 0.5 * p.squaredNorm();
    return s;
  };
  std::vector<AveragedSample> out;
  out.reserve(static_cast<std::size_t>(n) + 1);
  // Omega-bar(0) = I^-1 Pi0 since the frame starts at the identity.
  Eigen::Vector3d p = op.mean.front() * config.pi0.cwiseQuotient(config.inertia);
  out.push_back(sample(0.0, p, op.mean.front()));
  for (int i = 1; i <= n; ++i) {
    const Eigen::Matrix3d e_mid = 0.5 * (op.mean[static_cast<std::size_t>(i - 1)] + op.mean[static_cast<std::size_t>(i)]);
    const Eigen::Matrix3d e_inv = e_mid.inverse();
    integrators::StepProblem prob;
    prob.drift = [&e_inv](const State& x) -> State {
      const Eigen::Vector3d v = x.head<3>();
      return Eigen::Vector3d(v.cross(e_inv * v));
    };
    p = integrators::midpoint_step_or_throw(prob, p, config.dt, Eigen::VectorXd(), config.tol, config.max_iter);
    out.push_back(sample(config.dt * i, p, op.mean[static_cast<std::size_t>(i)]));
  }
  return out;
}

std::vector<RbDiagnostic> rb_diagnostics(const std::vector<RigidState>& trajectory, const Eigen::Vector3d& inertia) {
  std::vector<RbDiagnostic> out;
  out.reserve(trajectory.size());
  for (const auto& s : trajectory) {
    out.push_back({s.t, 0.5 * s.pi.dot(s.pi.cwiseQuotient(inertia)), 0.5 * s.pi.squaredNorm()});
  }
  return out;
}

Eigen::Vector3d kubo_solution(const Eigen::Vector3d& pi0, const Eigen::Vector3d& inertia, double sigma, double t,
                              double w) {
  const double c = pi0(2) * (1.0 / inertia(2) - 1.0 / inertia(0));
  const std::complex<double> z = std::complex<double>(pi0(0), pi0(1)) *
                                 std::exp(std::complex<double>(0.0, -(c * t + sigma * w)));
  return {z.real(), z.imag(), pi0(2)};
}

}  // namespace epflow::rigid
