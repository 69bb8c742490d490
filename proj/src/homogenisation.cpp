#include "epflow/homogenisation.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "epflow/statistics.hpp"

namespace epflow::homog {

using integrators::IntegrationError;
using integrators::NormalStream;

const char* to_string(FastKind kind) {
  return kind == FastKind::Lorenz63 ? "lorenz63" : "ou-surrogate";
}

FastKind fast_kind_from_string(const std::string& name) {
  if (name == "lorenz63") return FastKind::Lorenz63;
  if (name == "ou-surrogate") return FastKind::OuSurrogate;
  throw std::invalid_argument("unknown fast flow kind '" + name + "'");
}

int FastFlowSpec::state_dim() const {
  return kind == FastKind::Lorenz63 ? 3 : static_cast<int>(ou_covariance.rows());
}

FastFlowSpec lorenz63_default() {
  FastFlowSpec spec;
  spec.kind = FastKind::Lorenz63;
  spec.observable = Eigen::MatrixXd::Zero(2, 3);
  spec.observable(0, 0) = 1.0;
  spec.observable(1, 1) = 1.0;
  spec.offset = Eigen::VectorXd::Zero(2);
  spec.base_step = 0.005;
  return spec;
}

FastFlowSpec ou_surrogate(double rate, const Eigen::MatrixXd& covariance, double base_step) {
  if (rate <= 0.0) throw std::invalid_argument("ou-surrogate rate must be positive");
  FastFlowSpec spec;
  spec.kind = FastKind::OuSurrogate;
  spec.ou_rate = rate;
  spec.ou_covariance = covariance;
  const auto k = covariance.rows();
  spec.observable = Eigen::MatrixXd::Identity(k, k);
  spec.offset = Eigen::VectorXd::Zero(k);
  spec.base_step = base_step;
  return spec;
}

Eigen::MatrixXd ou_sigma(const FastFlowSpec& spec) {
  return spec.observable * (2.0 * spec.ou_covariance / spec.ou_rate) * spec.observable.transpose();
}

Eigen::MatrixXd sqrt_psd(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (m + m.transpose()));
  const Eigen::VectorXd roots = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * roots.asDiagonal() * eig.eigenvectors().transpose();
}

namespace {

struct Lorenz {
  double s, r, b;
  void operator()(const double* x, double* out) const {
    out[0] = s * (x[1] - x[0]);
    out[1] = x[0] * (r - x[2]) - x[1];
    out[2] = x[0] * x[1] - b * x[2];
  }
};

/// One RK4 step of the Lorenz state; `weights` receives the stage states'
/// RK4 combination (k1 + 2k2 + 2k3 + k4)/6 evaluated on the identity, i.e.
/// the average state used to integrate a linear observable.
void lorenz_rk4(const Lorenz& f, double* x, double h, double* avg_state) {
  double k1[3], k2[3], k3[3], k4[3], y[3];
  f(x, k1);
  for (int i = 0; i < 3; ++i) y[i] = x[i] + 0.5 * h * k1[i];
  double s2[3] = {y[0], y[1], y[2]};
  f(y, k2);
  for (int i = 0; i < 3; ++i) y[i] = x[i] + 0.5 * h * k2[i];
  double s3[3] = {y[0], y[1], y[2]};
  f(y, k3);
  for (int i = 0; i < 3; ++i) y[i] = x[i] + h * k3[i];
  double s4[3] = {y[0], y[1], y[2]};
  f(y, k4);
  for (int i = 0; i < 3; ++i) {
    avg_state[i] = (x[i] + 2.0 * s2[i] + 2.0 * s3[i] + s4[i]) / 6.0;
    x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
  }
}

bool finite3(const double* x) { return std::isfinite(x[0]) && std::isfinite(x[1]) && std::isfinite(x[2]); }

}  // namespace

Eigen::VectorXd sample_initial_state(const FastFlowSpec& spec, NormalStream& normal) {
  const int m = spec.state_dim();
  Eigen::VectorXd x(m);
  if (spec.kind == FastKind::OuSurrogate) {
    Eigen::VectorXd z(m);
    for (int i = 0; i < m; ++i) z(i) = normal();
    return sqrt_psd(spec.ou_covariance) * z;
  }
  double s[3] = {1.0 + 0.5 * normal(), 1.0 + 0.5 * normal(), 1.0 + 0.5 * normal()};
  const Lorenz f{spec.lorenz_sigma, spec.lorenz_rho, spec.lorenz_beta};
  const auto steps = static_cast<long>(std::ceil(spec.burn_in / spec.base_step));
  double avg[3];
  for (long n = 0; n < steps; ++n) lorenz_rk4(f, s, spec.base_step, avg);
  if (!finite3(s)) throw IntegrationError("lorenz63 burn-in produced a non-finite state");
  x << s[0], s[1], s[2];
  return x;
}

FastPath integrate_fast(const FastFlowSpec& spec, const Eigen::VectorXd& lambda0, double epsilon, double horizon,
                        int slow_steps, NormalStream* driver) {
  if (!(epsilon > 0.0 && epsilon <= 1.0)) throw std::invalid_argument("integrate_fast: epsilon must lie in (0, 1]");
  if (horizon <= 0.0 || slow_steps <= 0) throw std::invalid_argument("integrate_fast: bad horizon or slow grid");
  if (lambda0.size() != spec.state_dim()) throw std::invalid_argument("integrate_fast: initial state dimension");

  const int k = spec.noise_dim();
  const int m = spec.state_dim();
  const double slow_dt = horizon / slow_steps;
  const double eps2 = epsilon * epsilon;
  const int fine_per_slow = std::max(1, static_cast<int>(std::ceil(slow_dt / (eps2 * spec.base_step) - 1e-9)));
  const double h = slow_dt / (fine_per_slow * eps2);  // fast-time step
  const long total = static_cast<long>(slow_steps) * fine_per_slow;

  FastPath path;
  path.epsilon = epsilon;
  path.horizon = horizon;
  path.slow_steps = slow_steps;
  path.fine_per_slow = fine_per_slow;
  path.b_fine.resize(total + 1, k);
  path.b_fine.row(0).setZero();

  // Row-major copies of the observable for the inner loops.
  std::vector<double> obs(static_cast<std::size_t>(k * m));
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < m; ++j) obs[static_cast<std::size_t>(i * m + j)] = spec.observable(i, j);
  }
  auto observe = [&](const double* x, int i) {
    double v = -spec.offset(i);
    for (int j = 0; j < m; ++j) v += obs[static_cast<std::size_t>(i * m + j)] * x[j];
    return v;
  };

  std::vector<double> bcur(static_cast<std::size_t>(k), 0.0);

  if (spec.kind == FastKind::Lorenz63) {
    const Lorenz f{spec.lorenz_sigma, spec.lorenz_rho, spec.lorenz_beta};
    double x[3] = {lambda0(0), lambda0(1), lambda0(2)};
    double avg[3];
    for (long n = 0; n < total; ++n) {
      lorenz_rk4(f, x, h, avg);
      for (int i = 0; i < k; ++i) {
        bcur[static_cast<std::size_t>(i)] += epsilon * h * observe(avg, i);
        path.b_fine(n + 1, i) = bcur[static_cast<std::size_t>(i)];
      }
      if ((n + 1) % fine_per_slow == 0 && !finite3(x)) {
        throw IntegrationError("integrate_fast: lorenz63 state blew up at slow step " +
                               std::to_string((n + 1) / fine_per_slow) + " (epsilon " + std::to_string(epsilon) + ")");
      }
    }
    path.final_state = Eigen::Vector3d(x[0], x[1], x[2]);
    return path;
  }

  // OU surrogate: eta' = -rate eta + sqrt(2 rate) beta', lambda = C^{1/2} eta.
  // Crank-Nicolson keeps the exact stationary variance and makes the
  // trapezoid integral of eta an exact discrete identity.
  const Eigen::MatrixXd root = sqrt_psd(spec.ou_covariance);
  const Eigen::VectorXd eta0 = root.completeOrthogonalDecomposition().solve(lambda0);
  const double theta = spec.ou_rate;
  const double a = (1.0 - 0.5 * theta * h) / (1.0 + 0.5 * theta * h);
  const double c = std::sqrt(2.0 * theta) / (1.0 + 0.5 * theta * h);
  const double slow_sd = epsilon * std::sqrt(h);  // sd of slow-time driver increments

  std::vector<double> eta(eta0.data(), eta0.data() + m);
  std::vector<double> eta_next(static_cast<std::size_t>(m));
  std::vector<double> lam(static_cast<std::size_t>(m));
  std::vector<double> lam_next(static_cast<std::size_t>(m));
  std::vector<double> wcur(static_cast<std::size_t>(m), 0.0);
  const bool noisy = driver != nullptr;
  if (noisy) {
    path.driver.resize(slow_steps + 1, m);
    path.driver.row(0).setZero();
  }
  auto to_lambda = [&](const std::vector<double>& e, std::vector<double>& out) {
    for (int i = 0; i < m; ++i) {
      double v = 0.0;
      for (int j = 0; j < m; ++j) v += root(i, j) * e[static_cast<std::size_t>(j)];
      out[static_cast<std::size_t>(i)] = v;
    }
  };
  to_lambda(eta, lam);
  for (long n = 0; n < total; ++n) {
    for (int j = 0; j < m; ++j) {
      double dbeta = 0.0;
      if (noisy) {
        const double dw = slow_sd * (*driver)();
        wcur[static_cast<std::size_t>(j)] += dw;
        dbeta = dw / epsilon;
      }
      eta_next[static_cast<std::size_t>(j)] = a * eta[static_cast<std::size_t>(j)] + c * dbeta;
    }
    to_lambda(eta_next, lam_next);
    for (int i = 0; i < k; ++i) {
      bcur[static_cast<std::size_t>(i)] += epsilon * h * 0.5 * (observe(lam.data(), i) + observe(lam_next.data(), i));
      path.b_fine(n + 1, i) = bcur[static_cast<std::size_t>(i)];
    }
    eta.swap(eta_next);
    lam.swap(lam_next);
    if ((n + 1) % fine_per_slow == 0) {
      const long slow = (n + 1) / fine_per_slow;
      if (noisy) {
        for (int j = 0; j < m; ++j) path.driver(slow, j) = wcur[static_cast<std::size_t>(j)];
      }
      if (!std::isfinite(eta[0])) {
        throw IntegrationError("integrate_fast: ou-surrogate state blew up at slow step " + std::to_string(slow));
      }
    }
  }
  path.final_state = Eigen::Map<const Eigen::VectorXd>(lam.data(), m);
  return path;
}

FastFlowSpec calibrate_observable(const FastFlowSpec& spec, std::uint64_t seed, double t_fast) {
  if (spec.kind != FastKind::Lorenz63) return spec;
  NormalStream normal(seed);
  const Eigen::VectorXd x0 = sample_initial_state(spec, normal);
  const Lorenz f{spec.lorenz_sigma, spec.lorenz_rho, spec.lorenz_beta};
  const auto steps = static_cast<long>(std::ceil(t_fast / spec.base_step));
  const int k = spec.noise_dim();
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(k);
  Eigen::VectorXd sum2 = Eigen::VectorXd::Zero(k);
  double x[3] = {x0(0), x0(1), x0(2)};
  double avg[3];
  for (long n = 0; n < steps; ++n) {
    lorenz_rk4(f, x, spec.base_step, avg);
    const Eigen::VectorXd y = spec.observable * Eigen::Vector3d(x[0], x[1], x[2]);
    sum += y;
    sum2 += y.cwiseProduct(y);
  }
  const Eigen::VectorXd mean = sum / static_cast<double>(steps);
  const Eigen::VectorXd var = sum2 / static_cast<double>(steps) - mean.cwiseProduct(mean);
  const Eigen::VectorXd scale = var.cwiseSqrt().cwiseInverse();
  FastFlowSpec out = spec;
  out.observable = scale.asDiagonal() * spec.observable;
  out.offset = scale.cwiseProduct(mean);
  return out;
}

Eigen::VectorXd RoughLift::increment(int level, int j) const {
  const int stride = 1 << (levels - level);
  return (b.row((j + 1) * stride) - b.row(j * stride)).transpose();
}

RoughLift lift_samples(const Eigen::MatrixXd& samples, double horizon, int levels) {
  if (levels < 0 || levels > 24) throw std::invalid_argument("lift_samples: levels out of range");
  const Eigen::Index n = samples.rows() - 1;
  const Eigen::Index cells = Eigen::Index{1} << levels;
  if (n <= 0 || n % cells != 0) {
    throw std::invalid_argument("lift_samples: grid mismatch (" + std::to_string(n) +
                                " fine intervals not divisible by " + std::to_string(cells) + ")");
  }
  const Eigen::Index per_cell = n / cells;
  const int k = static_cast<int>(samples.cols());
  RoughLift lift;
  lift.horizon = horizon;
  lift.levels = levels;
  lift.b.resize(cells + 1, k);
  for (Eigen::Index i = 0; i <= cells; ++i) lift.b.row(i) = samples.row(i * per_cell) - samples.row(0);

  lift.bb.resize(static_cast<std::size_t>(levels) + 1);
  std::vector<double> delta(static_cast<std::size_t>(k));
  std::vector<double> rel(static_cast<std::size_t>(k));
  for (int l = 0; l <= levels; ++l) {
    const Eigen::Index intervals = Eigen::Index{1} << l;
    const Eigen::Index span = n / intervals;
    auto& level = lift.bb[static_cast<std::size_t>(l)];
    level.reserve(static_cast<std::size_t>(intervals));
    for (Eigen::Index j = 0; j < intervals; ++j) {
      Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(k, k);
      const Eigen::Index start = j * span;
      std::fill(rel.begin(), rel.end(), 0.0);
      for (Eigen::Index s = start; s < start + span; ++s) {
        for (int a = 0; a < k; ++a) delta[static_cast<std::size_t>(a)] = samples(s + 1, a) - samples(s, a);
        // linear segment: int (B_u - B_s) (x) dB_u = rel (x) delta + delta (x) delta / 2
        for (int a = 0; a < k; ++a) {
          const double ra = rel[static_cast<std::size_t>(a)] + 0.5 * delta[static_cast<std::size_t>(a)];
          for (int b = 0; b < k; ++b) acc(a, b) += ra * delta[static_cast<std::size_t>(b)];
        }
        for (int a = 0; a < k; ++a) rel[static_cast<std::size_t>(a)] += delta[static_cast<std::size_t>(a)];
      }
      level.push_back(std::move(acc));
    }
  }
  return lift;
}

RoughLift rough_lift(const FastPath& path, int levels) {
  if (levels < 0 || path.slow_steps % (1 << levels) != 0) {
    throw std::invalid_argument("rough_lift: grid mismatch, 2^" + std::to_string(levels) +
                                " does not divide the " + std::to_string(path.slow_steps) + " slow steps");
  }
  return lift_samples(path.b_fine, path.horizon, levels);
}

double chen_defect(const RoughLift& lift) {
  double worst = 0.0;
  for (int l = 0; l < lift.levels; ++l) {
    const auto intervals = static_cast<int>(lift.bb[static_cast<std::size_t>(l)].size());
    for (int j = 0; j < intervals; ++j) {
      const Eigen::MatrixXd& whole = lift.bb[static_cast<std::size_t>(l)][static_cast<std::size_t>(j)];
      const Eigen::MatrixXd& left = lift.bb[static_cast<std::size_t>(l + 1)][static_cast<std::size_t>(2 * j)];
      const Eigen::MatrixXd& right = lift.bb[static_cast<std::size_t>(l + 1)][static_cast<std::size_t>(2 * j + 1)];
      const Eigen::VectorXd dl = lift.increment(l + 1, 2 * j);
      const Eigen::VectorXd dr = lift.increment(l + 1, 2 * j + 1);
      const Eigen::MatrixXd cross = dl * dr.transpose();
      const double defect = (whole - left - right - cross).cwiseAbs().maxCoeff();
      const double scale = whole.cwiseAbs().maxCoeff() + left.cwiseAbs().maxCoeff() +
                           right.cwiseAbs().maxCoeff() + cross.cwiseAbs().maxCoeff();
      if (scale > 0.0) worst = std::max(worst, defect / scale);
    }
  }
  return worst;
}

HolderNorms holder_norms(const RoughLift& lift, double alpha) {
  HolderNorms out;
  for (int l = 0; l <= lift.levels; ++l) {
    const double len = lift.horizon / static_cast<double>(1 << l);
    for (int j = 0; j < (1 << l); ++j) {
      out.first = std::max(out.first, lift.increment(l, j).norm() / std::pow(len, alpha));
      out.second = std::max(out.second, lift.bb[static_cast<std::size_t>(l)][static_cast<std::size_t>(j)].norm() /
                                            std::pow(len, 2.0 * alpha));
    }
  }
  return out;
}

WipEstimate estimate_wip(const std::vector<RoughLift>& lifts, double epsilon) {
  if (lifts.size() < 2) throw std::invalid_argument("estimate_wip: need at least two lifts (M >= 2)");
  std::vector<Eigen::MatrixXd> outer;
  std::vector<Eigen::MatrixXd> area;
  std::vector<Eigen::MatrixXd> sym;
  outer.reserve(lifts.size());
  area.reserve(lifts.size());
  sym.reserve(lifts.size());
  for (const auto& lift : lifts) {
    if (std::abs(lift.horizon - 1.0) > 1e-12) throw std::invalid_argument("estimate_wip: lifts must span [0, 1]");
    const Eigen::VectorXd b1 = lift.b.bottomRows(1).transpose();
    outer.push_back(b1 * b1.transpose());
    const Eigen::MatrixXd& bb = lift.bb_full();
    area.push_back(0.5 * (bb - bb.transpose()));
    sym.push_back(0.5 * (bb + bb.transpose()));
  }
  const auto s = stats::jackknife_mean(outer);
  const auto g = stats::jackknife_mean(area);
  const auto r = stats::jackknife_mean(sym);
  WipEstimate est;
  est.sigma_hat = 0.5 * (s.mean + s.mean.transpose());
  est.sigma_se = s.standard_error;
  est.gamma_tilde_hat = g.mean;
  est.gamma_tilde_se = g.standard_error;
  est.symmetric_remainder = r.mean;
  est.members = static_cast<int>(lifts.size());
  est.epsilon = epsilon;
  return est;
}

noise::NoiseBasis limit_basis(const noise::NoiseBasis& sigma_fields, const Eigen::MatrixXd& sigma,
                              const Eigen::MatrixXd& gamma_tilde) {
  const int k = sigma_fields.size();
  if (sigma.rows() != k || gamma_tilde.rows() != k) throw std::invalid_argument("limit_basis: dimension mismatch");
  const Eigen::MatrixXd root = sqrt_psd(sigma);
  const Eigen::MatrixXd root_inv = root.completeOrthogonalDecomposition().pseudoInverse();
  Eigen::MatrixXd gamma = root_inv * gamma_tilde * root_inv.transpose();
  gamma = 0.5 * (gamma - gamma.transpose()).eval();

  noise::NoiseBasis out = sigma_fields;
  switch (sigma_fields.kind()) {
    case noise::NoiseKind::TorusConstant: {
      std::vector<Eigen::VectorXd> v(static_cast<std::size_t>(k), Eigen::VectorXd::Zero(sigma_fields.dimension()));
      for (int a = 0; a < k; ++a) {
        for (int j = 0; j < k; ++j) v[static_cast<std::size_t>(a)] += sigma_fields.vectors()[static_cast<std::size_t>(j)] * root(j, a);
      }
      out = noise::NoiseBasis::torus_constant(std::move(v));
      break;
    }
    case noise::NoiseKind::CustomLinear: {
      const int d = sigma_fields.dimension();
      std::vector<Eigen::MatrixXd> v(static_cast<std::size_t>(k), Eigen::MatrixXd::Zero(d, d));
      for (int a = 0; a < k; ++a) {
        for (int j = 0; j < k; ++j) v[static_cast<std::size_t>(a)] += sigma_fields.matrices()[static_cast<std::size_t>(j)] * root(j, a);
      }
      out = noise::NoiseBasis::custom_linear(std::move(v));
      break;
    }
    case noise::NoiseKind::So3Axis: {
      std::vector<Eigen::Vector3d> v(static_cast<std::size_t>(k), Eigen::Vector3d::Zero());
      for (int a = 0; a < k; ++a) {
        for (int j = 0; j < k; ++j) v[static_cast<std::size_t>(a)] += sigma_fields.axes()[static_cast<std::size_t>(j)] * root(j, a);
      }
      out = noise::NoiseBasis::so3_axis(std::move(v));
      break;
    }
    case noise::NoiseKind::PlanarKilling:
      throw std::invalid_argument("limit_basis: planar-killing fields are not supported");
  }
  return out.with_sigma(sigma).with_gamma(gamma);
}

integrators::RoughFields rough_fields(const noise::NoiseBasis& basis) {
  integrators::RoughFields f;
  for (int k = 0; k < basis.size(); ++k) {
    f.fields.push_back([basis, k](const integrators::State& x) { return noise::xi_eval(basis, k, x); });
  }
  f.jacobian_apply = [basis](int k, const integrators::State& x, const integrators::State& v) {
    return noise::xi_jacobian_apply(basis, k, x, v);
  };
  return f;
}

integrators::StepProblem step_problem(const noise::NoiseBasis& basis, integrators::VectorField drift) {
  integrators::StepProblem p;
  p.drift = std::move(drift);
  for (int k = 0; k < basis.size(); ++k) {
    p.diffusions.push_back([basis, k](const integrators::State& x) { return noise::xi_eval(basis, k, x); });
  }
  if (basis.gamma().cwiseAbs().maxCoeff() > 0.0 && !basis.commuting()) {
    p.bracket_drift = [basis](const integrators::State& x) { return noise::bracket_drift(basis, x); };
  }
  return p;
}

Eigen::MatrixXd integrate_xi_eps(const noise::NoiseBasis& basis, const FastPath& path, const Eigen::VectorXd& x0) {
  if (path.b_fine.cols() != basis.size()) throw std::invalid_argument("integrate_xi_eps: K mismatch");
  const int d = static_cast<int>(x0.size());
  Eigen::MatrixXd out(path.slow_steps + 1, d);
  out.row(0) = x0.transpose();
  if (basis.kind() == noise::NoiseKind::TorusConstant) {
    // Constant fields: Xi_t(x0) = x0 + sum_k sigma_k B^k_t exactly.
    for (int i = 1; i <= path.slow_steps; ++i) {
      Eigen::VectorXd x = x0;
      const Eigen::VectorXd b = path.b_at_slow(i);
      for (int k = 0; k < basis.size(); ++k) x += basis.vectors()[static_cast<std::size_t>(k)] * b(k);
      out.row(i) = x.transpose();
    }
    return out;
  }
  Eigen::VectorXd x = x0;
  Eigen::VectorXd db(basis.size());
  for (int i = 0; i < path.slow_steps; ++i) {
    for (int s = 0; s < path.fine_per_slow; ++s) {
      const Eigen::Index n = static_cast<Eigen::Index>(i) * path.fine_per_slow + s;
      db = (path.b_fine.row(n + 1) - path.b_fine.row(n)).transpose();
      const integrators::VectorField field = [&](const integrators::State& y) {
        integrators::State v = integrators::State::Zero(d);
        for (int k = 0; k < basis.size(); ++k) v += noise::xi_eval(basis, k, y) * db(k);
        return v;
      };
      x = integrators::rk4_step(field, x, 1.0);
    }
    out.row(i + 1) = x.transpose();
  }
  return out;
}

Eigen::MatrixXd integrate_xi_rde(const noise::NoiseBasis& basis, const RoughLift& lift, const Eigen::VectorXd& x0) {
  if (lift.k() != basis.size()) throw std::invalid_argument("integrate_xi_rde: K mismatch");
  const integrators::RoughFields fields = rough_fields(basis);
  const int cells = lift.grid_size();
  Eigen::MatrixXd out(cells + 1, x0.size());
  out.row(0) = x0.transpose();
  Eigen::VectorXd x = x0;
  const auto& finest = lift.bb.back();
  for (int j = 0; j < cells; ++j) {
    x = integrators::rde_step(fields, x, lift.increment(lift.levels, j), finest[static_cast<std::size_t>(j)], lift.dt());
    out.row(j + 1) = x.transpose();
  }
  return out;
}

CenteringResult centering_check(const FastFlowSpec& spec, std::uint64_t seed, double t_fast, int batches) {
  NormalStream normal(seed);
  const Eigen::VectorXd x0 = sample_initial_state(spec, normal);
  const FastPath path = integrate_fast(spec, x0, 1.0, t_fast, batches, &normal);
  const int k = spec.noise_dim();
  CenteringResult out{Eigen::VectorXd(k), Eigen::VectorXd(k)};
  const double len = t_fast / batches;
  for (int i = 0; i < k; ++i) {
    std::vector<double> means(static_cast<std::size_t>(batches));
    for (int b = 0; b < batches; ++b) {
      means[static_cast<std::size_t>(b)] = (path.b_at_slow(b + 1)(i) - path.b_at_slow(b)(i)) / len;
    }
    // each batch is one sample of a length-`len` average
    const auto est = stats::batch_means(means, batches);
    out.mean(i) = est.mean;
    out.standard_error(i) = est.standard_error;
  }
  return out;
}

Eigen::VectorXd MeanVelocity::eval(const Eigen::VectorXd& x) const {
  switch (kind) {
    case Kind::Zero: return Eigen::VectorXd::Zero(x.size());
    case Kind::Constant: return vector;
    case Kind::Shear: {
      Eigen::VectorXd u = Eigen::VectorXd::Zero(x.size());
      u(0) = amplitude * std::sin(x(1));
      return u;
    }
  }
  return {};
}

double kendall_tau(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  if (n != y.size() || n < 2) throw std::invalid_argument("kendall_tau: need two equal-length series");
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double a = (x[i] - x[j]) * (y[i] - y[j]);
      s += (a > 0.0) - (a < 0.0);
    }
  }
  return s / (0.5 * static_cast<double>(n * (n - 1)));
}

namespace {

/// g-bar_T(x0) for a steady mean velocity by RK4 with `steps` steps.
Eigen::VectorXd mean_flow(const MeanVelocity& u, const Eigen::VectorXd& x0, double horizon, int steps) {
  const integrators::VectorField f = [&u](const integrators::State& x) { return u.eval(x); };
  Eigen::VectorXd x = x0;
  for (int n = 0; n < steps; ++n) x = integrators::rk4_step(f, x, horizon / steps);
  return x;
}

}  // namespace

ConvergenceReport convergence_report(const ConvergenceSetup& setup) {
  if (setup.epsilons.size() < 2) throw std::invalid_argument("convergence_report: need at least two epsilon values");
  if (setup.members < 2) throw std::invalid_argument("convergence_report: need M >= 2");
  const bool compose = setup.mean_velocity.has_value() && setup.mean_velocity->kind != MeanVelocity::Kind::Zero;
  if (compose && setup.fields.kind() != noise::NoiseKind::TorusConstant) {
    throw std::invalid_argument("convergence_report: composition test needs torus-constant fields");
  }
  const int k = setup.fast.noise_dim();
  if (k != setup.fields.size()) throw std::invalid_argument("convergence_report: observable and basis K differ");
  const bool coupled = setup.couple_limit && setup.fast.kind == FastKind::OuSurrogate &&
                       setup.fast.observable.isIdentity() && setup.fast.state_dim() == k;
  const int d = static_cast<int>(setup.x0.size());
  const int slow = setup.slow_steps;
  const double dt = 1.0 / slow;

  Eigen::VectorXd start = setup.x0;
  if (compose) start = mean_flow(*setup.mean_velocity, setup.x0, 1.0, 4 * slow);

  ConvergenceReport report;
  std::vector<double> eps_list;
  std::vector<double> ks_list;
  for (std::size_t e = 0; e < setup.epsilons.size(); ++e) {
    const double eps = setup.epsilons[e];
    const std::uint64_t eps_seed = integrators::derive_member_seed(setup.seed, e);

    struct Member {
      RoughLift lift;
      Eigen::VectorXd endpoint;
      Eigen::MatrixXd driver;
      std::uint64_t seed;
    };
    auto members = integrators::run_ensemble(
        setup.members, eps_seed,
        [&](int, std::uint64_t seed) {
          NormalStream normal(seed);
          const Eigen::VectorXd lambda0 = sample_initial_state(setup.fast, normal);
          FastPath path = integrate_fast(setup.fast, lambda0, eps, 1.0, slow, &normal);
          Member out;
          out.seed = seed;
          out.lift = rough_lift(path, 0);
          if (compose) {
            out.endpoint = start;
            for (int j = 0; j < k; ++j) out.endpoint += setup.fields.vectors()[static_cast<std::size_t>(j)] * out.lift.b(1, j);
          } else {
            out.endpoint = integrate_xi_eps(setup.fields, path, setup.x0).bottomRows(1).transpose();
          }
          out.driver = std::move(path.driver);
          return out;
        },
        setup.workers);

    std::vector<RoughLift> lifts;
    lifts.reserve(members.size());
    for (const auto& m : members) lifts.push_back(m.lift);
    const WipEstimate wip = estimate_wip(lifts, eps);
    const noise::NoiseBasis limit = limit_basis(setup.fields, wip.sigma_hat, wip.gamma_tilde_hat);

    // Limit SDE, augmented with the frame shift for the composition test:
    // d(g, s) = (u-bar(g - s), 0) dt + (xi_k, xi_k) o dW^k.
    integrators::StepProblem problem;
    if (compose) {
      const MeanVelocity u = *setup.mean_velocity;
      problem.drift = [u, d](const integrators::State& z) {
        integrators::State out = integrators::State::Zero(2 * d);
        out.head(d) = u.eval(z.head(d) - z.tail(d));
        return out;
      };
      for (int j = 0; j < k; ++j) {
        const Eigen::VectorXd v = limit.vectors()[static_cast<std::size_t>(j)];
        problem.diffusions.push_back([v, d](const integrators::State&) {
          integrators::State out(2 * d);
          out << v, v;
          return out;
        });
      }
    } else {
      problem = step_problem(limit);
    }

    const std::uint64_t limit_seed = integrators::derive_member_seed(eps_seed, 0xC0FFEEULL);
    auto limit_end = integrators::run_ensemble(
        setup.members, limit_seed,
        [&](int index, std::uint64_t seed) {
          Eigen::MatrixXd increments;
          if (coupled) {
            const Eigen::MatrixXd& w = members[static_cast<std::size_t>(index)].driver;
            increments = w.bottomRows(slow) - w.topRows(slow);
          } else {
            increments = integrators::make_brownian(seed, k, dt, slow).increments;
          }
          integrators::State z = compose ? integrators::State::Zero(2 * d) : integrators::State(setup.x0);
          if (compose) z.head(d) = setup.x0;
          for (int n = 0; n < slow; ++n) z = integrators::heun_step(problem, z, dt, increments.row(n).transpose());
          return Eigen::VectorXd(z.head(d));
        },
        setup.workers);

    Eigen::MatrixXd sample_eps(setup.members, d);
    Eigen::MatrixXd sample_lim(setup.members, d);
    for (int i = 0; i < setup.members; ++i) {
      sample_eps.row(i) = members[static_cast<std::size_t>(i)].endpoint.transpose();
      sample_lim.row(i) = limit_end[static_cast<std::size_t>(i)].transpose();
      MemberRecord rec;
      rec.epsilon = eps;
      rec.member = i;
      rec.seed = members[static_cast<std::size_t>(i)].seed;
      rec.b1 = members[static_cast<std::size_t>(i)].lift.b.bottomRows(1).transpose();
      rec.bb1 = members[static_cast<std::size_t>(i)].lift.bb_full();
      rec.endpoint = members[static_cast<std::size_t>(i)].endpoint;
      rec.limit_endpoint = limit_end[static_cast<std::size_t>(i)];
      report.records.push_back(std::move(rec));
    }
    ConvergenceRow row;
    row.epsilon = eps;
    row.ks_stat = stats::ks_two_sample_columns(sample_eps, sample_lim);
    row.null_band = stats::ks_null_band(static_cast<std::size_t>(setup.members), static_cast<std::size_t>(setup.members),
                                        setup.alpha / d);
    row.wip = wip;
    eps_list.push_back(eps);
    ks_list.push_back(row.ks_stat);
    report.rows.push_back(std::move(row));
  }
  report.trend_tau = kendall_tau(eps_list, ks_list);
  return report;
}

}  // namespace epflow::homog
