#include "epflow/point_vortex.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <variant>

namespace epflow::vortex {

using integrators::State;

namespace {

std::vector<Eigen::Vector2d> unpack(const State& s) {
  std::vector<Eigen::Vector2d> out(static_cast<std::size_t>(s.size() / 2));
  for (std::size_t a = 0; a < out.size(); ++a) out[a] = s.segment<2>(static_cast<Eigen::Index>(2 * a));
  return out;
}

State pack(const std::vector<Eigen::Vector2d>& x) {
  State s(static_cast<Eigen::Index>(2 * x.size()));
  for (std::size_t a = 0; a < x.size(); ++a) s.segment<2>(static_cast<Eigen::Index>(2 * a)) = x[a];
  return s;
}

}  // namespace

Eigen::Vector2d center_of_vorticity(const std::vector<Eigen::Vector2d>& x, const std::vector<double>& strengths) {
  double total = 0.0;
  Eigen::Vector2d weighted = Eigen::Vector2d::Zero();
  Eigen::Vector2d plain = Eigen::Vector2d::Zero();
  for (std::size_t a = 0; a < x.size(); ++a) {
    total += strengths[a];
    weighted += strengths[a] * x[a];
    plain += x[a];
  }
  if (std::abs(total) < 1e-12) return x.empty() ? plain : Eigen::Vector2d(plain / static_cast<double>(x.size()));
  return weighted / total;
}

std::vector<Eigen::Vector2d> pv_velocity(const std::vector<Eigen::Vector2d>& x, const std::vector<double>& strengths) {
  if (x.size() != strengths.size()) throw std::invalid_argument("pv_velocity: positions and strengths differ in length");
  std::vector<Eigen::Vector2d> u(x.size(), Eigen::Vector2d::Zero());
  for (std::size_t a = 0; a < x.size(); ++a) {
    for (std::size_t b = a + 1; b < x.size(); ++b) {
      const Eigen::Vector2d d = x[a] - x[b];
      const double r2 = d.squaredNorm();
      if (!(r2 >= kCoincidence * kCoincidence)) {
        throw CoincidenceError("vortices " + std::to_string(a) + " and " + std::to_string(b) +
                               " coincide (distance " + std::to_string(std::sqrt(r2)) + ")");
      }
      const Eigen::Vector2d perp(-d.y(), d.x());
      const Eigen::Vector2d k = perp / (2.0 * std::numbers::pi * r2);
      u[a] -= strengths[b] * k;
      u[b] += strengths[a] * k;
    }
  }
  return u;
}

const char* to_string(PvScheme scheme) {
  switch (scheme) {
    case PvScheme::Midpoint: return "midpoint";
    case PvScheme::Heun: return "heun";
    case PvScheme::Split: return "split";
  }
  return "unknown";
}

PvScheme pv_scheme_from_string(const std::string& name) {
  if (name == "midpoint") return PvScheme::Midpoint;
  if (name == "heun") return PvScheme::Heun;
  if (name == "split") return PvScheme::Split;
  throw std::invalid_argument("unknown vortex scheme '" + name + "'");
}

std::vector<VortexState> simulate_pv(const VortexState& state0, const noise::NoiseBasis& basis,
                                     const PvOptions& options, const Eigen::MatrixXd& increments) {
  if (basis.kind() != noise::NoiseKind::PlanarKilling) throw std::invalid_argument("simulate_pv: noise must be planar-killing");
  if (!(options.dt > 0.0) || !(options.T > 0.0)) throw std::invalid_argument("simulate_pv: dt and T must be positive");
  if (state0.positions.size() != state0.strengths.size() || state0.positions.empty()) {
    throw std::invalid_argument("simulate_pv: need matching, non-empty positions and strengths");
  }
  const int steps = static_cast<int>(std::llround(options.T / options.dt));
  if (increments.rows() != steps || increments.cols() != 2) {
    throw std::invalid_argument("simulate_pv: increments must be " + std::to_string(steps) + " x 2");
  }
  const std::vector<double>& g = state0.strengths;
  pv_velocity(state0.positions, g);  // coincidence check on the initial state

  // Closed-form frame on the circle through the initial configuration.
  const Eigen::Vector2d c0 = center_of_vorticity(state0.positions, g);
  double rho_star = 0.0;
  for (const auto& p : state0.positions) rho_star += (p - c0).norm();
  rho_star /= static_cast<double>(state0.positions.size());
  noise::PlanarKillingParams frame_params = basis.planar();
  frame_params.pivot = c0;
  frame_params.radius = rho_star;
  const auto frames = noise::generate_frame(noise::NoiseBasis::planar_killing(frame_params), increments, options.dt);

  const noise::PlanarKillingParams& p = basis.planar();
  const bool bracket = basis.gamma().cwiseAbs().maxCoeff() > 0.0;
  auto pivoted = [&](const std::vector<Eigen::Vector2d>& x) { return basis.with_pivot(center_of_vorticity(x, g)); };

  integrators::StepProblem problem;
  problem.drift = [&](const State& s) {
    const auto x = unpack(s);
    State out = pack(pv_velocity(x, g));
    if (bracket) {
      const noise::NoiseBasis b = pivoted(x);
      for (std::size_t a = 0; a < x.size(); ++a) {
        out.segment<2>(static_cast<Eigen::Index>(2 * a)) += noise::bracket_drift(b, x[a]);
      }
    }
    return out;
  };
  if (options.scheme != PvScheme::Split) {
    for (int k = 0; k < 2; ++k) {
      problem.diffusions.push_back([&, k](const State& s) {
        const auto x = unpack(s);
        const noise::NoiseBasis b = pivoted(x);
        State out(s.size());
        for (std::size_t a = 0; a < x.size(); ++a) out.segment<2>(static_cast<Eigen::Index>(2 * a)) = noise::xi_eval(b, k, x[a]);
        return out;
      });
    }
  }

  std::vector<VortexState> out;
  out.reserve(static_cast<std::size_t>(steps) + 1);
  VortexState cur = state0;
  cur.t = 0.0;
  cur.frame = std::get<lie::PlanarIsometry>(frames.front().frame);
  out.push_back(cur);
  State s = pack(state0.positions);
  const Eigen::VectorXd no_noise = Eigen::VectorXd::Zero(0);
  for (int n = 0; n < steps; ++n) {
    const Eigen::VectorXd dw = increments.row(n).transpose();
    try {
      switch (options.scheme) {
        case PvScheme::Heun: s = integrators::heun_step(problem, s, options.dt, dw); break;
        case PvScheme::Midpoint:
          s = integrators::midpoint_step_or_throw(problem, s, options.dt, dw, options.tol, options.max_iter);
          break;
        case PvScheme::Split: {
          s = integrators::midpoint_step_or_throw(problem, s, options.dt, no_noise, options.tol, options.max_iter);
          auto x = unpack(s);
          // Exact rotation-field flow: each point turns at its own (conserved) radius.
          const Eigen::Vector2d pivot = center_of_vorticity(x, g);
          for (auto& xa : x) {
            const Eigen::Vector2d y = xa - pivot;
            xa = pivot + lie::rot2(-p.angular_rate(y.norm()) * dw(0)) * y;
          }
          const Eigen::Vector2d shift = Eigen::Vector2d(-p.b, p.a) * dw(1);
          for (auto& xa : x) xa += shift;
          s = pack(x);
          break;
        }
      }
    } catch (const integrators::IntegrationError& e) {
      throw integrators::IntegrationError(std::string(e.what()) + " at step " + std::to_string(n + 1));
    }
    cur.positions = unpack(s);
    pv_velocity(cur.positions, g);
    cur.t = options.dt * (n + 1);
    cur.frame = std::get<lie::PlanarIsometry>(frames[static_cast<std::size_t>(n) + 1].frame);
    out.push_back(cur);
  }
  return out;
}

std::vector<VortexState> frame_pullback(const std::vector<VortexState>& trajectory) {
  std::vector<VortexState> out = trajectory;
  for (auto& s : out) {
    for (auto& x : s.positions) x = s.frame.apply_inverse(x);
    s.frame = lie::PlanarIsometry{0.0, Eigen::Vector2d::Zero(), s.frame.pivot};
  }
  return out;
}

double hamiltonian(const std::vector<Eigen::Vector2d>& x, const std::vector<double>& strengths) {
  double h = 0.0;
  for (std::size_t a = 0; a < x.size(); ++a) {
    for (std::size_t b = a + 1; b < x.size(); ++b) h += strengths[a] * strengths[b] * std::log((x[a] - x[b]).norm());
  }
  // each unordered pair appears twice in the sum over a != b
  return -2.0 * h / (4.0 * std::numbers::pi);
}

PvDiagnostic pv_diagnostic(const VortexState& state) {
  PvDiagnostic d;
  d.t = state.t;
  d.hamiltonian = hamiltonian(state.positions, state.strengths);
  for (std::size_t a = 0; a < state.positions.size(); ++a) {
    for (std::size_t b = a + 1; b < state.positions.size(); ++b) {
      d.side_lengths.push_back((state.positions[a] - state.positions[b]).norm());
    }
  }
  d.center = center_of_vorticity(state.positions, state.strengths);
  for (std::size_t a = 0; a < state.positions.size(); ++a) {
    d.angular_impulse += state.strengths[a] * (state.positions[a] - d.center).squaredNorm();
  }
  return d;
}

std::vector<PvDiagnostic> pv_diagnostics(const std::vector<VortexState>& trajectory) {
  std::vector<PvDiagnostic> out;
  out.reserve(trajectory.size());
  for (const auto& s : trajectory) out.push_back(pv_diagnostic(s));
  return out;
}

VortexState equilateral_triangle(double rho, const Eigen::Vector2d& center, double phase) {
  VortexState s;
  for (int a = 0; a < 3; ++a) {
    const double th = phase + 2.0 * std::numbers::pi * a / 3.0;
    s.positions.push_back(center + rho * Eigen::Vector2d(std::cos(th), std::sin(th)));
    s.strengths.push_back(1.0);
  }
  return s;
}

}  // namespace epflow::vortex
