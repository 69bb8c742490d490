#include "epflow/integrators.hpp"

#include <cmath>

namespace epflow::integrators {

namespace {

/// F(x) = (drift + bracket) dt + sum_k g_k dW^k
State increment(const StepProblem& p, const State& x, double dt, const Eigen::VectorXd& dW) {
  State out = State::Zero(x.size());
  if (p.drift) out += p.drift(x) * dt;
  if (p.bracket_drift) out += p.bracket_drift(x) * dt;
  for (std::size_t k = 0; k < p.diffusions.size(); ++k) {
    if (p.diffusions[k] && dW(static_cast<Eigen::Index>(k)) != 0.0) {
      out += p.diffusions[k](x) * dW(static_cast<Eigen::Index>(k));
    }
  }
  return out;
}

void check_finite(const State& x, const char* where) {
  if (!x.allFinite()) throw IntegrationError(std::string(where) + ": non-finite state");
}

}  // namespace

State heun_step(const StepProblem& p, const State& x, double dt, const Eigen::VectorXd& dW) {
  const State f0 = increment(p, x, dt, dW);
  const State predictor = x + f0;
  State out = x + 0.5 * (f0 + increment(p, predictor, dt, dW));
  check_finite(out, "heun_step");
  return out;
}

MidpointResult midpoint_step(const StepProblem& p, const State& x, double dt, const Eigen::VectorXd& dW,
                             double tol, int max_iter) {
  MidpointResult r;
  State mid = x;
  for (int it = 1; it <= max_iter; ++it) {
    const State next = x + 0.5 * increment(p, mid, dt, dW);
    if (!next.allFinite()) {
      r.x = next;
      r.iterations = it;
      return r;
    }
    const double change = (next - mid).cwiseAbs().maxCoeff();
    const double scale = std::max(1.0, next.cwiseAbs().maxCoeff());
    mid = next;
    if (change <= tol * scale) {
      r.iterations = it;
      r.converged = true;
      break;
    }
    r.iterations = it;
  }
  r.x = 2.0 * mid - x;
  return r;
}

State midpoint_step_or_throw(const StepProblem& p, const State& x, double dt, const Eigen::VectorXd& dW,
                             double tol, int max_iter) {
  MidpointResult r = midpoint_step(p, x, dt, dW, tol, max_iter);
  if (!r.converged) {
    throw IntegrationError("midpoint_step: fixed-point iteration did not converge after " +
                           std::to_string(r.iterations) + " iterations");
  }
  check_finite(r.x, "midpoint_step");
  return std::move(r.x);
}

State rk4_step(const VectorField& f, const State& x, double dt) {
  const State k1 = f(x);
  const State k2 = f(x + 0.5 * dt * k1);
  const State k3 = f(x + 0.5 * dt * k2);
  const State k4 = f(x + dt * k3);
  State out = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  check_finite(out, "rk4_step");
  return out;
}

State rde_step(const RoughFields& f, const State& x, const Eigen::VectorXd& dB, const Eigen::MatrixXd& bb,
               double dt) {
  State out = x;
  if (f.drift) out += f.drift(x) * dt;
  const int k = static_cast<int>(f.fields.size());
  std::vector<State> values;
  values.reserve(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) {
    values.push_back(f.fields[static_cast<std::size_t>(i)](x));
    out += values.back() * dB(i);
  }
  if (f.jacobian_apply) {
    for (int i = 0; i < k; ++i) {
      // sum_l BB^{l i} xi_l(x), then one Jacobian application per field
      State v = State::Zero(x.size());
      for (int l = 0; l < k; ++l) v += bb(l, i) * values[static_cast<std::size_t>(l)];
      if (v.cwiseAbs().maxCoeff() > 0.0) out += f.jacobian_apply(i, x, v);
    }
  }
  check_finite(out, "rde_step");
  return out;
}

double pairwise_sum(const double* values, std::size_t n) {
  if (n <= 8) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += values[i];
    return s;
  }
  const std::size_t half = n / 2;
  return pairwise_sum(values, half) + pairwise_sum(values + half, n - half);
}

int default_worker_count() {
  if (const char* env = std::getenv("EPFLOW_WORKERS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

}  // namespace epflow::integrators
