#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "epflow/brownian.hpp"

namespace epflow::integrators {

using State = Eigen::VectorXd;
using VectorField = std::function<State(const State&)>;

/// Raised when a step produces a non-finite state or an implicit solve fails.
class IntegrationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// IntegrationError raised inside ensemble member `member`.
class MemberError : public IntegrationError {
 public:
  MemberError(int member, const std::string& reason)
      : IntegrationError("member " + std::to_string(member) + ": " + reason), member_(member), reason_(reason) {}
  int member() const { return member_; }
  const std::string& reason() const { return reason_; }

 private:
  int member_;
  std::string reason_;
};

/// Stratonovich SDE  dx = (drift + bracket_drift) dt + sum_k diffusions[k] o dW^k.
/// Empty std::function members are treated as zero fields.
struct StepProblem {
  VectorField drift;
  std::vector<VectorField> diffusions;
  /// 1/2 Gamma^{kl} [xi_k, xi_l]; enters the drift slot unchanged.
  VectorField bracket_drift;
};

/// Stratonovich predictor-corrector (Heun) step.
State heun_step(const StepProblem& p, const State& x, double dt, const Eigen::VectorXd& dW);

struct MidpointResult {
  State x;
  int iterations = 0;
  bool converged = false;
};

/// Implicit midpoint x1 = x + F((x + x1)/2) solved by fixed-point iteration,
/// stopping once successive midpoints differ by at most tol (relative to
/// max(1, |x|_inf)). Quadratic invariants of skew-linear problems are kept
/// to the solver tolerance.
MidpointResult midpoint_step(const StepProblem& p, const State& x, double dt, const Eigen::VectorXd& dW,
                             double tol = 1e-12, int max_iter = 50);

/// midpoint_step that throws IntegrationError on non-convergence.
State midpoint_step_or_throw(const StepProblem& p, const State& x, double dt, const Eigen::VectorXd& dW,
                             double tol = 1e-12, int max_iter = 50);

/// Classical fourth-order Runge-Kutta step for x' = f(x).
State rk4_step(const VectorField& f, const State& x, double dt);

/// Fields and first derivatives needed by the second-order rough step.
struct RoughFields {
  std::vector<VectorField> fields;
  /// (k, x, v) -> D fields[k](x) . v
  std::function<State(int, const State&, const State&)> jacobian_apply;
  VectorField drift;
};

/// One step of dx = b(x) dt + sum_k xi_k(x) dB^k driven by the rough increment
/// (dB, BB):
///   x + b dt + xi_k dB^k + D xi_k(x) . xi_l(x) BB^{lk}
/// with BB^{ij} = int dB^i_{su} dB^j_u.
State rde_step(const RoughFields& f, const State& x, const Eigen::VectorXd& dB, const Eigen::MatrixXd& bb,
               double dt);

/// Sum of values in a fixed pairwise tree; the result depends only on the
/// sequence, not on how it was produced.
double pairwise_sum(const double* values, std::size_t n);
inline double pairwise_sum(const std::vector<double>& v) { return pairwise_sum(v.data(), v.size()); }

/// Worker count: EPFLOW_WORKERS if set and positive, else hardware concurrency.
int default_worker_count();

/// Run `fn(member_index, member_seed)` for member_index in [0, members) on a
/// bounded pool of threads. Results are returned in member order so any later
/// reduction is independent of scheduling. The first exception thrown by a
/// member is rethrown after all workers finish; an IntegrationError comes
/// back as a MemberError carrying the member index.
template <class Fn>
auto run_ensemble(int members, std::uint64_t root_seed, Fn&& fn, int workers = 0)
    -> std::vector<decltype(fn(0, std::uint64_t{}))> {
  using Result = decltype(fn(0, std::uint64_t{}));
  std::vector<Result> results(static_cast<std::size_t>(std::max(members, 0)));
  if (members <= 0) return results;
  if (workers <= 0) workers = default_worker_count();
  workers = std::min(workers, members);

  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
  auto worker = [&](int w) {
    int m = w;
    try {
      for (; m < members; m += workers) {
        results[static_cast<std::size_t>(m)] = fn(m, derive_member_seed(root_seed, static_cast<std::uint64_t>(m)));
      }
    } catch (const MemberError&) {
      errors[static_cast<std::size_t>(w)] = std::current_exception();
    } catch (const IntegrationError& e) {
      errors[static_cast<std::size_t>(w)] = std::make_exception_ptr(MemberError(m, e.what()));
    } catch (...) {
      errors[static_cast<std::size_t>(w)] = std::current_exception();
    }
  };
  if (workers == 1) {
    worker(0);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker, w);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return results;
}

}  // namespace epflow::integrators
