#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "epflow/brownian.hpp"
#include "epflow/integrators.hpp"
#include "epflow/noise.hpp"

namespace epflow::homog {

enum class FastKind { Lorenz63, OuSurrogate };

const char* to_string(FastKind kind);
FastKind fast_kind_from_string(const std::string& name);

/// Fast ergodic system lambda' = h(lambda) together with the centred linear
/// observable lambda -> observable * lambda - offset that drives the slow map.
struct FastFlowSpec {
  FastKind kind = FastKind::OuSurrogate;

  double lorenz_sigma = 10.0;
  double lorenz_rho = 28.0;
  double lorenz_beta = 8.0 / 3.0;
  /// Fast-time spin-up discarded before recording (Lorenz only).
  double burn_in = 20.0;

  /// OU surrogate d eta = -rate eta ds + sqrt(2 rate) d beta per component,
  /// lambda = covariance^{1/2} eta.
  double ou_rate = 1.0;
  Eigen::MatrixXd ou_covariance = Eigen::MatrixXd::Identity(1, 1);

  Eigen::MatrixXd observable = Eigen::MatrixXd::Identity(1, 1);  // K x state_dim
  Eigen::VectorXd offset = Eigen::VectorXd::Zero(1);              // K

  /// Fine step in fast time; the slow-time step is epsilon^2 * base_step or less.
  double base_step = 0.05;

  int noise_dim() const { return static_cast<int>(observable.rows()); }
  int state_dim() const;
};

/// Lorenz-63 with observable (lambda_1, lambda_2), not yet centred or scaled.
FastFlowSpec lorenz63_default();
/// Scalar or K-dimensional OU surrogate with identity observable.
FastFlowSpec ou_surrogate(double rate, const Eigen::MatrixXd& covariance, double base_step = 0.05);

/// Green-Kubo covariance of the OU surrogate: 2 covariance / rate.
Eigen::MatrixXd ou_sigma(const FastFlowSpec& spec);

/// Estimate mean and variance of the projected Lorenz coordinates from a
/// fast run of length t_fast and fold them into the observable so that each
/// component is centred with unit variance.
FastFlowSpec calibrate_observable(const FastFlowSpec& spec, std::uint64_t seed, double t_fast = 1e4);

/// Initial fast state: stationary draw (OU) or a perturbed point spun up onto
/// the attractor (Lorenz).
Eigen::VectorXd sample_initial_state(const FastFlowSpec& spec, integrators::NormalStream& normal);

/// Fast path on a fine grid aligned with `slow_steps` slow intervals on [0, T].
struct FastPath {
  double epsilon = 1.0;
  double horizon = 1.0;
  int slow_steps = 0;
  int fine_per_slow = 0;
  /// B^eps at every fine time, (slow_steps * fine_per_slow + 1) x K.
  Eigen::MatrixXd b_fine;
  /// Slow-time Brownian motion driving the OU surrogate at the slow grid,
  /// (slow_steps + 1) x K. Empty for Lorenz.
  Eigen::MatrixXd driver;
  Eigen::VectorXd final_state;

  double fine_dt() const { return horizon / (slow_steps * static_cast<double>(fine_per_slow)); }
  Eigen::VectorXd b_at_slow(int i) const { return b_fine.row(static_cast<Eigen::Index>(i) * fine_per_slow).transpose(); }
};

/// Integrate d lambda/dt = eps^-2 h(lambda) on [0, T] and accumulate
/// B^eps_t = eps int_0^{t/eps^2} obs(lambda_s) ds.
///
/// Lorenz uses classical RK4 on the state augmented with the observable
/// integral. The OU surrogate uses the implicit midpoint (Crank-Nicolson)
/// step with the trapezoid rule; `driver == nullptr` means zero driving noise.
/// Throws integrators::IntegrationError when the state becomes non-finite.
FastPath integrate_fast(const FastFlowSpec& spec, const Eigen::VectorXd& lambda0, double epsilon, double horizon,
                        int slow_steps, integrators::NormalStream* driver);

/// First and second levels of a path on a dyadic skeleton of the slow grid.
struct RoughLift {
  double horizon = 1.0;
  int levels = 0;
  /// (2^levels + 1) x K path values at the finest stored grid, b.row(0) = 0.
  Eigen::MatrixXd b;
  /// bb[l][j] is the iterated integral over the j-th interval of level l
  /// (2^l intervals of length horizon / 2^l).
  std::vector<std::vector<Eigen::MatrixXd>> bb;

  int k() const { return static_cast<int>(b.cols()); }
  int grid_size() const { return 1 << levels; }
  double dt() const { return horizon / grid_size(); }
  const Eigen::MatrixXd& bb_full() const { return bb.front().front(); }
  Eigen::VectorXd increment(int level, int j) const;
};

/// Lift of the piecewise-linear interpolant of `samples` (rows on a uniform
/// grid over [0, horizon]); 2^levels must divide rows - 1. Every dyadic
/// interval is accumulated directly from the samples.
RoughLift lift_samples(const Eigen::MatrixXd& samples, double horizon, int levels);

/// Lift of a fast path onto the dyadic skeleton of its slow grid. 2^levels
/// must divide the slow step count; throws std::invalid_argument otherwise.
RoughLift rough_lift(const FastPath& path, int levels);

/// max over dyadic triples (s, u, t) of
/// |BB_st - BB_su - BB_ut - dB_su (x) dB_ut| / (|BB_su| + |BB_ut| + |BB_st| + |dB_su||dB_ut|).
double chen_defect(const RoughLift& lift);

struct HolderNorms {
  double first = 0.0;   // max |dB_st| / |t-s|^alpha
  double second = 0.0;  // max |BB_st| / |t-s|^(2 alpha)
};
HolderNorms holder_norms(const RoughLift& lift, double alpha);

struct WipEstimate {
  Eigen::MatrixXd sigma_hat;
  Eigen::MatrixXd sigma_se;
  Eigen::MatrixXd gamma_tilde_hat;  // antisymmetric part of E[BB_01]
  Eigen::MatrixXd gamma_tilde_se;
  Eigen::MatrixXd symmetric_remainder;  // symmetric part of E[BB_01]
  int members = 0;
  double epsilon = 0.0;
};

/// Sample means of B_1 (x) B_1 and BB_01 over lifts on [0, 1] with jackknife
/// standard errors. Throws std::invalid_argument for fewer than two lifts.
WipEstimate estimate_wip(const std::vector<RoughLift>& lifts, double epsilon = 0.0);

/// Symmetric square root of a PSD matrix.
Eigen::MatrixXd sqrt_psd(const Eigen::MatrixXd& m);

/// Noise basis of the limiting SDE: xi = sigma sqrt(Sigma),
/// Gamma = sqrt(Sigma)^-1 Gamma~ sqrt(Sigma)^-T.
noise::NoiseBasis limit_basis(const noise::NoiseBasis& sigma_fields, const Eigen::MatrixXd& sigma,
                              const Eigen::MatrixXd& gamma_tilde);

/// Slow trajectory of d Xi/dt = eps^-1 sum_k sigma_k(Xi) lambda^k at the slow
/// grid, integrated as an ODE along the piecewise-linear B^eps (one RK4 step
/// per fine segment). Returns (slow_steps + 1) x d.
Eigen::MatrixXd integrate_xi_eps(const noise::NoiseBasis& basis, const FastPath& path, const Eigen::VectorXd& x0);

/// Same flow from the lift alone, one rde_step per finest dyadic interval.
Eigen::MatrixXd integrate_xi_rde(const noise::NoiseBasis& basis, const RoughLift& lift, const Eigen::VectorXd& x0);

integrators::RoughFields rough_fields(const noise::NoiseBasis& basis);
integrators::StepProblem step_problem(const noise::NoiseBasis& basis, integrators::VectorField drift = {});

/// Time-average of the observable over one fast run with batch-means error.
struct CenteringResult {
  Eigen::VectorXd mean;
  Eigen::VectorXd standard_error;
};
CenteringResult centering_check(const FastFlowSpec& spec, std::uint64_t seed, double t_fast, int batches = 20);

/// Steady mean velocity u-bar driving the slow map g-bar.
struct MeanVelocity {
  enum class Kind { Zero, Constant, Shear } kind = Kind::Zero;
  Eigen::VectorXd vector;  // Constant: the velocity
  double amplitude = 0.0;  // Shear: u = (amplitude sin(x_2), 0)
  Eigen::VectorXd eval(const Eigen::VectorXd& x) const;
};

struct ConvergenceSetup {
  FastFlowSpec fast;
  noise::NoiseBasis fields = noise::NoiseBasis::torus_constant({Eigen::VectorXd::Unit(2, 0)});
  Eigen::VectorXd x0 = Eigen::VectorXd::Zero(2);
  std::vector<double> epsilons{0.2, 0.1, 0.05, 0.02};
  int members = 5000;
  std::uint64_t seed = 1;
  int slow_steps = 64;
  /// When set, the map tested is g^eps = Xi^eps o g-bar (torus-constant fields only).
  std::optional<MeanVelocity> mean_velocity;
  /// Drive the limit SDE with the Brownian motion that drives the OU
  /// surrogate (common random numbers). Ignored for Lorenz.
  bool couple_limit = true;
  double alpha = 0.05;
  int workers = 0;
};

struct MemberRecord {
  double epsilon = 0.0;
  int member = 0;
  std::uint64_t seed = 0;
  Eigen::VectorXd b1;
  Eigen::MatrixXd bb1;
  Eigen::VectorXd endpoint;
  Eigen::VectorXd limit_endpoint;
};

struct ConvergenceRow {
  double epsilon = 0.0;
  double ks_stat = 0.0;
  double null_band = 0.0;
  WipEstimate wip;
};

struct ConvergenceReport {
  std::vector<ConvergenceRow> rows;
  std::vector<MemberRecord> records;
  /// Kendall tau between epsilon and KS distance; +1 means the distance
  /// shrinks monotonically with epsilon.
  double trend_tau = 0.0;
};

/// Time-1 marginal of Xi^eps(x0) (or g^eps(x0)) against the limiting SDE
/// simulated with the estimated (Sigma, Gamma~), for every epsilon.
ConvergenceReport convergence_report(const ConvergenceSetup& setup);

double kendall_tau(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace epflow::homog
