#include <cmath>

#include <gtest/gtest.h>

#include "epflow/homogenisation.hpp"
#include "epflow/statistics.hpp"

using namespace epflow;
using namespace epflow::homog;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

Eigen::MatrixXd path_samples(int n, double horizon, const std::function<Eigen::VectorXd(double)>& f) {
  const Eigen::VectorXd f0 = f(0.0);
  Eigen::MatrixXd s(n + 1, f0.size());
  for (int i = 0; i <= n; ++i) s.row(i) = f(horizon * i / n).transpose();
  return s;
}

FastPath ou_path(double epsilon, std::uint64_t seed, int slow_steps = 64, int k = 1) {
  const auto spec = ou_surrogate(1.0, Eigen::MatrixXd::Identity(k, k));
  integrators::NormalStream normal(seed);
  const Eigen::VectorXd lambda0 = sample_initial_state(spec, normal);
  return integrate_fast(spec, lambda0, epsilon, 1.0, slow_steps, &normal);
}

}  // namespace

TEST(IntegrateFast, OuFixedPointWithoutNoise) {
  const auto spec = ou_surrogate(1.0, Eigen::MatrixXd::Identity(2, 2));
  const auto path = integrate_fast(spec, Eigen::VectorXd::Zero(2), 0.2, 1.0, 16, nullptr);
  EXPECT_EQ(path.b_fine.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(path.final_state.norm(), 0.0);
  EXPECT_EQ(path.driver.size(), 0);
}

TEST(IntegrateFast, FineGridRespectsBaseStep) {
  const auto spec = ou_surrogate(1.0, Eigen::MatrixXd::Identity(1, 1), 0.05);
  const auto path = integrate_fast(spec, vec({0.0}), 0.1, 1.0, 64, nullptr);
  EXPECT_LE(path.fine_dt(), 0.1 * 0.1 * 0.05 + 1e-15);
  EXPECT_EQ(path.b_fine.rows(), 64 * path.fine_per_slow + 1);
}

TEST(IntegrateFast, RejectsBadArguments) {
  const auto spec = ou_surrogate(1.0, Eigen::MatrixXd::Identity(1, 1));
  EXPECT_THROW(integrate_fast(spec, vec({0.0}), 0.0, 1.0, 8, nullptr), std::invalid_argument);
  EXPECT_THROW(integrate_fast(spec, vec({0.0}), 1.5, 1.0, 8, nullptr), std::invalid_argument);
  EXPECT_THROW(integrate_fast(spec, vec({0.0, 1.0}), 0.5, 1.0, 8, nullptr), std::invalid_argument);
}

TEST(IntegrateFast, LorenzStaysInAbsorbingBall) {
  auto spec = lorenz63_default();
  Eigen::VectorXd x = vec({1.0, 1.0, 1.0});
  // T = 10 at epsilon = 0.1 is fast time 1000; checked in unit slow chunks
  for (int chunk = 0; chunk < 10; ++chunk) {
    const auto path = integrate_fast(spec, x, 0.1, 1.0, 8, nullptr);
    x = path.final_state;
    ASSERT_TRUE(x.allFinite());
    // |x|^2 + |y|^2 + (z - sigma - rho)^2 stays below the classical bound
    const double r = std::sqrt(x(0) * x(0) + x(1) * x(1) + std::pow(x(2) - 38.0, 2));
    EXPECT_LT(r, 60.0);
  }
}

TEST(IntegrateFast, LorenzRichardsonFourthOrder) {
  auto endpoint = [](double step) {
    auto spec = lorenz63_default();
    spec.base_step = step;
    return integrate_fast(spec, vec({1.0, 1.0, 1.0}), 1.0, 0.5, 1, nullptr).final_state;
  };
  const auto a = endpoint(0.01);
  const auto b = endpoint(0.005);
  const auto c = endpoint(0.0025);
  EXPECT_NEAR((a - b).norm() / (b - c).norm(), 16.0, 2.0);
}

TEST(LiftSamples, StraightLine) {
  const Eigen::VectorXd v = vec({1.5, -0.5});
  const auto lift = lift_samples(path_samples(64, 1.0, [&](double t) { return Eigen::VectorXd(t * v); }), 1.0, 3);
  EXPECT_LT((lift.bb_full() - 0.5 * v * v.transpose()).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_EQ(lift.b.row(0).norm(), 0.0);
  EXPECT_LT(chen_defect(lift), 1e-14);
}

TEST(LiftSamples, CircleSignedArea) {
  const int n = 1 << 14;
  const auto lift = lift_samples(
      path_samples(n, 2 * M_PI, [](double t) { return vec({std::cos(t) - 1.0, std::sin(t)}); }), 2 * M_PI, 4);
  const Eigen::MatrixXd& bb = lift.bb_full();
  const Eigen::MatrixXd area = 0.5 * (bb - bb.transpose());
  Eigen::MatrixXd expected(2, 2);
  expected << 0, M_PI, -M_PI, 0;
  // piecewise-linear interpolation loses area of order n^-2
  EXPECT_LT((area - expected).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(LiftSamples, RejectsGridMismatch) {
  EXPECT_THROW(lift_samples(Eigen::MatrixXd::Zero(11, 1), 1.0, 2), std::invalid_argument);
  const auto path = ou_path(0.2, 1, 12);
  EXPECT_THROW(rough_lift(path, 3), std::invalid_argument);
}

TEST(RoughLift, ChenRelationOnOuLift) {
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto lift = rough_lift(ou_path(0.1, seed, 64, 2), 6);
    EXPECT_LT(chen_defect(lift), 1e-10);
    EXPECT_EQ(lift.b.row(0).norm(), 0.0);
  }
}

TEST(RoughLift, HolderNormsFiniteAndStableAcrossEpsilon) {
  std::vector<double> first;
  for (double eps : {0.2, 0.1, 0.05}) {
    double worst = 0.0;
    for (std::uint64_t s = 0; s < 20; ++s) {
      const auto n = holder_norms(rough_lift(ou_path(eps, 100 + s, 64, 2), 6), 0.4);
      ASSERT_TRUE(std::isfinite(n.first) && std::isfinite(n.second));
      worst = std::max(worst, n.first);
    }
    first.push_back(worst);
  }
  const double lo = *std::min_element(first.begin(), first.end());
  const double hi = *std::max_element(first.begin(), first.end());
  EXPECT_LT(hi / lo, 2.0);
}

TEST(EstimateWip, ScalarAreaVanishes) {
  std::vector<RoughLift> lifts;
  for (std::uint64_t s = 0; s < 50; ++s) lifts.push_back(rough_lift(ou_path(0.2, s), 0));
  const auto est = estimate_wip(lifts, 0.2);
  EXPECT_EQ(est.gamma_tilde_hat(0, 0), 0.0);
  EXPECT_EQ(est.members, 50);
  EXPECT_EQ(est.epsilon, 0.2);
}

TEST(EstimateWip, BrownianInputsGiveIdentity) {
  std::vector<RoughLift> lifts;
  for (int m = 0; m < 4000; ++m) {
    const auto w = integrators::make_brownian(integrators::derive_member_seed(5, static_cast<std::uint64_t>(m)), 2,
                                              1.0 / 64, 64);
    lifts.push_back(lift_samples(w.values(), 1.0, 0));
  }
  const auto est = estimate_wip(lifts);
  EXPECT_LT(((est.sigma_hat - Eigen::MatrixXd::Identity(2, 2)).array() / est.sigma_se.array()).abs().maxCoeff(), 4.0);
  EXPECT_TRUE(est.sigma_hat.isApprox(est.sigma_hat.transpose(), 0.0));
  EXPECT_LT((est.gamma_tilde_hat + est.gamma_tilde_hat.transpose()).cwiseAbs().maxCoeff(), 1e-15);
  // the symmetric remainder of a Stratonovich lift is B (x) B / 2
  EXPECT_LT((est.symmetric_remainder - 0.5 * est.sigma_hat).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(EstimateWip, OuGreenKuboValue) {
  std::vector<RoughLift> lifts;
  for (std::uint64_t s = 0; s < 2000; ++s) lifts.push_back(rough_lift(ou_path(0.1, s, 16), 0));
  const auto est = estimate_wip(lifts, 0.1);
  const double exact = ou_sigma(ou_surrogate(1.0, Eigen::MatrixXd::Identity(1, 1)))(0, 0);
  EXPECT_DOUBLE_EQ(exact, 2.0);
  EXPECT_LT(std::abs(est.sigma_hat(0, 0) - exact), 3.0 * est.sigma_se(0, 0));
}

TEST(EstimateWip, NeedsTwoLifts) {
  EXPECT_THROW(estimate_wip({rough_lift(ou_path(0.2, 1), 0)}), std::invalid_argument);
}

TEST(SqrtPsd, SquaresBack) {
  Eigen::MatrixXd m(2, 2);
  m << 2.0, 0.6, 0.6, 1.0;
  const Eigen::MatrixXd r = sqrt_psd(m);
  EXPECT_LT((r * r - m).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_LT((r - r.transpose()).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(LimitBasis, ScalesFieldsAndTransformsGamma) {
  const auto fields = noise::NoiseBasis::torus_constant({vec({1, 0}), vec({0, 1})});
  Eigen::MatrixXd sigma(2, 2);
  sigma << 4.0, 0.0, 0.0, 1.0;
  Eigen::MatrixXd gt(2, 2);
  gt << 0.0, 0.4, -0.4, 0.0;
  const auto limit = limit_basis(fields, sigma, gt);
  EXPECT_LT((limit.vectors()[0] - vec({2, 0})).norm(), 1e-14);
  EXPECT_LT((limit.vectors()[1] - vec({0, 1})).norm(), 1e-14);
  EXPECT_NEAR(limit.gamma()(0, 1), 0.2, 1e-14);
  EXPECT_EQ(limit.gamma()(1, 0), -limit.gamma()(0, 1));
  const auto planar = noise::NoiseBasis::planar_killing({});
  EXPECT_THROW(limit_basis(planar, Eigen::MatrixXd::Identity(2, 2), Eigen::MatrixXd::Zero(2, 2)), std::invalid_argument);
}

TEST(IntegrateXiEps, ZeroObservableGivesConstantTrajectory) {
  auto spec = ou_surrogate(1.0, Eigen::MatrixXd::Identity(2, 2));
  const auto path = integrate_fast(spec, Eigen::VectorXd::Zero(2), 0.2, 1.0, 8, nullptr);
  Eigen::MatrixXd a(2, 2), b(2, 2);
  a << 0, 1, -1, 0;
  b << 1, 0, 0, -1;
  const auto traj = integrate_xi_eps(noise::NoiseBasis::custom_linear({a, b}), path, vec({0.3, 0.4}));
  for (Eigen::Index i = 0; i < traj.rows(); ++i) EXPECT_EQ(traj.row(i), Eigen::RowVector2d(0.3, 0.4));
}

TEST(IntegrateXiEps, TorusFieldsMatchQuadrature) {
  const auto path = ou_path(0.1, 3, 16, 2);
  const auto basis = noise::NoiseBasis::torus_constant({vec({1.0, 0.5}), vec({-0.2, 2.0})});
  const auto traj = integrate_xi_eps(basis, path, vec({0.1, 0.2}));
  for (int i = 0; i <= 16; ++i) {
    const Eigen::VectorXd b = path.b_at_slow(i);
    const Eigen::VectorXd expected = vec({0.1, 0.2}) + basis.vectors()[0] * b(0) + basis.vectors()[1] * b(1);
    EXPECT_LT((traj.row(i).transpose() - expected).norm(), 1e-14);
  }
}

TEST(IntegrateXiRde, SelfConvergesToFineOdeSolution) {
  const auto path = ou_path(0.2, 8, 256, 2);
  Eigen::MatrixXd a(2, 2), b(2, 2);
  a << 0, 1, -1, 0;
  b << 0.5, 0, 0.2, -0.5;
  const auto basis = noise::NoiseBasis::custom_linear({a, b});
  const Eigen::VectorXd x0 = vec({1.0, 0.0});
  const Eigen::VectorXd exact = integrate_xi_eps(basis, path, x0).bottomRows(1).transpose();
  std::vector<double> err;
  for (int levels : {4, 6, 8}) {
    const Eigen::VectorXd rde = integrate_xi_rde(basis, rough_lift(path, levels), x0).bottomRows(1).transpose();
    err.push_back((rde - exact).norm());
  }
  EXPECT_LT(err[1], err[0]);
  EXPECT_LT(err[2], err[1]);
  EXPECT_LT(err[2], 0.05 * std::max(1.0, exact.norm()));
}

TEST(Centering, OuObservableIsCentred) {
  const auto spec = ou_surrogate(1.0, Eigen::MatrixXd::Identity(2, 2), 0.05);
  const auto r = centering_check(spec, 4, 1000.0);
  for (int i = 0; i < 2; ++i) EXPECT_LE(std::abs(r.mean(i)), 3.0 * r.standard_error(i));
}

TEST(Calibration, LorenzObservableCentredWithUnitScale) {
  const auto spec = calibrate_observable(lorenz63_default(), 12, 2000.0);
  EXPECT_EQ(spec.observable.rows(), 2);
  EXPECT_EQ(spec.observable(0, 2), 0.0);
  // x and y of Lorenz-63 have standard deviation near 7.9 and 9.0
  EXPECT_NEAR(1.0 / spec.observable(0, 0), 7.9, 0.5);
  EXPECT_NEAR(1.0 / spec.observable(1, 1), 9.0, 0.5);
}

TEST(KendallTau, MonotoneAndReversed) {
  EXPECT_DOUBLE_EQ(kendall_tau({0.2, 0.1, 0.05}, {0.3, 0.2, 0.1}), 1.0);
  EXPECT_DOUBLE_EQ(kendall_tau({0.2, 0.1, 0.05}, {0.1, 0.2, 0.3}), -1.0);
  EXPECT_THROW(kendall_tau({1.0}, {1.0}), std::invalid_argument);
}

TEST(ConvergenceReport, TorusOuShrinksTowardsLimit) {
  ConvergenceSetup setup;
  setup.fast = ou_surrogate(1.0, Eigen::MatrixXd::Identity(1, 1));
  setup.fields = noise::NoiseBasis::torus_constant({vec({1.0})});
  setup.x0 = vec({0.0});
  setup.epsilons = {0.5, 0.1};
  setup.members = 2000;
  setup.slow_steps = 16;
  setup.workers = 1;
  const auto report = convergence_report(setup);
  ASSERT_EQ(report.rows.size(), 2u);
  EXPECT_EQ(report.records.size(), 4000u);
  EXPECT_DOUBLE_EQ(report.rows[1].null_band, stats::ks_null_band(2000, 2000, 0.05));
  EXPECT_LT(report.rows[1].ks_stat, 2.0 * report.rows[1].null_band);
  EXPECT_GT(report.rows[0].ks_stat, report.rows[1].ks_stat);
  EXPECT_DOUBLE_EQ(report.trend_tau, 1.0);
  const auto& r = report.records.front();
  EXPECT_EQ(r.endpoint(0), setup.x0(0) + r.b1(0));
}

TEST(ConvergenceReport, CompositionWithShearMeanFlow) {
  ConvergenceSetup setup;
  setup.fast = ou_surrogate(1.0, Eigen::MatrixXd::Identity(2, 2));
  setup.fields = noise::NoiseBasis::torus_constant({vec({1.0, 0.0}), vec({0.0, 1.0})});
  setup.x0 = vec({0.0, 0.5});
  MeanVelocity u;
  u.kind = MeanVelocity::Kind::Shear;
  u.amplitude = 0.8;
  setup.mean_velocity = u;
  setup.epsilons = {0.2, 0.1};
  setup.members = 2000;
  setup.slow_steps = 16;
  setup.workers = 1;
  const auto report = convergence_report(setup);
  EXPECT_LT(report.rows[1].ks_stat, 2.0 * report.rows[1].null_band);
  EXPECT_DOUBLE_EQ(report.rows[1].null_band, stats::ks_null_band(2000, 2000, 0.05 / 2));
}

TEST(ConvergenceReport, DeterministicForFixedSeed) {
  ConvergenceSetup setup;
  setup.fast = ou_surrogate(1.0, Eigen::MatrixXd::Identity(1, 1));
  setup.fields = noise::NoiseBasis::torus_constant({vec({1.0})});
  setup.x0 = vec({0.0});
  setup.epsilons = {0.3, 0.2};
  setup.members = 100;
  setup.slow_steps = 8;
  setup.workers = 1;
  const auto a = convergence_report(setup);
  setup.workers = 3;
  const auto b = convergence_report(setup);
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    EXPECT_EQ(a.records[i].endpoint, b.records[i].endpoint);
    EXPECT_EQ(a.records[i].limit_endpoint, b.records[i].limit_endpoint);
  }
  EXPECT_EQ(a.rows[1].ks_stat, b.rows[1].ks_stat);
}
