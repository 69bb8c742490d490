#include <algorithm>
#include <cmath>
#include <cstdlib>

#include <gtest/gtest.h>

#include "epflow/brownian.hpp"
#include "epflow/homogenisation.hpp"
#include "epflow/integrators.hpp"
#include "epflow/statistics.hpp"

using namespace epflow;
using namespace epflow::integrators;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

VectorField linear(const Eigen::MatrixXd& a) {
  return [a](const State& x) { return State(a * x); };
}

StepProblem rigid_body_problem(const Eigen::Vector3d& inertia) {
  StepProblem p;
  p.drift = [inertia](const State& x) {
    const Eigen::Vector3d pi = x;
    return State(pi.cross(pi.cwiseQuotient(inertia)));
  };
  return p;
}

/// dx = A x dt + B x o dW, a 2-d linear system with non-commuting A and B.
StepProblem linear_sde() {
  Eigen::Matrix2d a, b;
  a << -0.5, 1.0, -1.0, -0.2;
  b << 0.0, 0.6, -0.6, 0.3;
  StepProblem p;
  p.drift = linear(a);
  p.diffusions = {linear(b)};
  return p;
}

}  // namespace

TEST(HeunStep, ZeroProblemLeavesStateUnchanged) {
  StepProblem p;
  const State x = vec({1.0, -2.0, 3.0});
  EXPECT_EQ(heun_step(p, x, 0.1, vec({0.3})), x);
}

TEST(HeunStep, LinearDriftLocalErrorIsThirdOrder) {
  StepProblem p;
  const double a = -1.3;
  p.drift = [a](const State& x) { return State(a * x); };
  const State x = vec({1.0});
  double prev = 0.0;
  for (double dt : {0.1, 0.05, 0.025}) {
    const double err = std::abs(heun_step(p, x, dt, Eigen::VectorXd::Zero(0))(0) - std::exp(a * dt));
    if (prev > 0.0) EXPECT_NEAR(prev / err, 8.0, 0.6);
    prev = err;
  }
}

TEST(HeunStep, NonFiniteStateThrows) {
  StepProblem p;
  p.drift = [](const State& x) { return State(x.array() / 0.0); };
  EXPECT_THROW(heun_step(p, vec({1.0}), 0.1, Eigen::VectorXd::Zero(0)), IntegrationError);
}

TEST(MidpointStep, ZeroFieldIsIdentity) {
  StepProblem p;
  const State x = vec({0.1, 0.2});
  const auto r = midpoint_step(p, x, 0.1, vec({1.0}));
  EXPECT_TRUE(r.converged);
  EXPECT_EQ(r.x, x);
}

TEST(MidpointStep, PreservesRigidBodyNorm) {
  const auto p = rigid_body_problem({1.0, 2.0, 3.0});
  State x = vec({1.0, 0.5, -0.7});
  const double c0 = x.squaredNorm();
  for (int n = 0; n < 1000; ++n) {
    const State next = midpoint_step_or_throw(p, x, 1e-2, Eigen::VectorXd::Zero(0), 1e-15, 100);
    EXPECT_LT(std::abs(next.squaredNorm() - x.squaredNorm()), 1e-12);
    x = next;
  }
  EXPECT_LT(std::abs(x.squaredNorm() - c0), 1e-11);
}

TEST(MidpointStep, AgreesWithHeunToSecondOrderPerStep) {
  const auto p = rigid_body_problem({1.0, 2.0, 3.0});
  const State x = vec({1.0, 0.5, -0.7});
  double prev = 0.0;
  for (double dt : {0.1, 0.05, 0.025}) {
    const double d = (midpoint_step_or_throw(p, x, dt, Eigen::VectorXd::Zero(0)) -
                      heun_step(p, x, dt, Eigen::VectorXd::Zero(0)))
                         .norm();
    if (prev > 0.0) EXPECT_GT(prev / d, 3.5);
    prev = d;
  }
}

TEST(MidpointStep, ReportsNonConvergence) {
  StepProblem p;
  p.drift = [](const State& x) { return State(50.0 * x); };
  const auto r = midpoint_step(p, vec({1.0}), 1.0, Eigen::VectorXd::Zero(0), 1e-12, 20);
  EXPECT_FALSE(r.converged);
  EXPECT_EQ(r.iterations, 20);
  EXPECT_THROW(midpoint_step_or_throw(p, vec({1.0}), 1.0, Eigen::VectorXd::Zero(0), 1e-12, 20), IntegrationError);
}

TEST(Rk4Step, FourthOrderOnExponential) {
  const VectorField f = [](const State& x) { return State(-x); };
  auto solve = [&](int n) {
    State x = vec({1.0});
    for (int i = 0; i < n; ++i) x = rk4_step(f, x, 1.0 / n);
    return std::abs(x(0) - std::exp(-1.0));
  };
  EXPECT_NEAR(solve(10) / solve(20), 16.0, 1.0);
}

TEST(RdeStep, ConstantFieldsWithoutAreaTranslate) {
  RoughFields f;
  f.fields = {[](const State&) { return vec({1.0, 0.0}); }, [](const State&) { return vec({0.5, 2.0}); }};
  const State out = rde_step(f, vec({0.1, 0.1}), vec({0.3, -0.2}), Eigen::MatrixXd::Zero(2, 2), 0.1);
  EXPECT_LT((out - vec({0.1 + 0.3 - 0.1, 0.1 - 0.4})).norm(), 1e-15);
}

TEST(RdeStep, SmoothDriverConvergesAtSecondOrder) {
  Eigen::Matrix2d a0, a1;
  a0 << 0.0, 1.0, -1.0, 0.0;
  a1 << 0.5, 0.0, 0.3, -0.5;
  RoughFields f;
  f.fields = {linear(a0), linear(a1)};
  f.jacobian_apply = [a0, a1](int k, const State&, const State& v) { return State((k == 0 ? a0 : a1) * v); };

  const int fine_levels = 14;
  const int fine = 1 << fine_levels;
  Eigen::MatrixXd samples(fine + 1, 2);
  for (int i = 0; i <= fine; ++i) {
    const double t = static_cast<double>(i) / fine;
    samples(i, 0) = std::sin(3.0 * t);
    samples(i, 1) = t * t - 0.5 * t;
  }
  samples.row(0).setZero();
  const auto lift = homog::lift_samples(samples, 1.0, fine_levels);

  State reference = vec({1.0, 0.0});
  for (int i = 0; i < fine; ++i) {
    const Eigen::Vector2d db = (samples.row(i + 1) - samples.row(i)).transpose();
    const VectorField g = [&](const State& x) { return State((db(0) * a0 + db(1) * a1) * x); };
    reference = rk4_step(g, reference, 1.0);
  }

  std::vector<double> errors;
  for (int level : {6, 7, 8, 9}) {
    State x = vec({1.0, 0.0});
    for (int j = 0; j < (1 << level); ++j) {
      x = rde_step(f, x, lift.increment(level, j), lift.bb[static_cast<std::size_t>(level)][static_cast<std::size_t>(j)], 0.0);
    }
    errors.push_back((x - reference).norm());
  }
  for (std::size_t i = 1; i < errors.size(); ++i) EXPECT_GT(std::log2(errors[i - 1] / errors[i]), 1.8);
}

TEST(RdeStep, StratonovichLiftMatchesHeunInLaw) {
  const auto problem = linear_sde();
  RoughFields f;
  f.drift = problem.drift;
  Eigen::Matrix2d b;
  b << 0.0, 0.6, -0.6, 0.3;
  f.fields = problem.diffusions;
  f.jacobian_apply = [b](int, const State&, const State& v) { return State(b * v); };

  const int members = 5000;
  const int steps = 100;
  const double dt = 1.0 / steps;
  auto endpoints = [&](std::uint64_t root, bool rough) {
    auto out = run_ensemble(
        members, root,
        [&](int, std::uint64_t seed) {
          const auto w = make_brownian(seed, 1, dt, steps);
          State x = vec({1.0, 0.5});
          for (int n = 0; n < steps; ++n) {
            const Eigen::VectorXd dw = w.increments.row(n).transpose();
            x = rough ? rde_step(f, x, dw, 0.5 * dw * dw.transpose(), dt) : heun_step(problem, x, dt, dw);
          }
          return x;
        },
        1);
    Eigen::MatrixXd m(members, 2);
    for (int i = 0; i < members; ++i) m.row(i) = out[static_cast<std::size_t>(i)].transpose();
    return m;
  };
  const double ks = stats::ks_two_sample_columns(endpoints(1, true), endpoints(2, false));
  EXPECT_LT(ks, stats::ks_null_band(members, members, 0.05 / 2));
}

TEST(RdeStep, PathwiseAgreementWithHeunForCommutingNoise) {
  // sin(x) and 0.5 sin(x) commute; for linear fields the two schemes coincide exactly
  StepProblem heun;
  heun.diffusions = {[](const State& x) { return State(x.array().sin()); },
                     [](const State& x) { return State(0.5 * x.array().sin()); }};
  RoughFields rough;
  rough.fields = heun.diffusions;
  rough.jacobian_apply = [](int k, const State& x, const State& v) {
    return State((k == 0 ? 1.0 : 0.5) * x.array().cos() * v.array());
  };

  auto mean_gap = [&](int steps) {
    const double dt = 1.0 / steps;
    double total = 0.0;
    for (int m = 0; m < 100; ++m) {
      const auto w = make_brownian(derive_member_seed(99, static_cast<std::uint64_t>(m)), 2, dt, steps);
      State x = vec({1.0});
      State y = x;
      double gap = 0.0;
      for (int n = 0; n < steps; ++n) {
        const Eigen::VectorXd dw = w.increments.row(n).transpose();
        x = heun_step(heun, x, dt, dw);
        y = rde_step(rough, y, dw, 0.5 * dw * dw.transpose(), dt);
        gap = std::max(gap, (x - y).norm());
      }
      total += gap;
    }
    return total / 100.0;
  };
  const double coarse = mean_gap(100);
  const double fine = mean_gap(400);
  EXPECT_LT(coarse, 0.05);
  EXPECT_GT(coarse / fine, 2.5);
}

TEST(HeunMidpoint, AgreeInLawAsStepShrinks) {
  const auto problem = linear_sde();
  const int members = 3000;
  for (int steps : {100, 1000}) {
    const double dt = 1.0 / steps;
    auto endpoints = [&](bool midpoint) {
      auto out = run_ensemble(
          members, 17,
          [&](int, std::uint64_t seed) {
            const auto w = make_brownian(seed ^ (midpoint ? 0x5A5AULL : 0ULL), 1, dt, steps);
            State x = vec({1.0, 0.5});
            for (int n = 0; n < steps; ++n) {
              const Eigen::VectorXd dw = w.increments.row(n).transpose();
              x = midpoint ? midpoint_step_or_throw(problem, x, dt, dw) : heun_step(problem, x, dt, dw);
            }
            return x;
          },
          1);
      Eigen::MatrixXd m(members, 2);
      for (int i = 0; i < members; ++i) m.row(i) = out[static_cast<std::size_t>(i)].transpose();
      return m;
    };
    EXPECT_LT(stats::ks_two_sample_columns(endpoints(true), endpoints(false)),
              stats::ks_null_band(members, members, 0.05 / 2))
        << "steps = " << steps;
  }
}

TEST(Brownian, DeterministicForFixedInputs) {
  const auto a = make_brownian(42, 3, 1e-3, 500);
  const auto b = make_brownian(42, 3, 1e-3, 500);
  EXPECT_EQ(a.increments, b.increments);
  EXPECT_NE(a.increments, make_brownian(43, 3, 1e-3, 500).increments);
  EXPECT_LT((a.values().bottomRows(1).transpose() - a.endpoint()).norm(), 1e-13);
  EXPECT_EQ(a.values().row(0).norm(), 0.0);
}

TEST(Brownian, EnsembleMeanAndVariance) {
  const int members = 4000;
  const int steps = 50;
  const double dt = 0.02;
  std::vector<double> ends;
  for (int m = 0; m < members; ++m) {
    ends.push_back(make_brownian(derive_member_seed(7, static_cast<std::uint64_t>(m)), 1, dt, steps).endpoint()(0));
  }
  const double t = steps * dt;
  double mean = 0.0;
  for (double e : ends) mean += e;
  mean /= members;
  double var = 0.0;
  for (double e : ends) var += (e - mean) * (e - mean);
  var /= members - 1;
  EXPECT_LT(std::abs(mean), 3.0 * std::sqrt(t / members));
  EXPECT_LT(std::abs(var - t), 3.0 * t * std::sqrt(2.0 / (members - 1)));
}

TEST(Brownian, RejectsBadArguments) {
  EXPECT_THROW(make_brownian(1, 1, 0.0, 10), std::invalid_argument);
  EXPECT_THROW(make_brownian(1, -1, 0.1, 10), std::invalid_argument);
}

TEST(DeriveMemberSeed, InjectiveOverAMillionIndices) {
  std::vector<std::uint64_t> seeds(1000000);
  for (std::uint64_t i = 0; i < seeds.size(); ++i) seeds[i] = derive_member_seed(2024, i);
  std::sort(seeds.begin(), seeds.end());
  EXPECT_EQ(std::adjacent_find(seeds.begin(), seeds.end()), seeds.end());
  EXPECT_NE(derive_member_seed(1, 0), derive_member_seed(2, 0));
}

TEST(PairwiseSum, MatchesExactSumOfIntegers) {
  std::vector<double> v(1001);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<double>(i);
  EXPECT_EQ(pairwise_sum(v), 500500.0);
  EXPECT_EQ(pairwise_sum(v.data(), 0), 0.0);
}

TEST(RunEnsemble, ResultsIndependentOfWorkerCount) {
  auto fn = [](int m, std::uint64_t seed) { return make_brownian(seed, 2, 0.01, 10 + m % 3).endpoint(); };
  const auto one = run_ensemble(37, 5, fn, 1);
  const auto four = run_ensemble(37, 5, fn, 4);
  ASSERT_EQ(one.size(), four.size());
  for (std::size_t i = 0; i < one.size(); ++i) EXPECT_EQ(one[i], four[i]);
  EXPECT_EQ(one[3], make_brownian(derive_member_seed(5, 3), 2, 0.01, 10).endpoint());
}

TEST(RunEnsemble, IntegrationErrorCarriesMemberIndex) {
  auto fn = [](int m, std::uint64_t) {
    if (m == 6) throw IntegrationError("blow-up");
    return m;
  };
  for (int workers : {1, 3}) {
    try {
      run_ensemble(10, 1, fn, workers);
      FAIL() << "expected MemberError";
    } catch (const MemberError& e) {
      EXPECT_EQ(e.member(), 6);
      EXPECT_EQ(e.reason(), "blow-up");
    }
  }
}

TEST(RunEnsemble, EmptyEnsemble) { EXPECT_TRUE(run_ensemble(0, 1, [](int, std::uint64_t) { return 0; }).empty()); }

TEST(DefaultWorkerCount, HonoursEnvironment) {
  ::setenv("EPFLOW_WORKERS", "3", 1);
  EXPECT_EQ(default_worker_count(), 3);
  ::setenv("EPFLOW_WORKERS", "0", 1);
  EXPECT_GE(default_worker_count(), 1);
  ::unsetenv("EPFLOW_WORKERS");
  EXPECT_GE(default_worker_count(), 1);
}
