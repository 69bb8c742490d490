#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "epflow/brownian.hpp"
#include "epflow/noise.hpp"

using namespace epflow;
using noise::NoiseBasis;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

Eigen::MatrixXd single_step(double w1, double w2 = 0.0, int k = 1) {
  Eigen::MatrixXd inc(1, k);
  inc(0, 0) = w1;
  if (k > 1) inc(0, 1) = w2;
  return inc;
}

NoiseBasis planar(double amplitude, double decay, double a, double b) {
  noise::PlanarKillingParams p;
  p.amplitude = amplitude;
  p.decay = decay;
  p.a = a;
  p.b = b;
  return NoiseBasis::planar_killing(p);
}

Eigen::MatrixXd random_antisymmetric(int k, std::uint64_t seed) {
  integrators::NormalStream n(seed);
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(k, k);
  for (int i = 0; i < k; ++i) {
    for (int j = i + 1; j < k; ++j) {
      g(i, j) = n();
      g(j, i) = -g(i, j);
    }
  }
  return g;
}

}  // namespace

TEST(XiEval, TorusConstantIsConstant) {
  const auto basis = NoiseBasis::torus_constant({vec({1.0, 0.0})});
  EXPECT_EQ(noise::xi_eval(basis, 0, vec({0.3, -2.0})), vec({1.0, 0.0}));
  EXPECT_EQ(noise::xi_eval(basis, 0, vec({5.0, 1.0})), vec({1.0, 0.0}));
}

TEST(XiEval, PlanarRotationVanishesAtPivot) {
  const auto basis = planar(1.0, 0.5, 0.3, 0.2).with_pivot({0.4, -0.1});
  EXPECT_EQ(noise::xi_eval(basis, 0, vec({0.4, -0.1})).norm(), 0.0);
  EXPECT_EQ(noise::xi_eval(basis, 1, vec({3.0, 3.0})), vec({-0.2, 0.3}));
}

TEST(XiEval, PlanarRotationProfile) {
  const double A = 1.3, r = 0.5;
  const auto basis = planar(A, r, 0.0, 0.0);
  const Eigen::VectorXd x = vec({0.6, 0.8});
  const double rho = 1.0;
  const Eigen::VectorXd expected = A * rho * std::exp(-0.5 * r * rho * rho) * vec({0.8, -0.6});
  EXPECT_LT((noise::xi_eval(basis, 0, x) - expected).norm(), 1e-15);
}

TEST(XiEval, So3AxisCrossProduct) {
  const double sigma = 0.7;
  const auto basis = NoiseBasis::so3_axis({sigma * Eigen::Vector3d::UnitZ()});
  EXPECT_LT((noise::xi_eval(basis, 0, vec({1, 0, 0})) - vec({0, -sigma, 0})).norm(), 1e-15);
}

TEST(XiEval, IndexOutOfRangeThrows) {
  const auto basis = NoiseBasis::torus_constant({vec({1.0, 0.0})});
  EXPECT_THROW(noise::xi_eval(basis, 1, vec({0, 0})), std::out_of_range);
  EXPECT_THROW(noise::xi_eval(basis, -1, vec({0, 0})), std::out_of_range);
  EXPECT_THROW(noise::xi_commutator(basis, 0, 3, vec({0, 0})), std::out_of_range);
}

TEST(XiCommutator, ConstantAndParallelFieldsCommute) {
  const auto torus = NoiseBasis::torus_constant({vec({1, 0}), vec({0.5, 2})});
  EXPECT_EQ(noise::xi_commutator(torus, 0, 1, vec({0.2, 0.4})).norm(), 0.0);
  EXPECT_TRUE(torus.commuting());
  const auto axes = NoiseBasis::so3_axis({Eigen::Vector3d::UnitZ(), 2.0 * Eigen::Vector3d::UnitZ()});
  EXPECT_LT(noise::xi_commutator(axes, 0, 1, vec({1, 2, 3})).norm(), 1e-15);
  EXPECT_TRUE(axes.commuting());
}

TEST(XiCommutator, LinearFieldsGiveMatrixCommutator) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n;
  Eigen::MatrixXd a(3, 3), b(3, 3);
  for (int i = 0; i < 9; ++i) {
    a(i / 3, i % 3) = n(rng);
    b(i / 3, i % 3) = n(rng);
  }
  const auto basis = NoiseBasis::custom_linear({a, b});
  const Eigen::VectorXd x = vec({0.3, -1.0, 0.7});
  EXPECT_LT((noise::xi_commutator(basis, 0, 1, x) - (b * a - a * b) * x).norm(), 1e-13);
  EXPECT_FALSE(basis.commuting());
}

TEST(XiCommutator, PlanarMatchesFiniteDifferences) {
  const auto basis = planar(1.1, 0.7, 0.3, -0.4);
  const Eigen::VectorXd x = vec({0.4, -0.9});
  const double h = 1e-6;
  auto jac = [&](int k, const Eigen::VectorXd& v) {
    return ((noise::xi_eval(basis, k, x + h * v) - noise::xi_eval(basis, k, x - h * v)) / (2 * h)).eval();
  };
  const Eigen::VectorXd fd = jac(1, noise::xi_eval(basis, 0, x)) - jac(0, noise::xi_eval(basis, 1, x));
  EXPECT_LT((noise::xi_commutator(basis, 0, 1, x) - fd).norm(), 1e-8);
  EXPECT_GT(fd.norm(), 1e-3);
}

TEST(NoiseBasis, GammaMustBeAntisymmetric) {
  const auto basis = NoiseBasis::torus_constant({vec({1, 0}), vec({0, 1})});
  Eigen::MatrixXd g(2, 2);
  g << 0, 1, -1, 0;
  EXPECT_NO_THROW(basis.with_gamma(g));
  g(1, 0) = -0.9;
  EXPECT_THROW(basis.with_gamma(g), std::invalid_argument);
  EXPECT_THROW(basis.with_gamma(Eigen::MatrixXd::Zero(3, 3)), std::invalid_argument);
}

TEST(NoiseBasis, SigmaMustBeSymmetricPsd) {
  const auto basis = NoiseBasis::torus_constant({vec({1, 0}), vec({0, 1})});
  Eigen::MatrixXd s(2, 2);
  s << 2, 0.5, 0.5, 1;
  EXPECT_NO_THROW(basis.with_sigma(s));
  s(0, 1) = 0.4;
  EXPECT_THROW(basis.with_sigma(s), std::invalid_argument);
  s << 1, 2, 2, 1;
  EXPECT_THROW(basis.with_sigma(s), std::invalid_argument);
}

TEST(BracketDrift, ZeroGammaGivesZero) {
  const auto basis = NoiseBasis::so3_axis({Eigen::Vector3d::UnitX(), Eigen::Vector3d::UnitY()});
  EXPECT_EQ(noise::bracket_drift(basis, vec({1, 2, 3})).norm(), 0.0);
}

TEST(BracketDrift, HalfGammaSumOfCommutators) {
  const auto base = NoiseBasis::so3_axis({Eigen::Vector3d::UnitX(), Eigen::Vector3d::UnitY()});
  Eigen::MatrixXd g(2, 2);
  g << 0, 0.6, -0.6, 0;
  const auto basis = base.with_gamma(g);
  const Eigen::VectorXd x = vec({0.5, -1.0, 2.0});
  const Eigen::VectorXd expected = 0.5 * (0.6 * noise::xi_commutator(basis, 0, 1, x) - 0.6 * noise::xi_commutator(basis, 1, 0, x));
  EXPECT_LT((noise::bracket_drift(basis, x) - expected).norm(), 1e-15);
  EXPECT_GT(expected.norm(), 0.1);
}

TEST(GenerateFrame, ZeroPathGivesIdentity) {
  const Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(20, 2);
  const Eigen::VectorXd x = vec({0.3, -0.7, 1.1});
  for (const auto& basis : {NoiseBasis::so3_axis({Eigen::Vector3d::UnitX(), Eigen::Vector3d::UnitZ()}),
                            NoiseBasis::custom_linear({Eigen::MatrixXd::Identity(3, 3), Eigen::MatrixXd::Ones(3, 3)})}) {
    for (const auto& s : noise::generate_frame(basis, zero, 0.01)) {
      EXPECT_LT((noise::apply_frame(s.frame, x) - x).norm(), 1e-15);
    }
  }
  for (const auto& s : noise::generate_frame(planar(1, 0, 0.3, 0.2), zero, 0.01)) {
    EXPECT_LT((noise::apply_frame(s.frame, x.head(2)) - x.head(2)).norm(), 1e-15);
  }
}

TEST(GenerateFrame, So3QuarterTurn) {
  const auto basis = NoiseBasis::so3_axis({Eigen::Vector3d::UnitZ()});
  const auto frames = noise::generate_frame(basis, single_step(M_PI / 2), 1.0);
  ASSERT_EQ(frames.size(), 2u);
  EXPECT_EQ(frames.front().t, 0.0);
  const auto& r = std::get<lie::Rotation3>(frames.back().frame);
  EXPECT_LT((r.apply(Eigen::Vector3d::UnitX()) - Eigen::Vector3d::UnitY()).norm(), 1e-12);
}

TEST(GenerateFrame, TorusShift) {
  const auto basis = NoiseBasis::torus_constant({vec({1.0, 0.0})});
  const auto frames = noise::generate_frame(basis, single_step(0.3), 0.5);
  EXPECT_LT((std::get<Eigen::VectorXd>(frames.back().frame) - vec({0.3, 0.0})).norm(), 1e-15);
  EXPECT_EQ(frames.back().brownian(0), 0.3);
}

TEST(GenerateFrame, RotationsStayOnGroup) {
  const auto basis = NoiseBasis::so3_axis({Eigen::Vector3d::UnitX(), Eigen::Vector3d(0, 1, 1)});
  const auto path = integrators::make_brownian(3, 2, 1e-3, 3000);
  for (const auto& s : noise::generate_frame(basis, path.increments, 1e-3)) {
    EXPECT_LT(std::get<lie::Rotation3>(s.frame).orthogonality_defect(), 1e-12);
  }
}

TEST(GenerateFrame, PlanarIsometryPreservesDistances) {
  const auto basis = planar(1.0, 0.5, 0.3, 0.2);
  const auto path = integrators::make_brownian(4, 2, 1e-2, 100);
  const Eigen::VectorXd x = vec({0.4, 0.1});
  const Eigen::VectorXd y = vec({-1.0, 2.0});
  for (const auto& s : noise::generate_frame(basis, path.increments, 1e-2)) {
    EXPECT_NEAR((noise::apply_frame(s.frame, x) - noise::apply_frame(s.frame, y)).norm(), (x - y).norm(), 1e-12);
  }
}

TEST(GenerateFrame, CommutingBasisIgnoresGamma) {
  const auto path = integrators::make_brownian(5, 3, 1e-2, 200);
  const Eigen::MatrixXd g = random_antisymmetric(3, 6);
  const Eigen::VectorXd x = vec({0.3, 1.0, -0.5});
  const auto parallel = NoiseBasis::so3_axis({Eigen::Vector3d::UnitZ(), 0.5 * Eigen::Vector3d::UnitZ(), -Eigen::Vector3d::UnitZ()});
  const auto a = noise::generate_frame(parallel, path.increments, 1e-2);
  const auto b = noise::generate_frame(parallel.with_gamma(g), path.increments, 1e-2);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_LT((noise::apply_frame(a[i].frame, x) - noise::apply_frame(b[i].frame, x)).norm(), 1e-12);
  }
  const auto torus = NoiseBasis::torus_constant({vec({1, 0}), vec({0, 1}), vec({1, 1})});
  const auto c = noise::generate_frame(torus, path.increments, 1e-2);
  const auto d = noise::generate_frame(torus.with_gamma(g), path.increments, 1e-2);
  for (std::size_t i = 0; i < c.size(); ++i) {
    EXPECT_LT((std::get<Eigen::VectorXd>(c[i].frame) - std::get<Eigen::VectorXd>(d[i].frame)).norm(), 1e-12);
  }
}

TEST(GenerateFrame, FlowPropertyForClosedForms) {
  const double dt = 1e-2;
  const auto path = integrators::make_brownian(7, 1, dt, 200);
  const Eigen::MatrixXd first = path.increments.topRows(120);
  const Eigen::MatrixXd rest = path.increments.bottomRows(80);
  const auto basis = NoiseBasis::so3_axis({Eigen::Vector3d(0.2, 0.5, 1.0)});
  const auto full = noise::generate_frame(basis, path.increments, dt);
  const auto head = noise::generate_frame(basis, first, dt);
  const auto tail = noise::generate_frame(basis, rest, dt);
  const auto& gt = std::get<lie::Rotation3>(head.back().frame);
  const auto& gs = std::get<lie::Rotation3>(tail.back().frame);
  const auto& g = std::get<lie::Rotation3>(full.back().frame);
  EXPECT_LT((gs.compose(gt).matrix() - g.matrix()).cwiseAbs().maxCoeff(), 1e-12);

  const auto torus = NoiseBasis::torus_constant({vec({1.0, -0.5})});
  const Eigen::VectorXd x = vec({0.1, 0.2});
  const auto tf = noise::generate_frame(torus, path.increments, dt);
  const auto th = noise::generate_frame(torus, first, dt);
  const auto tt = noise::generate_frame(torus, rest, dt);
  const Eigen::VectorXd composed = noise::apply_frame(tt.back().frame, noise::apply_frame(th.back().frame, x));
  EXPECT_LT((composed - noise::apply_frame(tf.back().frame, x)).norm(), 1e-12);
}

TEST(GenerateFrame, RejectsWrongColumnCount) {
  const auto basis = NoiseBasis::torus_constant({vec({1.0, 0.0})});
  EXPECT_THROW(noise::generate_frame(basis, Eigen::MatrixXd::Zero(3, 2), 0.1), std::invalid_argument);
}

TEST(NoiseKind, NamesRoundTrip) {
  for (auto k : {noise::NoiseKind::So3Axis, noise::NoiseKind::TorusConstant, noise::NoiseKind::PlanarKilling,
                 noise::NoiseKind::CustomLinear}) {
    EXPECT_EQ(noise::noise_kind_from_string(noise::to_string(k)), k);
  }
  EXPECT_THROW(noise::noise_kind_from_string("spherical"), std::invalid_argument);
}
