#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Dense>

namespace epflow::integrators {

/// SplitMix64 finaliser; a bijection on 64-bit words.
std::uint64_t splitmix64(std::uint64_t x);

/// Seed of ensemble member `index` derived from `root` in counter mode.
/// Injective in `index` for a fixed root.
std::uint64_t derive_member_seed(std::uint64_t root, std::uint64_t index);

/// Standard normal variates from a seeded 64-bit Mersenne twister.
class NormalStream {
 public:
  explicit NormalStream(std::uint64_t seed) : engine_(seed) {}
  double operator()() { return dist_(engine_); }
  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> dist_{0.0, 1.0};
};

/// K-dimensional Brownian increments on a uniform grid; row n holds
/// W(t_{n+1}) - W(t_n).
struct BrownianPath {
  std::uint64_t seed = 0;
  double dt = 0.0;
  int k = 0;
  Eigen::MatrixXd increments;

  Eigen::Index steps() const { return increments.rows(); }
  Eigen::VectorXd endpoint() const;
  /// (N+1) x K matrix of path values, row 0 = 0.
  Eigen::MatrixXd values() const;
};

BrownianPath make_brownian(std::uint64_t seed, int k, double dt, Eigen::Index steps);

}  // namespace epflow::integrators
