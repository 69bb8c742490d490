#include "epflow/brownian.hpp"

#include <cmath>
#include <stdexcept>

namespace epflow::integrators {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_member_seed(std::uint64_t root, std::uint64_t index) {
  // root is mixed once; index enters through an odd multiplier so the
  // argument of the final bijection is injective in index.
  return splitmix64(splitmix64(root) + (index + 1) * 0xD1B54A32D192ED03ULL);
}

Eigen::VectorXd BrownianPath::endpoint() const { return increments.colwise().sum().transpose(); }

Eigen::MatrixXd BrownianPath::values() const {
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(increments.rows() + 1, k);
  for (Eigen::Index n = 0; n < increments.rows(); ++n) w.row(n + 1) = w.row(n) + increments.row(n);
  return w;
}

BrownianPath make_brownian(std::uint64_t seed, int k, double dt, Eigen::Index steps) {
  if (dt <= 0.0 || k < 0 || steps < 0) throw std::invalid_argument("make_brownian: bad arguments");
  BrownianPath path{seed, dt, k, Eigen::MatrixXd(steps, k)};
  NormalStream normal(seed);
  const double scale = std::sqrt(dt);
  for (Eigen::Index n = 0; n < steps; ++n) {
    for (int j = 0; j < k; ++j) path.increments(n, j) = scale * normal();
  }
  return path;
}

}  // namespace epflow::integrators
