#include "epflow/statistics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "epflow/integrators.hpp"

namespace epflow::stats {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double ks_two_sample(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("ks_two_sample: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0;
  std::size_t j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

double ks_one_sample(std::vector<double> a, const std::function<double(double)>& cdf) {
  if (a.empty()) throw std::invalid_argument("ks_one_sample: empty sample");
  std::sort(a.begin(), a.end());
  const double n = static_cast<double>(a.size());
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double f = cdf(a[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  return d;
}

double ks_null_band(std::size_t n, std::size_t m, double alpha) {
  const double c = std::sqrt(-0.5 * std::log(0.5 * alpha));
  const double nn = static_cast<double>(n);
  const double mm = static_cast<double>(m);
  return c * std::sqrt((nn + mm) / (nn * mm));
}

double ks_two_sample_columns(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.cols() != b.cols()) throw std::invalid_argument("ks_two_sample_columns: column mismatch");
  double d = 0.0;
  for (Eigen::Index c = 0; c < a.cols(); ++c) {
    std::vector<double> xa(a.col(c).data(), a.col(c).data() + a.rows());
    std::vector<double> xb(b.col(c).data(), b.col(c).data() + b.rows());
    d = std::max(d, ks_two_sample(std::move(xa), std::move(xb)));
  }
  return d;
}

MeanEstimate jackknife_mean(const std::vector<Eigen::MatrixXd>& samples) {
  const std::size_t m = samples.size();
  if (m < 2) throw std::invalid_argument("jackknife_mean: need at least 2 samples");
  const Eigen::Index rows = samples.front().rows();
  const Eigen::Index cols = samples.front().cols();
  MeanEstimate est{Eigen::MatrixXd(rows, cols), Eigen::MatrixXd(rows, cols)};
  std::vector<double> column(m);
  const double mm = static_cast<double>(m);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      for (std::size_t i = 0; i < m; ++i) column[i] = samples[i](r, c);
      const double total = integrators::pairwise_sum(column);
      const double mean = total / mm;
      // leave-one-out means (total - x_i)/(m-1); their spread gives the se
      double acc = 0.0;
      for (std::size_t i = 0; i < m; ++i) {
        const double loo = (total - column[i]) / (mm - 1.0);
        acc += (loo - mean) * (loo - mean);
      }
      est.mean(r, c) = mean;
      est.standard_error(r, c) = std::sqrt((mm - 1.0) / mm * acc);
    }
  }
  return est;
}

SeriesMean batch_means(const std::vector<double>& series, int batches) {
  if (batches < 2 || series.size() < static_cast<std::size_t>(batches)) {
    throw std::invalid_argument("batch_means: need at least 2 batches with one sample each");
  }
  const std::size_t len = series.size() / static_cast<std::size_t>(batches);
  std::vector<double> means(static_cast<std::size_t>(batches));
  for (int b = 0; b < batches; ++b) {
    means[static_cast<std::size_t>(b)] =
        integrators::pairwise_sum(series.data() + static_cast<std::size_t>(b) * len, len) / static_cast<double>(len);
  }
  const double grand = integrators::pairwise_sum(means) / batches;
  double var = 0.0;
  for (double m : means) var += (m - grand) * (m - grand);
  var /= (batches - 1);
  return {grand, std::sqrt(var / batches)};
}

}  // namespace epflow::stats
