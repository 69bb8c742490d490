#pragma once

#include <functional>
#include <vector>

#include <Eigen/Dense>

namespace epflow::stats {

double normal_cdf(double x);

/// Two-sample Kolmogorov-Smirnov statistic sup |F_a - F_b|.
double ks_two_sample(std::vector<double> a, std::vector<double> b);

/// One-sample KS statistic against a continuous CDF.
double ks_one_sample(std::vector<double> a, const std::function<double(double)>& cdf);

/// Asymptotic critical value of the two-sample statistic at level alpha:
/// sqrt(-ln(alpha/2)/2) * sqrt((n+m)/(n m)).
double ks_null_band(std::size_t n, std::size_t m, double alpha = 0.05);

/// Coordinatewise two-sample KS over the columns of two sample matrices
/// (one row per sample); returns the max statistic. The matching null band
/// is ks_null_band(n, m, alpha / columns) (Bonferroni).
double ks_two_sample_columns(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

struct MeanEstimate {
  Eigen::MatrixXd mean;
  Eigen::MatrixXd standard_error;  // entrywise jackknife
};

/// Sample mean of matrix-valued observations with leave-one-out jackknife
/// standard errors. Throws std::invalid_argument when fewer than 2 samples.
MeanEstimate jackknife_mean(const std::vector<Eigen::MatrixXd>& samples);

/// Mean and batch-means standard error of a correlated scalar series.
struct SeriesMean {
  double mean = 0.0;
  double standard_error = 0.0;
};
SeriesMean batch_means(const std::vector<double>& series, int batches);

}  // namespace epflow::stats
