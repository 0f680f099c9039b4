#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace hrshift {

double mean(std::span<const double> x);
/// Unbiased sample variance; requires at least two values.
double sample_variance(std::span<const double> x);

/// Two-sided p-value of a t statistic with the given degrees of freedom.
double t_two_sided_p(double t, double df);
double normal_cdf(double x);
double normal_quantile(double p);

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

/// One-sample Kolmogorov-Smirnov test of `sample` against a continuous CDF.
KsResult ks_test(std::span<const double> sample, const std::function<double(double)>& cdf);
/// Asymptotic p-value for statistic D with n observations (Stephens' finite-n correction).
double ks_p_value(double d, std::size_t n);

struct BhResult {
  std::vector<bool> rejected;
  std::size_t rejections = 0;
  double threshold = 0.0;  // largest p-value cutoff used, 0 when nothing is rejected
};

/// Benjamini-Hochberg step-up at level q.
BhResult benjamini_hochberg(std::span<const double> p, double q);

/// Non-decreasing least-squares fit (pool adjacent violators).
std::vector<double> isotonic_increasing(std::span<const double> y, std::span<const double> w = {});

}  // namespace hrshift
