#include "hrshift/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "hrshift/error.hpp"

namespace hrshift {

double mean(std::span<const double> x) {
  if (x.empty()) throw ArgumentError("mean of empty sample");
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double sample_variance(std::span<const double> x) {
  if (x.size() < 2) throw ArgumentError("variance needs at least two values");
  // Shifted by the first value so identical samples give exactly zero.
  const double shift = x.front();
  double s = 0.0, ss = 0.0;
  for (double v : x) {
    s += v - shift;
    ss += (v - shift) * (v - shift);
  }
  const double n = static_cast<double>(x.size());
  return std::max(0.0, (ss - s * s / n) / (n - 1));
}

double t_two_sided_p(double t, double df) {
  if (!(df > 0)) throw ArgumentError("t distribution needs positive degrees of freedom");
  if (std::isnan(t)) throw ArgumentError("t statistic is NaN");
  if (std::isinf(t)) return 0.0;
  boost::math::students_t dist(df);
  return 2.0 * boost::math::cdf(boost::math::complement(dist, std::fabs(t)));
}

double normal_cdf(double x) {
  if (std::isinf(x)) return x > 0 ? 1.0 : 0.0;
  return boost::math::cdf(boost::math::normal(), x);
}

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw ArgumentError("normal quantile needs p in (0, 1)");
  return boost::math::quantile(boost::math::normal(), p);
}

double ks_p_value(double d, std::size_t n) {
  if (n == 0) throw ArgumentError("KS p-value needs n > 0");
  const double sn = std::sqrt(static_cast<double>(n));
  const double lambda = (sn + 0.12 + 0.11 / sn) * d;
  if (lambda < 1e-3) return 1.0;
  double sum = 0.0;
  for (int j = 1; j <= 200; ++j) {
    const double term = std::exp(-2.0 * j * j * lambda * lambda);
    sum += (j % 2 ? 1.0 : -1.0) * term;
    if (term < 1e-16) break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

KsResult ks_test(std::span<const double> sample, const std::function<double(double)>& cdf) {
  if (sample.empty()) throw ArgumentError("KS test of empty sample");
  std::vector<double> x(sample.begin(), sample.end());
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double f = cdf(x[i]);
    d = std::max({d, (i + 1) / n - f, f - i / n});
  }
  return {d, ks_p_value(d, x.size())};
}

BhResult benjamini_hochberg(std::span<const double> p, double q) {
  const std::size_t m = p.size();
  BhResult out;
  out.rejected.assign(m, false);
  if (m == 0) return out;
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return p[a] < p[b]; });
  std::size_t k = 0;
  for (std::size_t i = m; i >= 1; --i) {
    if (p[order[i - 1]] <= q * static_cast<double>(i) / static_cast<double>(m)) {
      k = i;
      break;
    }
  }
  out.rejections = k;
  out.threshold = q * static_cast<double>(k) / static_cast<double>(m);
  for (std::size_t i = 0; i < k; ++i) out.rejected[order[i]] = true;
  return out;
}

std::vector<double> isotonic_increasing(std::span<const double> y, std::span<const double> w) {
  if (!w.empty() && w.size() != y.size()) throw ArgumentError("isotonic weights size mismatch");
  struct Block {
    double value, weight;
    std::size_t count;
  };
  std::vector<Block> blocks;
  for (std::size_t i = 0; i < y.size(); ++i) {
    blocks.push_back({y[i], w.empty() ? 1.0 : w[i], 1});
    while (blocks.size() > 1 && blocks[blocks.size() - 2].value > blocks.back().value) {
      Block b = blocks.back();
      blocks.pop_back();
      Block& a = blocks.back();
      const double tw = a.weight + b.weight;
      a.value = (a.value * a.weight + b.value * b.weight) / tw;
      a.weight = tw;
      a.count += b.count;
    }
  }
  std::vector<double> out;
  out.reserve(y.size());
  for (const auto& b : blocks) out.insert(out.end(), b.count, b.value);
  return out;
}

}  // namespace hrshift
