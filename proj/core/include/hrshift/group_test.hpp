#pragma once

#include <string>
#include <string_view>

#include <Eigen/Dense>

namespace hrshift {

/// Subject-level estimates gamma_i with known within-subject variances v_i.
struct GroupSample {
  Eigen::VectorXd estimates;
  Eigen::VectorXd within_var;
};

/// Random-effects meta-analysis fit: gamma_i ~ N(eta, tau2 + v_i).
struct RemlFit {
  double eta = 0.0;
  double tau2 = 0.0;
  double var_eta = 0.0;  // (1' Sigma^-1 1)^-1
  double loglik = 0.0;
  bool boundary = false;  // tau2 estimated at zero
};

RemlFit reml_fit(const GroupSample& sample);

enum class StatisticKind { knapp_hartung, wald };
std::string_view statistic_name(StatisticKind k);
StatisticKind statistic_from_name(std::string_view name);

struct GroupTestResult {
  StatisticKind kind = StatisticKind::knapp_hartung;
  RemlFit fit;
  double scale = 1.0;  // Knapp-Hartung SR (1 for Wald)
  double statistic = 0.0;
  double df = 0.0;
  double p_value = 1.0;
  bool degenerate = false;  // zero variance with a nonzero estimate
};

/// Tests eta = 0 with a two-sided t reference on n - 1 degrees of freedom.
GroupTestResult group_test(const GroupSample& sample, StatisticKind kind);
/// Paired test of segment means: REML on the differences after - before
/// with summed within-subject variances.
GroupTestResult paired_group_test(const GroupSample& before, const GroupSample& after, StatisticKind kind);
GroupSample paired_difference(const GroupSample& before, const GroupSample& after);

}  // namespace hrshift
