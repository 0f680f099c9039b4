#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "hrshift/cp_select.hpp"
#include "hrshift/rng.hpp"

namespace hrshift {

/// Exponential-family form of y ~ N(X zeta, sigma2 V) with AR(1) V:
/// log density = lambda' w - kappa.
struct NaturalParams {
  Eigen::VectorXd lambda;
  Eigen::VectorXd w;
  double kappa = 0.0;
  Eigen::Index p = 0;
};

/// (T-1) x T selector of y_2..y_T.
Eigen::MatrixXd lead_shift(Eigen::Index T);
/// (T-1) x T selector of y_1..y_{T-1}.
Eigen::MatrixXd lag_shift(Eigen::Index T);
/// 2 x T selector of y_1 and y_T.
Eigen::MatrixXd boundary_selector(Eigen::Index T);

NaturalParams natural_params(const Eigen::Ref<const Eigen::MatrixXd>& X, const Eigen::Ref<const Eigen::VectorXd>& y,
                             const Eigen::Ref<const Eigen::VectorXd>& zeta, double sigma2, double rho);
inline double natural_log_density(const NaturalParams& n) { return n.lambda.dot(n.w) - n.kappa; }
/// Dense multivariate normal log density of N(X zeta, sigma2 V) at y.
double ar1_gaussian_log_density(const Eigen::Ref<const Eigen::MatrixXd>& X, const Eigen::Ref<const Eigen::VectorXd>& y,
                                const Eigen::Ref<const Eigen::VectorXd>& zeta, double sigma2, double rho);

/// The change coefficient under study: the c-th cumulative change (c >= 1)
/// of one condition.
struct FocusSpec {
  std::string condition;
  int change = 1;
};

struct PosiOptions {
  std::size_t max_attempt_factor = 50;  // attempts per grid point = factor * D
  double min_acceptance = 0.01;
  double audit_tolerance = 1e-6;
};

/// Observed data reduced to the geometry of the conditional law. Working
/// in whitened space z = W y, the law of z given the nuisance statistics
/// A'z and |z|^2 is a von Mises-Fisher law on a sphere around col(A),
/// truncated to the selection region.
struct PosiProblem {
  CandidateModels models;
  std::size_t selected = 0;
  FocusSpec focus;
  Eigen::Index focus_column = 0;
  bool variance_known = true;
  double sigma2 = 1.0;  // variance used to turn coefficients into natural parameters

  Eigen::VectorXd y_obs;
  Eigen::VectorXd z_obs;
  double zz_obs = 0.0;
  Eigen::MatrixXd A;      // whitened conditioning columns
  Eigen::MatrixXd QA;     // orthonormal basis of col(A)
  Eigen::VectorXd a_obs;  // A' z_obs
  Eigen::VectorXd z_fixed;
  Eigen::VectorXd xf;     // whitened focus column
  Eigen::VectorXd u;      // unit focus direction orthogonal to col(A)
  double xperp_norm = 0.0;
  double radius = 0.0;
  double c0 = 0.0;
  double w_obs = 0.0;  // xf' z_obs
  double t_obs = 0.0;
  Eigen::Index dim = 0;  // dimension of the sphere's ambient complement

  double theta_ols = 0.0;
  double se_naive = 0.0;
  double se_conditional = 0.0;
  // Unwhitened focus statistic and residual vector of the selected model.
  double focus_raw = 0.0;
  Eigen::VectorXd residual_obs;

  /// Natural parameter of a coefficient value.
  double kappa(double coefficient) const { return coefficient / sigma2 * xperp_norm * radius; }
};

/// With variance_known the noise spec of `models` must carry a known sigma2;
/// otherwise sigma2 is estimated from the selected model's GLS fit.
PosiProblem make_posi_problem(const Eigen::Ref<const Eigen::VectorXd>& y, const CandidateModels& models,
                              std::size_t selected, const FocusSpec& focus, bool variance_known);

struct SamplerResult {
  std::vector<double> focus_stats;  // accepted draws
  std::size_t attempts = 0;
  std::size_t accepted = 0;
  std::size_t audit_failures = 0;
  double acceptance_rate = 0.0;
  double max_audit_error = 0.0;
  bool infeasible = false;
};

/// Draws from the conditional law at coefficient `theta` until D draws are
/// accepted or max_attempt_factor * D attempts were made.
SamplerResult conditional_sampler(const PosiProblem& problem, double theta, std::size_t D, Rng& rng,
                                  const PosiOptions& options = {});
/// Fixed number of attempts, no early stop.
SamplerResult sample_attempts(const PosiProblem& problem, double theta, std::size_t attempts, Rng& rng,
                              const PosiOptions& options = {});
/// Cosine t = u'omega of a von Mises-Fisher direction on S^{dim-1}, concentration kappa.
double sample_vmf_cosine(double kappa, Eigen::Index dim, Rng& rng);

struct CdPoint {
  double theta = 0.0;
  double cd = 0.0;        // raw estimate
  double cd_clean = 0.0;  // after isotonic cleanup
  std::size_t accepted = 0;
  std::size_t attempts = 0;
  double acceptance = 0.0;
  double max_audit_error = 0.0;
  bool feasible = false;
};

struct ConfidenceDistributionEstimate {
  std::vector<CdPoint> points;
  std::size_t D = 0;
  double max_violation = 0.0;  // largest raw deviation from the monotone fit
  double variance = 0.0;
  double median = 0.0;
  double mean = 0.0;
  double ols = 0.0;
  bool failed = false;
  std::string failure_reason;

  std::vector<const CdPoint*> feasible() const;
};

ConfidenceDistributionEstimate approx_cd(const PosiProblem& problem, const std::vector<double>& grid, std::size_t D,
                                         std::uint64_t seed, const PosiOptions& options = {});

/// Variance of the distribution whose CDF is the cleaned estimate, with mass
/// above the grid placed on its last point.
double posi_variance(const ConfidenceDistributionEstimate& cd);

struct BoundsOptions {
  std::size_t max_rounds = 10;
  double min_width = 0.0;  // stop once upper - lower reaches this
};

struct BoundsResult {
  double lower = 0.0;
  double upper = 0.0;
  std::size_t rounds = 0;
  bool failed = false;
  std::vector<std::pair<double, bool>> evaluated;  // (theta, feasible)
};

/// Bracket of feasible coefficients grown in steps of `a` from `start`.
BoundsResult bounds_search(const PosiProblem& problem, double start, double a, std::size_t DE,
                           const BoundsOptions& bounds, std::uint64_t seed, const PosiOptions& options = {});

struct PosiRunOptions {
  std::size_t D = 500;
  std::size_t DE = 100;
  double step_factor = 2.0;    // a = step_factor * se_conditional unless `a` is set
  double a = 0.0;
  double grid_divisions = 5.0;  // grid step = a / grid_divisions
  double width_factor = 20.0;   // stop when bracket reaches width_factor * se_conditional
  std::size_t max_rounds = 10;
  PosiOptions sampler;
};

struct PosiResult {
  ConfidenceDistributionEstimate cd;
  BoundsResult bounds;
  bool fallback_used = false;
  bool failed = false;
  std::string failure_reason;
  double variance = 0.0;
};

/// Bounds search, grid construction and CD estimation with a restart from a
/// coarse median when the first bracket is infeasible.
PosiResult run_posi(const PosiProblem& problem, const PosiRunOptions& options, std::uint64_t seed);

nlohmann::json to_json(const ConfidenceDistributionEstimate& cd);
nlohmann::json to_json(const PosiResult& r);

}  // namespace hrshift
