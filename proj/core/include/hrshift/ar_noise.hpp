#pragma once

#include <array>

#include <Eigen/Dense>

namespace hrshift {

/// Autoregressive noise model. `sigma2` is the marginal variance, so the
/// covariance is sigma2 * V with V the unit-diagonal autocorrelation matrix.
struct NoiseSpec {
  int order = 0;                      // 0 (white), 1 or 2
  std::array<double, 2> phi{0.0, 0.0};  // AR coefficients
  double sigma2 = 1.0;
  bool known = false;  // sigma2 fixed rather than estimated

  static NoiseSpec white(double sigma2 = 1.0, bool known = false) { return {0, {0.0, 0.0}, sigma2, known}; }
  static NoiseSpec ar1(double rho, double sigma2 = 1.0, bool known = false) { return {1, {rho, 0.0}, sigma2, known}; }
  /// Lag-one autocorrelation (rho for AR(1)).
  double rho() const { return order == 1 ? phi[0] : 0.0; }
};

Eigen::MatrixXd ar1_covariance(double rho, Eigen::Index T);
/// Closed-form tridiagonal inverse of ar1_covariance.
Eigen::MatrixXd ar1_precision(double rho, Eigen::Index T);
/// log det of ar1_covariance: (T - 1) log(1 - rho^2).
double ar1_log_det(double rho, Eigen::Index T);
/// Unit-diagonal autocorrelation matrix V of the process.
Eigen::MatrixXd correlation_matrix(const NoiseSpec& spec, Eigen::Index T);

/// Linear map W with W V W' = I. AR(1) uses the Prais-Winsten transform,
/// AR(2) the inverse Cholesky factor of V.
class Whitener {
 public:
  Whitener(const NoiseSpec& spec, Eigen::Index T);

  Eigen::Index size() const { return T_; }
  Eigen::MatrixXd apply_matrix(const Eigen::Ref<const Eigen::MatrixXd>& x) const;
  Eigen::VectorXd apply(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  /// W^{-1} x.
  Eigen::VectorXd unapply(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  /// log det V.
  double log_det() const { return log_det_; }

 private:
  void check_rows(Eigen::Index rows) const;

  int order_ = 0;
  double rho_ = 0.0;
  double scale_ = 1.0;  // 1 / sqrt(1 - rho^2)
  Eigen::Index T_ = 0;
  Eigen::MatrixXd chol_;  // lower Cholesky factor of V (AR(2) only)
  double log_det_ = 0.0;
};

Eigen::MatrixXd whiten(const Eigen::Ref<const Eigen::MatrixXd>& x, const NoiseSpec& spec);

/// Yule-Walker estimate from residuals (mean removed). Coefficients are
/// clamped into the stationary region; sigma2 is the marginal variance.
NoiseSpec estimate_ar(const Eigen::Ref<const Eigen::VectorXd>& residuals, int order = 1);

}  // namespace hrshift
